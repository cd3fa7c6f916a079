"""Fake-stationary affine Volterra processes.

Resolvent pairs for gamma-family kernels, variance-freezing stabilizer
series, measure-driven Riccati-Volterra transforms, exact-covariance path
simulation and Fourier/Monte-Carlo smile pricing.
"""

from .core import (
    ConstantOne,
    GammaKernel,
    Grid,
    Kernel,
    SignedMeasure,
    convolve,
    convolve_measure,
    kernel_eval,
    kernel_laplace,
    kernel_step_moments,
)
from .resolvent import (
    ResolventPair,
    f_lambda_eval,
    f_lambda_norms,
    f_step_moments,
    mittag_leffler,
    resolvent_eval,
)
from .stabilizer import (
    EquationReport,
    ShapeFunction,
    StabilizerSeries,
    phi_from_theta,
    stabilizer_coeffs,
    stabilizer_eval,
    verify_E_lambda_c,
)

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "GammaKernel",
    "ConstantOne",
    "Kernel",
    "SignedMeasure",
    "convolve",
    "convolve_measure",
    "kernel_eval",
    "kernel_laplace",
    "kernel_step_moments",
    "ResolventPair",
    "mittag_leffler",
    "resolvent_eval",
    "f_lambda_eval",
    "f_lambda_norms",
    "f_step_moments",
    "StabilizerSeries",
    "ShapeFunction",
    "EquationReport",
    "stabilizer_coeffs",
    "stabilizer_eval",
    "phi_from_theta",
    "verify_E_lambda_c",
    "__version__",
]

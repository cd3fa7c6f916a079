"""Uniform grids, convolution kernels and signed measures.

The time-domain substrate shared by every other module: a uniform grid type,
the exponentially tilted power kernel family b * e**(-rho t) t**(alpha-1) /
Gamma(alpha) together with the constant kernel, finitely atomic signed
measures with an optional density part, and causal convolution on the grid.

Convolution of a kernel with a sampled function uses product integration:
the kernel is integrated exactly over each step (incomplete-gamma moments
when rho > 0, power moments otherwise) against the piecewise-linear
interpolant of the other factor.  This is second-order accurate for smooth
factors and keeps the integrable kernel singularity exact.  Two-kernel
convolutions use the closed-form semigroup identity when the tilt rates
match and a per-node Gauss-Jacobi rule otherwise.

Key functions:
    Grid, GammaKernel, ConstantOne, SignedMeasure
    kernel_eval, kernel_laplace
    kernel_step_moments  -- exact per-step kernel moments for product integration
    convolve             -- (f * g)(t_k) on the grid nodes
    convolve_measure     -- (K * mu)(t_k) over the open interval [0, t_k)
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import betainc, gamma as _gamma, gammainc, gammaincc

from ._quad import double_jacobi_rule

__all__ = [
    "Grid",
    "GammaKernel",
    "ConstantOne",
    "Kernel",
    "SignedMeasure",
    "kernel_eval",
    "kernel_laplace",
    "kernel_step_moments",
    "convolve",
    "convolve_measure",
]


# ------------------------------ grid ------------------------------


@dataclass(frozen=True)
class Grid:
    """Uniform grid 0 = t_0 < ... < t_n = t_max with step dt = t_max / n."""

    t_max: float
    n: int

    def __post_init__(self):
        if not (self.t_max > 0.0) or self.n < 1:
            raise ValueError("Grid needs t_max > 0 and n >= 1")

    @property
    def dt(self) -> float:
        return self.t_max / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n + 1)

    @classmethod
    def from_nodes(cls, nodes) -> "Grid":
        """Build from an explicit node array; non-uniform spacing is rejected."""
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or nodes[0] != 0.0:
            raise ValueError("need a 1-d node array starting at 0")
        steps = np.diff(nodes)
        if np.any(steps <= 0) or np.max(np.abs(steps - steps[0])) > 1e-12 * steps[0]:
            raise ValueError("only uniform grids are supported")
        return cls(t_max=float(nodes[-1]), n=nodes.size - 1)

    def same_as(self, other: "Grid") -> bool:
        return self.n == other.n and abs(self.t_max - other.t_max) <= 1e-12 * self.t_max

    def require_same(self, other: "Grid", what: str = "operand") -> None:
        if not self.same_as(other):
            raise ValueError(f"{what} lives on a different grid")


# ------------------------------ kernels ------------------------------


class GammaKernel:
    """K(t) = b * exp(-rho t) * t**(alpha-1) / Gamma(alpha).

    alpha in (1/2, 3/2], b > 0, rho >= 0.  Integrable singularity at 0 for
    alpha < 1; continuous with K(0) = b for alpha = 1; vanishing at 0 for
    alpha > 1.
    """

    __slots__ = ("b", "alpha", "rho")

    def __init__(self, b: float, alpha: float, rho: float = 0.0):
        if not (0.5 < alpha <= 1.5):
            raise ValueError("alpha must lie in (1/2, 3/2]")
        if not (b > 0.0):
            raise ValueError("b must be positive")
        if rho < 0.0:
            raise ValueError("rho must be nonnegative")
        self.b = float(b)
        self.alpha = float(alpha)
        self.rho = float(rho)

    def __repr__(self):
        return f"GammaKernel(b={self.b}, alpha={self.alpha}, rho={self.rho})"

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if self.alpha < 1.0:
            if np.any(t_arr <= 0.0):
                raise ValueError("kernel is singular: need t > 0")
        elif np.any(t_arr < 0.0):
            raise ValueError("need t >= 0")
        out = (
            self.b
            * np.exp(-self.rho * t_arr)
            * t_arr ** (self.alpha - 1.0)
            / _gamma(self.alpha)
        )
        return out if out.shape else float(out)

    def laplace(self, s):
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr <= 0.0):
            raise ValueError("Laplace transform requires s > 0")
        out = self.b * (s_arr + self.rho) ** (-self.alpha)
        return out if out.shape else float(out)

    @property
    def hurst(self) -> float:
        return self.alpha - 0.5

    def antiderivative(self, t):
        """int_0^t K(s) ds, exact (regularized incomplete gamma for rho > 0)."""
        t_arr = np.asarray(t, dtype=float)
        t_top = float(t_arr.max()) if t_arr.size else 0.0
        # rho ** -alpha overflows for subnormal rho; once rho * t is below
        # rounding the tilt is exactly 1 in double anyway
        if self.rho * t_top < 1e-14:
            out = self.b * t_arr**self.alpha / _gamma(self.alpha + 1.0)
        else:
            out = self.b * self.rho ** (-self.alpha) * gammainc(self.alpha, self.rho * t_arr)
        return out if out.shape else float(out)


class ConstantOne:
    """The constant kernel K(t) = 1."""

    __slots__ = ()

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = np.ones_like(t_arr)
        return out if out.shape else 1.0

    def laplace(self, s):
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr <= 0.0):
            raise ValueError("Laplace transform requires s > 0")
        out = 1.0 / s_arr
        return out if out.shape else float(out)

    def antiderivative(self, t):
        t_arr = np.asarray(t, dtype=float)
        return t_arr if t_arr.shape else float(t_arr)

    def __repr__(self):
        return "ConstantOne()"


Kernel = Union[GammaKernel, ConstantOne]


def kernel_eval(kernel: Kernel, t):
    return kernel(t)


def kernel_laplace(kernel: Kernel, s):
    return kernel.laplace(s)


# --------------------- product-integration moments ---------------------


def _gammainc_diff(a: float, x_lo: np.ndarray, x_hi: np.ndarray) -> np.ndarray:
    # P-differences lose digits in the deep tail, Q-differences near zero;
    # pick per interval.
    tail = 0.5 * (x_lo + x_hi) > a
    p = gammainc(a, x_hi) - gammainc(a, x_lo)
    q = gammaincc(a, x_lo) - gammaincc(a, x_hi)
    return np.where(tail, q, p)


def kernel_step_moments(kernel: Kernel, grid: Grid):
    """Exact per-step moments (m0, m1) of the kernel for product integration.

    m0[j] = int_{t_j}^{t_{j+1}} K(s) ds
    m1[j] = int_{t_j}^{t_{j+1}} K(s) (s - t_j)/dt ds

    With these, (K * g)(t_k) = sum_{j<k} m0[j] g(t_{k-j}) +
    m1[j] (g(t_{k-j-1}) - g(t_{k-j})) reproduces the integral of K against
    the piecewise-linear interpolant of g exactly.
    """
    t = grid.nodes
    lo, hi = t[:-1], t[1:]
    dt = grid.dt
    if isinstance(kernel, ConstantOne):
        m0 = np.full(grid.n, dt)
        m1 = np.full(grid.n, dt / 2.0)
        return m0, m1
    a, b, rho = kernel.alpha, kernel.b, kernel.rho
    if rho * grid.t_max < 1e-14:  # tilt below rounding; avoids rho**-a overflow
        i0 = (hi**a - lo**a) / _gamma(a + 1.0)
        i1 = (hi ** (a + 1.0) - lo ** (a + 1.0)) / ((a + 1.0) * _gamma(a))
        m0 = b * i0
        m1 = b * (i1 - lo * i0) / dt
    else:
        d0 = _gammainc_diff(a, rho * lo, rho * hi)
        d1 = _gammainc_diff(a + 1.0, rho * lo, rho * hi)
        i0 = rho ** (-a) * d0
        i1 = a * rho ** (-a - 1.0) * d1
        m0 = b * i0
        m1 = b * (i1 - lo * i0) / dt
    return m0, m1


def power_step_moments(r: float, grid: Grid):
    """Moments of t**(r-1)/Gamma(r) (the order-r fractional-integral weight)."""
    if not (0.0 < r <= 1.5):
        raise ValueError("power weight needs r in (0, 3/2]")
    t = grid.nodes
    lo, hi = t[:-1], t[1:]
    i0 = (hi**r - lo**r) / _gamma(r + 1.0)
    i1 = (hi ** (r + 1.0) - lo ** (r + 1.0)) / ((r + 1.0) * _gamma(r))
    m0 = i0
    m1 = (i1 - lo * i0) / grid.dt
    return m0, m1


def apply_step_moments(m0: np.ndarray, m1: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Assemble (K * g) at the nodes from per-step moments of K.

    Treats complex g transparently.  g[0] multiplies only the m1 weight of
    the step that touches it, so kernels singular at 0 never see g's own
    endpoint singularity amplified.
    """
    n = m0.size
    if g.shape[-1] != n + 1:
        raise ValueError("sample count does not match the moment grid")
    a = m0 - m1
    c1 = np.convolve(a, g[1:])
    c2 = np.convolve(m1, g[:-1])
    out = np.zeros(n + 1, dtype=np.result_type(m0, g))
    out[1:] = c1[:n] + c2[:n]
    return out


# ------------------------------ convolution ------------------------------


def _conv_two_kernels(f: Kernel, g: Kernel, grid: Grid) -> np.ndarray:
    t = grid.nodes
    out = np.zeros_like(t)
    if isinstance(f, ConstantOne) and isinstance(g, ConstantOne):
        return t.copy()
    if isinstance(f, ConstantOne) or isinstance(g, ConstantOne):
        k = g if isinstance(f, ConstantOne) else f
        out[1:] = k.antiderivative(t[1:])
        return out
    if f.rho == g.rho:
        # semigroup: the product is again a gamma kernel
        a_sum = f.alpha + g.alpha
        coef = f.b * g.b / _gamma(a_sum)
        out[1:] = coef * np.exp(-f.rho * t[1:]) * t[1:] ** (a_sum - 1.0)
        return out
    # distinct tilt rates: Gauss-Jacobi in s with both endpoint powers exact
    x, w = double_jacobi_rule(24, f.alpha, g.alpha)
    tk = t[1:, None]
    s = tk * x[None, :]
    smooth = np.exp(-f.rho * s - g.rho * (tk - s))
    coef = f.b * g.b / (_gamma(f.alpha) * _gamma(g.alpha))
    out[1:] = coef * tk[:, 0] ** (f.alpha + g.alpha - 1.0) * (smooth * w).sum(axis=1)
    return out


def convolve(f, g, grid: Grid) -> np.ndarray:
    """Causal convolution (f * g)(t_k) = int_0^{t_k} f(s) g(t_k - s) ds.

    Parameters
    ----------
    f, g : Kernel or ndarray of node samples (length grid.n + 1)
    grid : Grid

    Returns
    -------
    ndarray of node values; entry 0 is 0.

    Notes
    -----
    kernel x samples uses product integration with exact kernel moments,
    samples x samples uses the trapezoid rule (both factors must then be
    finite at 0), kernel x kernel is exact or near-exact.
    """
    f_is_k = isinstance(f, (GammaKernel, ConstantOne))
    g_is_k = isinstance(g, (GammaKernel, ConstantOne))
    if f_is_k and g_is_k:
        return _conv_two_kernels(f, g, grid)
    if g_is_k and not f_is_k:
        f, g = g, f
        f_is_k, g_is_k = True, False
    if f_is_k:
        g_arr = np.asarray(g)
        if g_arr.shape[-1] != grid.n + 1:
            raise ValueError("sample count does not match the grid")
        m0, m1 = kernel_step_moments(f, grid)
        return apply_step_moments(m0, m1, g_arr)
    f_arr = np.asarray(f)
    g_arr = np.asarray(g)
    if f_arr.shape[-1] != grid.n + 1 or g_arr.shape[-1] != grid.n + 1:
        raise ValueError("sample count does not match the grid")
    if not (np.all(np.isfinite(f_arr)) and np.all(np.isfinite(g_arr))):
        raise ValueError("sampled convolution factors must be finite")
    n = grid.n
    full = np.convolve(f_arr, g_arr)[: n + 1]
    out = grid.dt * (full - 0.5 * (f_arr[0] * g_arr[: n + 1] + f_arr[: n + 1] * g_arr[0]))
    out[0] = 0.0
    return out


# ------------------------------ measures ------------------------------


@dataclass(frozen=True)
class SignedMeasure:
    """Finite signed measure on [0, infinity): atoms plus an optional density.

    atoms: (locations, weights) arrays; density: vectorized callable or None.
    Atom locations must be nonnegative.
    """

    locations: np.ndarray = field(default_factory=lambda: np.zeros(0))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    density: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        loc = np.atleast_1d(np.asarray(self.locations, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights))
        if loc.shape != w.shape:
            raise ValueError("locations and weights must have equal length")
        if loc.size and np.any(loc < 0.0):
            raise ValueError("atom locations must be nonnegative")
        order = np.argsort(loc, kind="stable")
        object.__setattr__(self, "locations", loc[order])
        object.__setattr__(self, "weights", w[order])

    @classmethod
    def point_mass(cls, weight, location: float = 0.0) -> "SignedMeasure":
        return cls(locations=np.array([location]), weights=np.array([weight]))

    def total_mass(self, t_max: float = np.inf, grid: Optional[Grid] = None):
        """mu([0, t_max]): atom weights plus the integrated density part."""
        mask = self.locations <= t_max
        total = self.weights[mask].sum() if self.weights.size else 0.0
        if self.density is not None:
            if grid is None:
                raise ValueError("a grid is needed to integrate the density part")
            dens = np.asarray(self.density(grid.nodes))
            total = total + np.trapezoid(dens, grid.nodes)
        return total

    def total_variation(self, t_max: float = np.inf, grid: Optional[Grid] = None):
        mask = self.locations <= t_max
        total = np.abs(self.weights[mask]).sum() if self.weights.size else 0.0
        if self.density is not None:
            if grid is None:
                raise ValueError("a grid is needed to integrate the density part")
            dens = np.asarray(self.density(grid.nodes))
            total = total + np.trapezoid(np.abs(dens), grid.nodes)
        return float(total)

    def is_nonpositive(self, grid: Optional[Grid] = None) -> bool:
        """True when all atoms (and the density, probed on the grid) are <= 0."""
        if self.weights.size and np.any(np.real(self.weights) > 0.0):
            return False
        if np.iscomplexobj(self.weights) and np.any(self.weights.imag != 0.0):
            return False
        if self.density is not None:
            probe = grid.nodes if grid is not None else np.linspace(0.0, 1.0, 257)
            if np.any(np.asarray(self.density(probe)) > 0.0):
                return False
        return True


def convolve_measure(kernel: Kernel, measure: SignedMeasure, grid: Grid) -> np.ndarray:
    """(K * mu)(t_k) = int over s in [0, t_k) of K(t_k - s) mu(ds).

    The interval is open on the right: an atom sitting exactly at t_k does
    not contribute at t_k (it starts to act strictly afterwards).  Atoms
    beyond t_max are ignored with a warning.
    """
    t = grid.nodes
    out = np.zeros(t.size, dtype=np.result_type(float, measure.weights))
    loc, wgt = measure.locations, measure.weights
    if loc.size:
        beyond = loc > grid.t_max
        if np.any(beyond):
            warnings.warn(
                f"{int(beyond.sum())} atom(s) beyond t_max={grid.t_max} ignored",
                stacklevel=2,
            )
        for li, wi in zip(loc[~beyond], wgt[~beyond]):
            active = t > li
            out[active] += wi * kernel(t[active] - li)
    if measure.density is not None:
        dens = np.asarray(measure.density(t))
        out = out + convolve(kernel, dens, grid)
    return out


# --------------------- shared singular-product moments ---------------------


def cross_power_moment(alpha: float, beta: float, t: np.ndarray, delta: float):
    """Exact int_0^delta (t - u)**(alpha-1) u**(beta-1) du for each t >= delta.

    Regularized incomplete beta in x = delta/t; used for the step that
    carries both a kernel factor and a power-singular companion.
    """
    t = np.asarray(t, dtype=float)
    x = np.clip(delta / t, 0.0, 1.0)
    bfull = _gamma(alpha) * _gamma(beta) / _gamma(alpha + beta)
    return t ** (alpha + beta - 1.0) * bfull * betainc(beta, alpha, x)

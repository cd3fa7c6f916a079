"""Variance stabilizer and the mean-preserving volatility shape.

A square-root Volterra process whose diffusion is modulated by a
deterministic factor can hold its marginal mean and variance exactly flat
in time.  The modulation ("stabilizer") ss(t) solving

    c * lam**2 * (1 - (phi - f * phi)(t)**2) = (f**2 * ss**2)(t)

exists in closed fractional-power-series form for the untilted power
kernel: ss(t)**2 = 2*c*lam * t**(1-alpha) * sum_k (-1)**k c_k (lam t**alpha)**k,
with c_0 = Gamma(alpha)**2 / (Gamma(2 alpha - 1) Gamma(2 - alpha)) and a
one-step recursion for the rest built from Cauchy products of reciprocal
gamma sequences.

The recursion's bracket cancels catastrophically (14 digits gone by k = 80
at alpha = 0.6, nearly 40 at alpha = 1.45), so coefficients are constructed
in arbitrary precision sized to the truncation order and only then rounded
to extended doubles.  Series summation stays in extended precision: the
alternating sum carries a dynamic range of exp-of-argument size, around
1e9 at the largest arguments the series is meant for.

`verify_equation` re-checks the defining equation by quadrature that
shares nothing with the series construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
from mpmath import mp

from ._quad import graded_rule_01
from .core import Grid, Kernel, apply_step_moments, convolve
from .resolvent import ResolventPair, _f_raw, _r_batch, f_lambda_norms, f_step_moments

__all__ = [
    "StabilizerSeries",
    "ShapeFunction",
    "EquationReport",
    "stabilizer_coeffs",
    "stabilizer_eval",
    "phi_from_theta",
    "verify_E_lambda_c",
]

_LD = np.longdouble
_EPS_LD = float(np.finfo(_LD).eps)


@lru_cache(maxsize=64)
def _coeffs_cached(alpha: float, order: int):
    # beta(a_l, b_m) = G1[l] * G2[m] / G3[k]: the argument sum only sees k,
    # so three gamma ladders cover every beta in the recursion
    dps = 30 + order  # cancellation digits grow roughly linearly in k
    with mp.workdps(dps):
        am = mp.mpf(repr(alpha))
        ks = range(order + 1)
        a = [1 / mp.gamma(am * k + 1) for k in ks]
        b = [1 / mp.gamma(am * (k + 1)) for k in ks]
        ab = [mp.fsum(a[l] * b[k - l] for l in range(k + 1)) for k in ks]
        bb = [mp.fsum(b[l] * b[k - l] for l in range(k + 1)) for k in ks]
        g1 = [mp.gamma(am * (l + 2) - 1) for l in ks]
        g2 = [mp.gamma(am * m + 2 - am) for m in ks]
        g3 = [mp.gamma(am * (k + 1) + 1) for k in ks]
        front = mp.gamma(am) ** 2 / mp.gamma(2 * am - 1)
        c = [front / mp.gamma(2 - am)]
        for k in range(1, order + 1):
            s = mp.fsum(g1[l] * g2[k - l] * bb[l] * c[k - l] for l in range(1, k + 1))
            bracket = ab[k] - am * (k + 1) * s / g3[k]
            c.append(front / b[k] / g2[k] * bracket)
        # keep full-precision decimals: once rounded, coefficient error alone
        # puts a peak-sized floor under any higher-precision resummation
        strs = tuple(mp.nstr(v, dps, strip_zeros=False) for v in c)
        out = np.array([_LD(mp.nstr(v, 25)) for v in c])
    return out, strs


def stabilizer_coeffs(alpha: float, order: int = 80) -> np.ndarray:
    """Coefficients c_0..c_order of the stabilizer series, extended precision.

    All positive for alpha < 1; for alpha > 1 every coefficient past c_0
    flips sign.  At alpha = 1 the recursion collapses to c_0 = 1 with the
    rest identically zero (up to construction noise far below 1e-12).
    Coefficients decay super-geometrically; any that underflow extended
    doubles truncate the returned array (its length reports the effective
    order).
    """
    if not (0.5 < alpha < 1.5):
        raise ValueError("alpha must lie in (1/2, 3/2)")
    if not (isinstance(order, (int, np.integer)) and 0 <= order <= 400):
        raise ValueError("order must be an integer in [0, 400]")
    c, _ = _coeffs_cached(float(alpha), int(order))
    tiny = np.finfo(_LD).tiny
    dead = np.abs(c) < tiny
    if dead.any():
        c = c[: int(np.argmax(dead))]
    return c.copy()


@dataclass(frozen=True)
class StabilizerSeries:
    """ss(t)**2 = 2*c*lam * t**(1-alpha) * sum (-1)**k c_k (lam t**alpha)**k.

    c = 0 is the degenerate silent modulation ss == 0.  Evaluation range is
    whatever the truncation order supports; `stabilizer_eval` monitors the
    last retained term and refuses arguments it cannot certify.
    """

    alpha: float
    lam: float
    c: float
    order: int = 80
    coeffs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0.5 < self.alpha < 1.5):
            raise ValueError("alpha must lie in (1/2, 3/2)")
        if not (math.isfinite(self.lam) and self.lam > 0.0):
            raise ValueError("lam must be positive and finite")
        if not (math.isfinite(self.c) and self.c >= 0.0):
            raise ValueError("c must be nonnegative")
        object.__setattr__(self, "coeffs", stabilizer_coeffs(self.alpha, self.order))

    def sigma_sq(self, t):
        return stabilizer_eval(self, t)

    def sigma(self, t):
        return np.sqrt(stabilizer_eval(self, t))

    def limit_sq(self) -> float:
        """Large-time value c * lam**2 / ||f||_L2**2 (untilted kernel)."""
        from .core import GammaKernel

        pair = ResolventPair(GammaKernel(1.0, self.alpha, 0.0), self.lam)
        return self.c * self.lam**2 / f_lambda_norms(pair, 2) ** 2


def stabilizer_eval(series: StabilizerSeries, t):
    """ss(t)**2 for t > 0; scalars map to scalars.

    Raises OverflowError when the truncation-order tail or the alternating
    sum's rounding floor exceeds 1e-8 of the result at the largest argument,
    which is the cue to rebuild with a larger order.
    """
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)) or np.any(t_arr <= 0.0):
        raise ValueError("stabilizer_eval needs finite t > 0")
    if series.c == 0.0:
        out = np.zeros(t_arr.shape)
        return 0.0 if t_arr.ndim == 0 else out
    if series.alpha == 1.0:
        # exact constant; the series path would only add noise at t = 0
        out = np.full(t_arr.shape, 2.0 * series.lam * series.c)
        return float(2.0 * series.lam * series.c) if t_arr.ndim == 0 else out

    flat = np.atleast_1d(t_arr).ravel()
    cs = series.coeffs
    y = _LD(series.lam) * flat.astype(_LD) ** _LD(series.alpha)
    log_y = np.log(np.maximum(y.astype(float), 1e-300))
    with np.errstate(divide="ignore"):
        log_c = np.log(np.abs(cs.astype(float)))
    # per-point peak term of the alternating sum ~ exp(alpha * lam^(1/a) * t):
    # it floors the extended-double rounding error
    log_peak = np.full(flat.size, float(log_c.max()))
    big = log_y > 0.0
    if big.any():
        ly, lp = log_y[big], np.full(int(big.sum()), -np.inf)
        for k in range(cs.size):
            np.maximum(lp, log_c[k] + k * ly, out=lp)
        log_peak[big] = lp

    with np.errstate(over="ignore", invalid="ignore"):
        acc = np.full(flat.shape, _LD(0.0))
        for k in range(cs.size - 1, -1, -1):
            acc = cs[k] - y * acc
        s_abs = np.abs(acc.astype(float))
        bad = ~np.isfinite(s_abs) | (np.exp(log_peak) * _EPS_LD > 0.5e-8 * s_abs)
    if bad.any():
        peak_top = float(log_peak[bad].max())
        if peak_top > 700.0:  # no order within the cap can clear its tail here
            raise OverflowError(
                f"series order {cs.size - 1} cannot certify t = {flat.max():.3g}; increase order"
            )
        # rounding floor ate the budget: redo those points with the
        # full-precision coefficients at peak-sized working precision
        _, strs = _coeffs_cached(series.alpha, series.order)
        with mp.workdps(max(int(peak_top / math.log(10.0)) + 25, 30)):
            cs_mp = [mp.mpf(s) for s in strs[: cs.size]]
            am, lm = mp.mpf(repr(series.alpha)), mp.mpf(repr(series.lam))
            for i in np.flatnonzero(bad):
                y_i = lm * mp.mpf(float(flat[i])) ** am
                a_i = mp.mpf(0)
                for k in range(cs.size - 1, -1, -1):
                    a_i = cs_mp[k] - y_i * a_i
                acc[i] = _LD(mp.nstr(a_i, 25))

    # last retained term bounds the truncation tail (coefficients decay)
    with np.errstate(over="ignore"):
        log_tail = log_c[-1] + (cs.size - 1) * log_y + np.maximum(log_y, 0.0)
        tail_bad = np.exp(log_tail) > 0.5e-8 * np.abs(acc.astype(float))
    if tail_bad.any():
        raise OverflowError(
            f"series order {cs.size - 1} cannot certify t = {flat.max():.3g}; increase order"
        )
    head = _LD(2.0 * series.c * series.lam) * flat.astype(_LD) ** _LD(1.0 - series.alpha)
    vals = np.asarray(head * acc, dtype=float)
    if np.any(vals < 0.0):
        worst = float(vals.min())
        if worst < -1e-10 * max(float(np.abs(vals).max()), 1e-300):
            raise OverflowError("truncated series went negative; increase order")
        vals = np.maximum(vals, 0.0)
    return float(vals[0]) if t_arr.ndim == 0 else vals.reshape(t_arr.shape)


# ------------------------------ shape function ------------------------------


@dataclass(frozen=True)
class ShapeFunction:
    """Mean-preserving modulation phi sampled on a grid.

    phi(t) = 1 - lam * int_0^t K(t-s) (theta(s)/(lam x_inf) - 1) ds keeps
    E[X_t] = x_inf for all t when E[X_0] = x_inf; theta == lam * x_inf
    gives phi == 1.
    """

    grid: Grid
    values: np.ndarray
    lam: float
    x_inf: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n + 1,):
            raise ValueError("values must sample every grid node")
        object.__setattr__(self, "values", vals)

    @property
    def is_constant_one(self) -> bool:
        return bool(np.all(self.values == 1.0))

    @classmethod
    def constant_one(cls, grid: Grid, lam: float, x_inf: float = 1.0) -> "ShapeFunction":
        return cls(grid, np.ones(grid.n + 1), lam, x_inf)


def phi_from_theta(
    kernel: Kernel,
    theta: Union[float, np.ndarray, Callable[[np.ndarray], np.ndarray]],
    lam: float,
    x_inf: float,
    grid: Grid,
) -> ShapeFunction:
    """Build the shape function for a mean-reversion level path theta."""
    if x_inf == 0.0:
        raise ValueError("x_inf must be nonzero")
    if not (math.isfinite(lam) and lam > 0.0):
        raise ValueError("lam must be positive and finite")
    t = grid.nodes
    if callable(theta):
        theta_arr = np.asarray(theta(t), dtype=float)
    elif np.ndim(theta) == 0:
        theta_arr = np.full(t.size, float(theta))
    else:
        theta_arr = np.asarray(theta, dtype=float)
    if theta_arr.shape != t.shape:
        raise ValueError("theta samples must match the grid nodes")
    excess = theta_arr / (lam * x_inf) - 1.0
    values = 1.0 - lam * convolve(kernel, excess, grid)
    return ShapeFunction(grid=grid, values=values, lam=lam, x_inf=x_inf)


# ------------------------------ equation verification ------------------------------


@dataclass(frozen=True)
class EquationReport:
    max_rel: float
    rms_rel: float
    tol: float
    passed: bool
    phi_one_gap: Optional[float] = None  # generic-vs-resolvent left sides, phi == 1

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}: max {self.max_rel:.3e} rms {self.rms_rel:.3e} (tol {self.tol:.1e})"
        )


def _convolved_square(series: StabilizerSeries, pair: ResolventPair, t: np.ndarray):
    """(f**2 * ss**2)(t) by graded quadrature on both singular halves."""
    alpha, rho, lam_eff = pair.kernel.alpha, pair.kernel.rho, pair.lam_eff
    half = 0.5 * t

    def f_sq(x):
        v = _f_raw(alpha, rho, lam_eff, x.ravel()).reshape(x.shape)
        return v * v

    # s -> 0 half: ss**2 carries t**(1-alpha); f**2 smooth there
    x1, w1 = graded_rule_01(1.0 - alpha, n_gl=12, ratio=0.5, tol=1e-11)
    s = half[:, None] * x1[None, :]
    part1 = half * ((f_sq(t[:, None] - s) * stabilizer_eval(series, s)) @ w1)
    # u = t - s -> 0 half: f**2 carries u**(2 alpha - 2)
    x2, w2 = graded_rule_01(2.0 * alpha - 2.0, n_gl=12, ratio=0.5, tol=1e-11)
    u = half[:, None] * x2[None, :]
    part2 = half * ((f_sq(u) * stabilizer_eval(series, t[:, None] - u)) @ w2)
    return part1 + part2


def verify_E_lambda_c(
    series: StabilizerSeries,
    phi: ShapeFunction,
    pair: ResolventPair,
    c: float,
    grid: Grid,
    tol: float = 5e-3,
) -> EquationReport:
    """Residual report for c lam^2 (1 - (phi - f*phi)^2) = (f^2 * ss^2).

    Both sides are recomputed from scratch: the left by product integration
    of f against phi (or, when phi == 1, from the resolvent directly, with
    the product-integration path kept as a cross-check), the right by
    singularity-graded quadrature of the convolution square.  Relative
    residuals are measured pointwise against the larger side; the node at
    t = 0, where both sides vanish identically, is skipped.
    """
    if series.alpha != pair.kernel.alpha:
        raise ValueError("series and pair disagree on alpha")
    if series.lam != pair.lam:
        raise ValueError("series and pair disagree on lam")
    phi.grid.require_same(grid, "phi")

    lam = pair.lam
    t = grid.nodes[1:]
    m0, m1 = f_step_moments(pair, grid)
    conv = apply_step_moments(m0, m1, phi.values)
    lhs_generic = c * lam**2 * (1.0 - (phi.values - conv) ** 2)

    phi_one_gap = None
    if phi.is_constant_one:
        r = _r_batch(pair, t)
        lhs = c * lam**2 * (1.0 - r * r)
        phi_one_gap = float(np.max(np.abs(lhs - lhs_generic[1:])))
    else:
        lhs = lhs_generic[1:]

    rhs = _convolved_square(series, pair, t)
    denom = np.maximum(np.abs(lhs), np.abs(rhs))
    if c == 0.0:
        rel = np.abs(lhs - rhs)  # both sides identically zero
    else:
        rel = np.abs(lhs - rhs) / np.where(denom > 0.0, denom, 1.0)
    max_rel = float(rel.max())
    return EquationReport(
        max_rel=max_rel,
        rms_rel=float(np.sqrt(np.mean(rel**2))),
        tol=tol,
        passed=bool(max_rel <= tol),
        phi_one_gap=phi_one_gap,
    )

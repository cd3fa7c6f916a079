"""Quadrature rules for integrands with power-law endpoint behavior.

Everything here returns plain (nodes, weights) pairs so callers can batch
integrand evaluations across many integrals at once.  Rules on [0, 1] are
mapped by the caller; `scale_rule` does the affine part.

Key functions:
    gauss_legendre_01   -- cached Gauss-Legendre rule on [0, 1]
    jacobi_rule_01      -- Gauss rule on [0, 1] with weight x**(a-1)
    double_jacobi_rule  -- weight x**(a-1) * (1-x)**(b-1) on [0, 1]
    graded_rule_01      -- composite rule handling an x**power factor at 0
    exp_tail_rule       -- Gauss-Laguerre rule for int_T^inf e**(-rho t) g
    power_tail_rule     -- rule for int_T^inf t**(-q) g(t) dt, g -> const
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import roots_genlaguerre, roots_jacobi, roots_legendre

_CACHE: dict = {}


def gauss_legendre_01(n: int):
    """Nodes and weights for int_0^1 f(x) dx."""
    key = ("gl", n)
    if key not in _CACHE:
        x, w = roots_legendre(n)
        _CACHE[key] = ((x + 1.0) / 2.0, w / 2.0)
    return _CACHE[key]


def jacobi_rule_01(n: int, a: float):
    """Nodes and weights such that sum w_i f(x_i) ~ int_0^1 x**(a-1) f(x) dx.

    The weight x**(a-1) is built into the weights; f itself must be smooth.
    Requires a > 0.
    """
    key = ("jac", n, a)
    if key not in _CACHE:
        if a <= 0.0:
            raise ValueError("jacobi_rule_01 requires a > 0")
        # scipy weight on [-1, 1] is (1-u)**p (1+u)**q; take p=0, q=a-1.
        u, w = roots_jacobi(n, 0.0, a - 1.0)
        x = (u + 1.0) / 2.0
        _CACHE[key] = (x, w * 0.5**a)
    return _CACHE[key]


def double_jacobi_rule(n: int, a: float, b: float):
    """Rule for int_0^1 x**(a-1) (1-x)**(b-1) f(x) dx with smooth f."""
    key = ("djac", n, a, b)
    if key not in _CACHE:
        if a <= 0.0 or b <= 0.0:
            raise ValueError("double_jacobi_rule requires a, b > 0")
        u, w = roots_jacobi(n, b - 1.0, a - 1.0)
        x = (u + 1.0) / 2.0
        _CACHE[key] = (x, w * 0.5 ** (a + b - 1.0))
    return _CACHE[key]


def graded_rule_01(power: float, n_gl: int = 10, ratio: float = 1.0 / 3.0,
                   tol: float = 1e-13):
    """Composite rule on (0, 1] for integrands behaving like x**power near 0.

    Plain Gauss-Legendre panels shrink geometrically toward 0; the last stub
    [0, eps] is collapsed to a single node at the centroid of x**power with
    the moment-matched weight, so the rule is exact there for c * x**power
    and first-order accurate in the smooth cofactor.  power > -1.
    """
    key = ("graded", power, n_gl, ratio, tol)
    if key in _CACHE:
        return _CACHE[key]
    if power <= -1.0:
        raise ValueError("graded_rule_01 requires power > -1")
    p1 = power + 1.0
    # stub error ~ eps**(p1+1); keep it below tol.
    levels = max(4, math.ceil(math.log(tol) / ((p1 + 1.0) * math.log(ratio))))
    levels = min(levels, 60)
    xg, wg = gauss_legendre_01(n_gl)
    nodes = []
    weights = []
    hi = 1.0
    for _ in range(levels):
        lo = hi * ratio
        nodes.append(lo + (hi - lo) * xg)
        weights.append((hi - lo) * wg)
        hi = lo
    eps = hi
    # centroid of x**power on [0, eps] and its moment-matched weight
    x_c = eps * p1 / (p1 + 1.0)
    w_c = eps**p1 / p1 / x_c**power
    nodes.append(np.array([x_c]))
    weights.append(np.array([w_c]))
    out = (np.concatenate(nodes), np.concatenate(weights))
    _CACHE[key] = out
    return out


def scale_rule(rule, lo, hi):
    """Map a rule from [0, 1] to [lo, hi] (lo may be an array broadcast)."""
    x, w = rule
    span = hi - lo
    return lo + span * x, span * w


def exp_tail_rule(n: int, a: float = 0.0):
    """Generalized Gauss-Laguerre: sum w_i g(y_i) ~ int_0^inf y**a e**-y g dy."""
    key = ("lag", n, a)
    if key not in _CACHE:
        y, w = roots_genlaguerre(n, a) if a != 0.0 else roots_genlaguerre(n, 0.0)
        _CACHE[key] = (y, w)
    return _CACHE[key]


def power_tail_rule(q: float, n_gl: int = 12):
    """Rule (t_i, w_i) with sum w_i g(t_i) ~ int_1^inf t**(-q) g(t) dt.

    Caller rescales: int_T^inf t**(-q) g = T**(1-q) * sum w_i g(T * t_i).
    Needs q > 1.  Substitution t = 1/u maps the tail to int_0^1 u**(q-2) g(1/u).
    """
    key = ("ptail", q, n_gl)
    if key in _CACHE:
        return _CACHE[key]
    if q <= 1.0:
        raise ValueError("power tail requires q > 1")
    if q >= 2.0:
        u, w = jacobi_rule_01(n_gl, q - 1.0)
        out = (1.0 / u, w)
    else:
        u, w = graded_rule_01(q - 2.0, n_gl=n_gl)
        out = (1.0 / u, w * u ** (q - 2.0))
    _CACHE[key] = out
    return out

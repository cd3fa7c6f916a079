"""Sanity sweep of resolvent.py: residual suites, closed forms, proxy accuracy."""

import math
import sys
import time

import mpmath as mp
import numpy as np

sys.path.insert(0, "src")
sys.path.insert(0, "dev")

from mlref import ml_neg  # noqa: E402
from volterra.core import GammaKernel, Grid  # noqa: E402
from volterra.resolvent import (  # noqa: E402
    ResolventPair,
    f_equation_residual,
    f_lambda_eval,
    f_lambda_norms,
    f_step_moments,
    laplace_identity_residual,
    mittag_leffler,
    resolvent_equation_residual,
    resolvent_eval,
    tail_limit_a,
)

# ---- closed-form / example spot checks ----
print("E_1(-0.5) =", mittag_leffler(1.0, -0.5), " vs", math.exp(-0.5))
print("E_0.9(-3) =", mittag_leffler(0.9, -3.0), " vs oracle", ml_neg(0.9, 3.0))
print("E_a(0)    =", mittag_leffler(0.7, 0.0))
print("E_1(+2)   =", mittag_leffler(1.0, 2.0), " vs", math.exp(2.0))
print("E_0.8(+5) =", mittag_leffler(0.8, 5.0), " vs mp",
      float(mp.nsum(lambda k: mp.mpf(5) ** k / mp.gamma(mp.mpf("0.8") * k + 1), [0, mp.inf])))
try:
    mittag_leffler(0.5, 1e7)
except OverflowError as e:
    print("overflow OK:", e)

# alpha = 1 closed forms
pair1 = ResolventPair(GammaKernel(b=1.0, alpha=1.0, rho=0.0), lam=0.2)
print("\nR(5; a=1, lam=.2) =", resolvent_eval(pair1, 5.0), " vs", math.exp(-1.0))
print("f(3; a=1, lam=.2) =", f_lambda_eval(pair1, 3.0), " vs", 0.2 * math.exp(-0.6))
print("||f||_2^2 =", f_lambda_norms(pair1, 2) ** 2, " vs lam/2 =", 0.1)
print("||f||_1   =", f_lambda_norms(pair1, 1), " vs 1")

# tail limits
p_a = ResolventPair(GammaKernel(1.0, 1.0, 1.0), lam=1.0)
p_b = ResolventPair(GammaKernel(1.0, 0.7, 2.0), lam=5.0)
print("\na(alpha=1, rho=1, lam=1)  =", tail_limit_a(p_a), " vs 0.5")
print("a(alpha=0.7, rho=2, lam=5) =", tail_limit_a(p_b), " vs", 1.0 / (1.0 + 5.0 * 2.0**-0.7))
print("||f||_1 (a=.9 rho=1 lam=1) =",
      f_lambda_norms(ResolventPair(GammaKernel(1.0, 0.9, 1.0), 1.0), 1), " vs",
      1.0 - 1.0 / (1.0 + 1.0))
print("R(50; a=.9 rho=1 lam=1)    =",
      resolvent_eval(ResolventPair(GammaKernel(1.0, 0.9, 1.0), 1.0), 50.0), " vs ~0.5")

# ---- rho > 0 proxy vs mpmath quadrature of f ----
print("\nproxy R vs mpmath quad of f:")
for alpha, rho, lam in [(0.6, 1.0, 5.0), (0.9, 1.0, 1.0), (1.3, 1.0, 0.2), (0.7, 2.0, 5.0)]:
    pair = ResolventPair(GammaKernel(1.0, alpha, rho), lam)
    for t in (0.01, 0.3, 2.0, 20.0):
        def f_mp(s):
            s = float(s)
            if s == 0.0:
                return mp.mpf(0)
            return mp.mpf(lam) * s ** (alpha - 1.0) * mp.mpf(
                ml_neg(alpha, lam * s**alpha, beta=alpha)
            ) * mp.e ** (-rho * s)
        ref = 1.0 - float(mp.quad(f_mp, [0, min(t, 0.05), min(t, 1.0), t]))
        got = resolvent_eval(pair, t)
        print(f"  a={alpha} rho={rho} lam={lam} t={t}: got={got:.12f} ref={ref:.12f} "
              f"err={abs(got - ref):.2e}")

# ---- residual suites over the acceptance box ----
print("\nresidual suites (grid [0,20] n=2000):")
grid = Grid(t_max=20.0, n=2000)
t_interior = np.geomspace(0.01, 20.0, 60)
t0 = time.time()
worst = []
for alpha in (0.6, 0.9, 1.0, 1.3):
    for rho in (0.0, 1.0):
        for lam in (0.2, 5.0):
            pair = ResolventPair(GammaKernel(1.0, alpha, rho), lam)
            res_r = np.max(np.abs(resolvent_equation_residual(pair, grid)))
            res_f = np.max(np.abs(f_equation_residual(pair, t_interior)))
            res_l = np.max(laplace_identity_residual(pair, [0.5, 1.0, 2.0]))
            worst.append((res_r, res_f, res_l, alpha, rho, lam))
            print(f"  a={alpha} rho={rho} lam={lam}: R-eq {res_r:.2e}  f-eq {res_f:.2e}  "
                  f"Laplace {res_l:.2e}")
elapsed = time.time() - t0
print(f"suite time: {elapsed:.2f}s")
print("max R-eq:", max(w[0] for w in worst), " max f-eq:", max(w[1] for w in worst),
      " max Laplace:", max(w[2] for w in worst))

# ---- b != 1 reduction through the residual ----
pair_b = ResolventPair(GammaKernel(b=2.5, alpha=0.8, rho=0.5), lam=0.4)
print("\nb=2.5 residuals: R-eq",
      np.max(np.abs(resolvent_equation_residual(pair_b, Grid(10.0, 400)))),
      " f-eq", np.max(np.abs(f_equation_residual(pair_b, t_interior))))

# ---- FD derivative consistency: f = -R' ----
print("\nFD check f = -R' (central, two h values -> observed order):")
for alpha, rho, lam in [(0.6, 0.0, 5.0), (0.9, 1.0, 1.0), (1.3, 1.0, 0.2)]:
    pair = ResolventPair(GammaKernel(1.0, alpha, rho), lam)
    for t in (0.5, 3.0):
        errs = []
        for h in (1e-3, 5e-4):
            fd = (resolvent_eval(pair, t - h) - resolvent_eval(pair, t + h)) / (2 * h)
            errs.append(abs(fd - f_lambda_eval(pair, t)))
        order = math.log(errs[0] / errs[1]) / math.log(2.0) if errs[1] > 0 else float("inf")
        print(f"  a={alpha} rho={rho} t={t}: err(h=1e-3)={errs[0]:.2e} order~{order:.2f}")

# ---- step moments against a crude oracle ----
print("\nstep moments (alpha=0.8, rho=1, lam=2) vs mpmath:")
pair = ResolventPair(GammaKernel(1.0, 0.8, 1.0), 2.0)
g = Grid(2.0, 8)
m0, m1 = f_step_moments(pair, g)
for j in (0, 1, 5):
    lo, hi = g.nodes[j], g.nodes[j + 1]
    def f_mp(s):
        s = float(s)
        return mp.mpf(2.0) * s ** (0.8 - 1.0) * mp.mpf(ml_neg(0.8, 2.0 * s**0.8, beta=0.8)) * mp.e ** (-s)
    ref0 = float(mp.quad(f_mp, [lo, hi] if lo > 0 else [0, hi / 7, hi]))
    ref1 = float(mp.quad(lambda s: f_mp(s) * (float(s) - lo) / g.dt,
                         [lo, hi] if lo > 0 else [0, hi / 7, hi]))
    print(f"  j={j}: m0 err {abs(m0[j] - ref0):.2e}   m1 err {abs(m1[j] - ref1):.2e}")

# ---- norms cross-check vs mpmath ----
# the head piece must be referenced in y = t**alpha (analytic cofactor);
# tanh-sinh over the raw double-precision integrand silently loses ~1e-4
# near the t**((alpha-1)p) endpoint
def norm_ref(alpha, rho, lam, p):
    with mp.workdps(40):
        am, lm = mp.mpf(repr(alpha)), mp.mpf(repr(lam))

        def e_aa(z):
            s, pw, k = mp.mpf(0), mp.mpf(1), 0
            while True:
                t = pw / mp.gamma(am * k + am)
                s += t
                if k > 8 and abs(t) < mp.mpf(10) ** -38:
                    return s
                pw *= z
                k += 1

        t1 = min((0.5 / lam) ** (1.0 / alpha), 1.0)
        if rho > 0:
            t1 = min(t1, 0.5 / rho)
        ex = ((am - 1) * p + 1) / am - 1
        y1 = mp.mpf(repr(t1)) ** am
        head = lm**p / am * mp.quad(
            lambda y: y**ex * abs(e_aa(-lm * y)) ** p * mp.e ** (-p * rho * y ** (1 / am)),
            [0, y1 / 2, y1],
        )

        def fp(s):
            s = float(s)
            v = lam * s ** (alpha - 1.0) * ml_neg(alpha, lam * s**alpha, beta=alpha) * math.exp(-rho * s)
            return abs(v) ** p

        rest = mp.quad(fp, [t1, 1.0, 10.0, 100.0, 3000.0])
        return float((head + rest) ** (1.0 / mp.mpf(p)))

print("\nnorms vs mpmath (gold head):")
for alpha, rho, lam, p in [(0.7, 0.0, 1.0, 2), (0.7, 1.0, 1.0, 2), (0.9, 1.0, 1.0, 1),
                           (1.2, 0.0, 0.5, 2), (0.6, 0.0, 5.0, 2)]:
    pair = ResolventPair(GammaKernel(1.0, alpha, rho), lam)
    got = f_lambda_norms(pair, p)
    ref = norm_ref(alpha, rho, lam, p)
    print(f"  a={alpha} rho={rho} lam={lam} p={p}: got={got:.12f} ref={ref:.12f} "
          f"rel={abs(got - ref) / ref:.2e}")
print("finite horizon: ||f||_1[0,2] =", f_lambda_norms(pair1, 1, 2.0),
      " vs", 1.0 - math.exp(-0.4))

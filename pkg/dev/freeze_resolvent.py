"""Print frozen reference values for tests/test_resolvent.py.

Every number here comes from mpmath, not from the library under test:
ML values from the dps-40 series/asymptotic oracle, R values for rho > 0
from tanh-sinh integration of f (integrand assembled in mpf), norms via
the y = t**alpha substitution that keeps the head cofactor analytic.
"""

import math

from mpmath import mp

from mlref import ml_neg


def e_aa_mp(alpha, z, beta):
    # alternating sum cancels ~log10(peak term) digits; size precision to it
    x = abs(float(z))
    peak = 0.0
    for k in range(0, int(4.0 * max(x, 1.0) ** (1.0 / float(alpha))) + 60):
        if x > 0:
            peak = max(peak, k * math.log(x) - math.lgamma(float(alpha) * k + float(beta)))
    with mp.workdps(mp.dps + int(peak / math.log(10)) + 10):
        s, pw, k = mp.mpf(0), mp.mpf(1), 0
        while True:
            t = pw / mp.gamma(alpha * k + beta)
            s += t
            if k > 8 and abs(t) < mp.mpf(10) ** (-mp.dps + 2):
                return +s
            pw *= z
            k += 1


def r_ref(alpha, rho, lam, t):
    # R(t) = 1 - lam * int_0^t u^(a-1) E_aa(-lam u^a) e^(-rho u) du,
    # computed in y = u^alpha so the integrand is analytic at 0
    with mp.workdps(40):
        am, lm, rm = mp.mpf(repr(alpha)), mp.mpf(repr(lam)), mp.mpf(repr(rho))
        tm = mp.mpf(repr(t))
        y_end = tm**am

        def g(y):
            return e_aa_mp(am, -lm * y, am) * mp.e ** (-rm * y ** (1 / am))

        pts = [y_end * mp.mpf(2) ** -j for j in range(24, -1, -1)]
        return float(1 - lm / am * mp.quad(g, [0] + pts))


def norm_ref(alpha, rho, lam, p, horizon=math.inf):
    with mp.workdps(40):
        am, lm = mp.mpf(repr(alpha)), mp.mpf(repr(lam))
        t1 = min((0.5 / lam) ** (1.0 / alpha), 1.0)
        if rho > 0:
            t1 = min(t1, 0.5 / rho)
        t1 = min(t1, horizon)
        ex = ((am - 1) * p + 1) / am - 1
        y1 = mp.mpf(repr(t1)) ** am
        head = lm**p / am * mp.quad(
            lambda y: y**ex * abs(e_aa_mp(am, -lm * y, am)) ** p
            * mp.e ** (-p * rho * y ** (1 / am)),
            [0, y1 / 2, y1],
        )
        if horizon <= t1:
            return float(head ** (1.0 / mp.mpf(p)))

        def fp(s):
            s = float(s)
            v = (lam * s ** (alpha - 1.0) * ml_neg(alpha, lam * s**alpha, beta=alpha)
                 * math.exp(-rho * s))
            return abs(v) ** p

        pts = [x for x in (1.0, 10.0, 100.0, 3000.0) if t1 < x < horizon]
        rest = mp.quad(fp, [t1] + pts + ([horizon] if horizon < math.inf else []))
        return float((head + rest) ** (1.0 / mp.mpf(p)))


print("# mittag_leffler(alpha, -x), beta = 1")
for alpha, x in [(0.3, 0.8), (0.6, 0.5), (0.6, 12.0), (0.75, 3.0), (0.9, 3.0),
                 (0.9, 45.0), (1.1, 2.0), (1.3, 7.0), (1.3, 60.0), (1.45, 20.0),
                 (1.8, 5.0), (2.0, 9.0)]:
    print(f"    ({alpha}, {x}, {ml_neg(alpha, x):.16e}),")

print("# f values: (alpha, rho, lam, t)")
for alpha, rho, lam, t in [(0.6, 0.0, 1.0, 0.25), (0.6, 1.0, 5.0, 2.0),
                           (0.9, 1.0, 1.0, 0.5), (1.3, 0.0, 0.2, 4.0),
                           (1.3, 1.0, 5.0, 1.5), (0.7, 2.0, 5.0, 0.1)]:
    v = lam * t ** (alpha - 1.0) * ml_neg(alpha, lam * t**alpha, beta=alpha) * math.exp(-rho * t)
    print(f"    ({alpha}, {rho}, {lam}, {t}, {v:.16e}),")

print("# R values, rho > 0: (alpha, rho, lam, t)")
for alpha, rho, lam, t in [(0.6, 1.0, 5.0, 0.3), (0.6, 1.0, 5.0, 8.0),
                           (0.9, 1.0, 1.0, 2.0), (1.3, 1.0, 0.2, 6.0),
                           (0.7, 2.0, 5.0, 2.0), (1.45, 0.5, 1.0, 3.0)]:
    print(f"    ({alpha}, {rho}, {lam}, {t}, {r_ref(alpha, rho, lam, t):.16e}),")

print("# norms: (alpha, rho, lam, p, horizon)")
for alpha, rho, lam, p, h in [(0.7, 0.0, 1.0, 2, math.inf), (0.7, 1.0, 1.0, 2, math.inf),
                              (0.9, 1.0, 1.0, 1, math.inf), (0.6, 0.0, 5.0, 2, math.inf),
                              (1.2, 0.0, 0.5, 2, math.inf), (0.9, 1.0, 1.0, 1, 2.0)]:
    print(f"    ({alpha}, {rho}, {lam}, {p}, {h}, {norm_ref(alpha, rho, lam, p, h):.16e}),")

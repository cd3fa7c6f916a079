"""Prototype the stabilizer coefficient recursion; measure bracket cancellation.

Checks, for a few alpha:
  - c_0 closed form
  - alpha = 1 collapse (c_0 = 1, c_k ~ 0)
  - bracket cancellation ratio (how many digits a double recursion would lose)
  - series convergence behavior at the acceptance-scale arguments
  - the functional equation c*lam^2*(1 - R^2) = (f^2 * sig^2) at a few t
    by mpmath quadrature (independent of the package machinery)
"""

import math

from mpmath import mp

mp.dps = 50


def coeffs(alpha, K):
    am = mp.mpf(repr(alpha))
    a = [1 / mp.gamma(am * k + 1) for k in range(K + 1)]
    b = [1 / mp.gamma(am * (k + 1)) for k in range(K + 1)]
    ab = [mp.fsum(a[l] * b[k - l] for l in range(k + 1)) for k in range(K + 1)]
    bb = [mp.fsum(b[l] * b[k - l] for l in range(k + 1)) for k in range(K + 1)]
    g_a2 = mp.gamma(am) ** 2
    g_2a1 = mp.gamma(2 * am - 1)
    c = [g_a2 / (g_2a1 * mp.gamma(2 - am))]
    worst_cancel = mp.mpf(0)
    for k in range(1, K + 1):
        s = mp.fsum(
            mp.beta(am * (l + 2) - 1, am * (k - l - 1) + 2) * bb[l] * c[k - l]
            for l in range(1, k + 1)
        )
        bracket = ab[k] - am * (k + 1) * s
        if bracket != 0:
            cancel = abs(ab[k]) / abs(bracket)
            worst_cancel = max(worst_cancel, cancel)
        pref = g_a2 * mp.gamma(am * (k + 1)) / (g_2a1 * mp.gamma(am * k + 2 - am))
        c.append(pref * bracket)
    return c, worst_cancel


def sig2_rescaled(cs, alpha, t):
    # sigma_alpha^2(t) = 2 t^(1-alpha) sum (-1)^k c_k t^(alpha k)
    am = mp.mpf(repr(alpha))
    y = mp.mpf(repr(t)) ** am
    s = mp.mpf(0)
    for k in reversed(range(len(cs))):
        s = cs[k] - y * s
    return 2 * mp.mpf(repr(t)) ** (1 - am) * s


for alpha in (0.6, 0.9, 1.0, 1.3, 1.45):
    cs, cancel = coeffs(alpha, 80)
    am = mp.mpf(repr(alpha))
    c0_closed = mp.gamma(am) ** 2 / (mp.gamma(2 * am - 1) * mp.gamma(2 - am))
    print(f"alpha={alpha}: c0={float(cs[0]):.12f} (closed {float(c0_closed):.12f}) "
          f"worst bracket cancel={float(cancel):.3e} digits lost={math.log10(float(cancel)):.1f}")
    print(f"  |c_k| at k=1,5,20,40,80: "
          + " ".join(f"{float(abs(cs[k])):.2e}" for k in (1, 5, 20, 40, 80)))
    if alpha == 1.0:
        print(f"  alpha=1 collapse: max |c_k|, k>=1 = {float(max(abs(x) for x in cs[1:])):.2e}")

# truncation behavior at the acceptance arguments x = lam^(1/alpha) * t
for alpha, lam, T in ((0.9, 0.2, 100.0), (1.3, 0.2, 100.0)):
    cs, _ = coeffs(alpha, 80)
    x = lam ** (1.0 / alpha) * T
    y = mp.mpf(repr(x)) ** mp.mpf(repr(alpha))
    terms = [abs(cs[k]) * y**k for k in range(len(cs))]
    peak = max(terms)
    print(f"alpha={alpha} lam={lam} T={T}: x={x:.2f} peak term={float(peak):.3e} "
          f"last term={float(terms[-1]):.3e} sum={float(sig2_rescaled(cs, alpha, x)):.8f}")

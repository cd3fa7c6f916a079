"""Validate ml_neg_axis on the extended beta=1 range alpha in (0, 2]."""

import math
import sys

import mpmath as mp
import numpy as np

sys.path.insert(0, "src")
sys.path.insert(0, "dev")

from mlref import ml_neg  # noqa: E402
from volterra._ml import ml_neg_axis  # noqa: E402

ALPHAS = [0.05, 0.15, 0.3, 0.4, 1.55, 1.7, 1.85, 1.95, 2.0]
XIS = [0.0, 0.3, 1.0, 2.5, 4.9, 5.1, 7.0, 10.0, 15.0, 22.0, 30.0, 37.9, 38.1, 45.0, 60.0, 120.0]
XS = [1e-3, 0.5, 1.0, 5.0, 1e2, 1e4, 1e6]

# oracle self-consistency across its own regime switch (series <=60, asym >60)
print("oracle cross-regime (series at forced high dps vs default path):")
for a in (0.15, 1.85):
    for xi in (58.0, 62.0):
        x = xi**a
        with mp.workdps(140):
            s = mp.mpf(0)
            am, bm, xm, p = mp.mpf(a), mp.mpf(1), mp.mpf(x), mp.mpf(1)
            k = 0
            while True:
                t = p / mp.gamma(am * k + bm)
                s += t
                if k > 10 and abs(t) < mp.mpf(10) ** -120:
                    break
                p *= -xm
                k += 1
            ref = float(s)
        got = ml_neg(a, x)
        print(f"  a={a} xi={xi}: rel={abs(got - ref) / abs(ref):.3e}")

print("\nalpha=2 closed form cos(sqrt(x)):")
for x in (0.5, 10.0, 400.0, 90000.0):
    got = ml_neg_axis(2.0, x)
    ref = math.cos(math.sqrt(x))
    print(f"  x={x}: got={got:+.15e} ref={ref:+.15e} rel={abs(got - ref) / abs(ref):.3e}")

rows = []
for a in ALPHAS:
    xs = sorted({xi**a for xi in XIS} | set(XS))
    for x in xs:
        ref = ml_neg(a, x)
        got = ml_neg_axis(a, x)
        denom = max(abs(ref), 1e-300)
        rows.append((abs(got - ref) / denom, a, x, x ** (1.0 / a), got, ref))

rows.sort(reverse=True)
print("\nworst 12 (beta=1 extended lattice):")
for rel, a, x, xi, got, ref in rows[:12]:
    print(f"  rel={rel:.3e}  a={a:<5} x={x:.6e} xi={xi:9.3f}  got={got:+.9e} ref={ref:+.9e}")
bad = sum(1 for r in rows if r[0] > 1e-10)
print(f"\npoints over 1e-10: {bad} / {len(rows)}")

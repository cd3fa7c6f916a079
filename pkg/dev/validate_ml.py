"""Validate the library Mittag-Leffler evaluator against the mpmath oracle.

Run: python3 dev/validate_ml.py
"""

import numpy as np

import sys, pathlib
sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))

from mlref import ml_neg
from volterra._ml import ml_neg_axis

alphas = [0.51, 0.55, 0.62, 0.7, 0.75, 0.8, 0.886, 0.9, 0.95, 0.99, 0.999,
          1.001, 1.01, 1.05, 1.1, 1.114, 1.2, 1.3, 1.4, 1.49, 1.5]
xis = [0.0, 0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 4.9, 5.1, 6.0, 7.0, 8.0, 10.0,
       12.0, 15.0, 18.0, 21.0, 24.0, 27.0, 30.0, 33.0, 35.0, 37.0, 37.9, 38.1, 36.0,
       40.0, 50.0, 80.0, 150.0, 400.0]

worst = {}
rows = []
for a in alphas:
    for b in (1.0, a):
        xs = np.array([xi ** a for xi in xis])
        got = ml_neg_axis(a, xs, beta=b)
        for xi, x, g in zip(xis, xs, got):
            ref = ml_neg(a, float(x), beta=b)
            rel = abs(g - ref) / max(abs(ref), 1e-300)
            regime = "ser" if xi <= 5 else ("asy" if xi >= 38 else "cut")
            rows.append((rel, a, b, xi, regime, g, ref))
            key = regime
            if rel > worst.get(key, (0,))[0]:
                worst[key] = (rel, a, b, xi, g, ref)

rows.sort(reverse=True)
print("worst 15 overall:")
for rel, a, b, xi, regime, g, ref in rows[:15]:
    print(f"  rel={rel:.3e}  a={a:<6} b={b:<6} xi={xi:<6} [{regime}] got={g: .10e} ref={ref: .10e}")
print("\nworst per regime:")
for k, (rel, a, b, xi, g, ref) in sorted(worst.items()):
    print(f"  {k}: rel={rel:.3e} at a={a}, b={b}, xi={xi}")
n_bad = sum(1 for r in rows if r[0] > 1e-10)
print(f"\npoints over 1e-10: {n_bad} / {len(rows)}")

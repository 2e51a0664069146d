"""Norms of step functions and the Paley-Wiener isometry.

Run: python demos/norms_and_isometry.py
"""

import numpy as np

from singcov import FBm, SimGrid, load_model, norm_report, paley_wiener, parse_fn, sample_paths

f = parse_fn("step:0,0.25,0.625;1,-2,0.5")

print("norms of f = 1 on [0,.25), -2 on [.25,.625), 0.5 after")
for spec in ("fbm:0.3", "fbm:0.5", "fbm:0.7", "bifbm:0.6,0.8333333333333334", "statinc:log"):
    r = norm_report(f, load_model(spec))
    tag = " (formal)" if r["formal"] else ""
    print(f"  {spec:32s} |f|_H^2 = {r['norm_H_sq']:.6f}   |f|_R^2 = {r['norm_R_sq']:.6f}{tag}")

# the sample variance of int f dX matches |f|_H^2
model = FBm(0.3)
grid = SimGrid(model.T, 256)
X = sample_paths(model, grid, 20000, seed=42).paths
Y = paley_wiener(X, f, grid)
se = np.std((Y - Y.mean()) ** 2, ddof=1) / np.sqrt(Y.size)
print(f"\nFBm(0.3): Var(int f dX) = {np.var(Y, ddof=1):.5f} +- {se:.5f}")
print(f"          |f|_H^2       = {norm_report(f, model)['norm_H_sq']:.5f}")

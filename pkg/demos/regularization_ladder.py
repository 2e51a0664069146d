"""Symmetric integrals, quadratic variation and the Skorohod correction along eps ladders.

Run: python demos/regularization_ladder.py
"""

from singcov.verification import exp_ito_symmetric, exp_qv, exp_skorohod_mean_zero


def show(rep):
    print(rep.label or rep.name, "PASS" if rep.passed else "FAIL")
    for e in rep.estimates:
        se = "" if e["se"] is None else f" +- {e['se']:.4g}"
        ref = "" if e["reference"] is None else f"   (ref {e['reference']:.4g})"
        print(f"  {e['label']:40s} {e['estimate']:.5g}{se}{ref}")
    for n in rep.notes:
        print("  note:", n)
    print()


# quadratic variation: finite for Brownian motion, exploding for H < 1/2, vanishing for H > 1/2
for spec in ("fbm:0.5", "fbm:0.3", "fbm:0.7"):
    show(exp_qv(spec, eps_ladder="T/16..T/256", m=1000))

# Stratonovich Ito formula for f = sin: the residual shrinks like eps^H
show(exp_ito_symmetric("fbm:0.3", m=1000))

# the Skorohod integral of f'(X) has mean zero
show(exp_skorohod_mean_zero("fbm:0.3", m=4000))

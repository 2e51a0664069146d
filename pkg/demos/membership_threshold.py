"""When do paths of a stationary-increment process belong to the reproducing-kernel space?

Run: python demos/membership_threshold.py
"""

from singcov import membership_condition
from singcov.verification import exp_membership_probe

for spec in ("statinc:power:0.4", "statinc:power:0.2", "statinc:log"):
    mc = membership_condition(spec)
    print(f"{spec}: truncated integrals -> {mc.verdict}")
    for c, v in list(zip(mc.cutoffs, mc.integrals))[-4:]:
        print(f"    cutoff {c:.3g}: {v:.5g}")
    probe = exp_membership_probe(spec, m=100)
    print("   path probe:", probe.notes[0])

"""How many trials until the pair estimates stabilize?

The inequality argument implicitly treats the hidden-variable sets behind the
three pair estimates as one common distribution. That is licensed by the
estimates settling: beyond some n_star every running mean stays within a
tolerance of its final value. This study scans the running means of a quantum
run and reports n_star per pair at several tolerances.
"""
import math

from lglab import (
    Direction,
    QuantumWorld,
    SlotBinding,
    SpacetimeEvent,
    run_experiment,
    stabilization,
)

binding = SlotBinding(
    1.0, 2.0, 3.0, Direction(0.0), Direction(math.pi / 6), Direction(math.pi / 3)
)
geometry = (SpacetimeEvent(0, 0, 0, 0), SpacetimeEvent(0, 1, 0, 0))

print("running 1,000,000 quantum trials, master seed 11 ...")
log = run_experiment(binding, QuantumWorld(), 1_000_000, 11, geometry)

for epsilon in (0.05, 0.01, 0.002):
    report = stabilization(log, epsilon=epsilon, checkpoint_stride=1000)
    n_stars = {p.pair.value: p.n_star for p in report.pairs}
    print(f"epsilon = {epsilon:<6}: n_star per pair = {n_stars}")

report = stabilization(log, epsilon=0.01, checkpoint_stride=1000)
print("\nrunning means of pair 12 at its first checkpoints (epsilon 0.01):")
pair12 = report.pairs[0]
for n, mean in pair12.checkpoints[:8]:
    marker = " <- n_star" if n == pair12.n_star else ""
    print(f"  n = {n:6d}: {mean:+.4f}{marker}")
print(f"final mean at n = {pair12.n}: {pair12.final_mean:+.4f}")

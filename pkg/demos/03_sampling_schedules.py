#!/usr/bin/env python3
"""Static versus exponentially decaying client participation.

The dynamic schedule starts with every client and shrinks the round's
participant count as M * exp(-phi * t), clamped to a floor of 5, so early
rounds see the most information while later rounds stay cheap.
"""

from fedcomp import RoundContext, SamplingPolicy, sample_clients, sample_size

M, rounds = 100, 60
static = SamplingPolicy.static(0.5)

print("participants per round (M = 100):")
print(f"{'t':>4} {'static 0.5':>11}" + "".join(f" {f'phi={phi}':>9}" for phi in (0.05, 0.1, 0.2)))
for t in (0, 1, 2, 5, 10, 20, 30, 40, 59):
    row = [sample_size(static, RoundContext(t=t, num_clients=M, seed=0))]
    for phi in (0.05, 0.1, 0.2):
        row.append(sample_size(SamplingPolicy.dynamic(phi), RoundContext(t=t, num_clients=M, seed=0)))
    print(f"{t:>4} {row[0]:>11}" + "".join(f" {r:>9}" for r in row[1:]))

print("\ncumulative participation over 60 rounds:")
for label, policy in [("static 0.5", static)] + [
    (f"dynamic phi={phi}", SamplingPolicy.dynamic(phi)) for phi in (0.05, 0.1, 0.2)
]:
    total = sum(
        sample_size(policy, RoundContext(t=t, num_clients=M, seed=0))
        for t in range(rounds)
    )
    print(f"  {label:18s} {total:5d} client-rounds")

# Membership is a uniform draw without replacement, deterministic in (seed, t).
policy = SamplingPolicy.dynamic(0.1)
ctx = RoundContext(t=25, num_clients=M, seed=7)
print(f"\nround 25 members (seed 7): {sample_clients(policy, ctx).tolist()}")
print(f"same seed and round again:  {sample_clients(policy, ctx).tolist()}")

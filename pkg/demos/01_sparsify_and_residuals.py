#!/usr/bin/env python3
"""Top-k% thresholding, masks, and residual carry-over between rounds.

Walks through the split of an update vector into the transmitted selection
and the locally retained residual, then shows the residual re-entering the
next round's accumulated update so withheld mass is never lost.
"""

import numpy as np

from fedcomp import accumulate, build_mask, compute_threshold, sparsify

# The running example: six coordinates, keep the top 50% by magnitude.
v = np.array([1.0, -5.0, 4.0, 0.5, 9.0, -4.0])
thr = compute_threshold(v, k=50)
print(f"update: {v}")
print(f"top-50% threshold (3rd-largest magnitude): {thr}")
print(f"mask (|v| >= thr): {build_mask(v, thr).astype(int)}")

selection, residual = sparsify(v, k=50)
print(f"transmitted: indices={selection.indices} values={selection.values}")
print(f"retained residual: {residual}")
print(f"selection + residual reconstructs the input exactly: "
      f"{np.array_equal(selection.densify() + residual, v)}")

# Ties at the threshold are all selected, so the count can exceed the budget.
tied = np.array([3.0, -3.0, 3.0, 1.0])
tied_selection, _ = sparsify(tied, k=25)  # nominal budget: 1 coordinate
print(f"\ntie handling: k=25% of {tied} selects {tied_selection.count} coordinates "
      f"(all magnitudes equal to thr={tied_selection.thr})")

# Residual accumulation across rounds: coordinates below the cut keep
# growing locally until they finally clear the threshold.
print("\nfive rounds of accumulation with k=20% (1 coordinate per round):")
rng = np.random.default_rng(0)
residual = np.zeros(5)
for t in range(5):
    delta = rng.normal(scale=0.1, size=5)
    accumulated = accumulate(residual, delta)
    selection, residual = sparsify(accumulated, k=20)
    print(f"  round {t}: sent index {selection.indices.tolist()} "
          f"value {np.round(selection.values, 4).tolist()}, "
          f"residual mass {np.abs(residual).sum():.4f}")

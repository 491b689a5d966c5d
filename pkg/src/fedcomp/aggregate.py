"""Server-side weighted aggregation of decoded sparse client updates.

The global model advances by the dataset-size-weighted mean of the round's
deltas: W(t) = W(t-1) + sum_i w_i * delta_i with w_i = |D_i| / sum_j |D_j|
over this round's participants. Coordinates a client did not transmit
contribute zero. Weights are formed as exact rationals before float
conversion so they always sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .models import ModelSpec
from .sparsify import SparseSelection


@dataclass(frozen=True)
class GlobalState:
    round: int
    params: np.ndarray
    model_spec: ModelSpec


def aggregate(
    state: GlobalState,
    updates: Sequence[tuple[SparseSelection, int]],
) -> GlobalState:
    """Apply one round of weighted sparse deltas; returns the next state."""
    if not updates:
        raise ValueError("aggregate requires at least one update")
    n = state.params.size
    weights = []
    for selection, client_weight in updates:
        if selection.model_len != n:
            raise ValueError("update model_len does not match the global model")
        if client_weight < 1:
            raise ValueError("client_weight must be >= 1")
        weights.append(client_weight)
    total = sum(weights)
    delta = np.zeros(n, dtype=np.float64)
    for (selection, _), weight in zip(updates, weights):
        if selection.count:
            delta[selection.indices] += float(Fraction(weight, total)) * selection.values
    return replace(state, round=state.round + 1, params=state.params + delta)


def broadcast(state: GlobalState) -> np.ndarray:
    """Current global parameters, as a defensive copy (side-effect free)."""
    return state.params.copy()

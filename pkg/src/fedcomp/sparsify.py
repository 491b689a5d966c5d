"""Magnitude-threshold sparsification with local residual accumulation.

An accumulated update vector is split into the coordinates whose absolute
value reaches the top-k% threshold (transmitted) and the complement
(retained locally for future rounds). The split only routes values, it
never modifies them, so selection plus residual reconstructs the input
bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class SparseSelection:
    """Coordinates surviving the threshold: positions, values, and the cut used."""

    indices: np.ndarray
    values: np.ndarray
    thr: float
    model_len: int

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if idx.ndim != 1 or vals.ndim != 1 or idx.size != vals.size:
            raise ValueError("indices and values must be 1-D and equally long")
        if not (math.isfinite(self.thr) and self.thr >= 0):
            raise ValueError("thr must be finite and >= 0")
        if self.model_len < 0:
            raise ValueError("model_len must be >= 0")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.model_len:
                raise ValueError("indices out of range")
            if not np.all(np.diff(idx) > 0):
                raise ValueError("indices must be strictly increasing")
            if not np.all(np.abs(vals) >= self.thr):
                raise ValueError("selected values must satisfy |value| >= thr")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    @property
    def count(self) -> int:
        return int(self.indices.size)

    def densify(self) -> np.ndarray:
        """Dense model-length vector with the selected values at their indices."""
        out = np.zeros(self.model_len, dtype=np.float64)
        out[self.indices] = self.values
        return out


class ResidualStore:
    """Per-client carry-over of coordinates withheld from transmission."""

    def __init__(self, num_clients: int, model_len: int) -> None:
        if num_clients < 1 or model_len < 1:
            raise ValueError("num_clients and model_len must be >= 1")
        self._buf = np.zeros((num_clients, model_len), dtype=np.float64)

    def get(self, client_id: int) -> np.ndarray:
        return self._buf[client_id].copy()

    def put(self, client_id: int, residual: np.ndarray) -> None:
        if residual.shape != self._buf[client_id].shape:
            raise ValueError("residual length mismatch")
        self._buf[client_id] = residual


def compute_threshold(values: np.ndarray, k: float) -> float:
    """Magnitude of the ceil(k% * n)-th largest absolute entry.

    Every coordinate with absolute value at or above the returned threshold
    belongs to the nominal top-k% set.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("empty vector")
    if not 0 < k <= 100:
        raise ValueError("k must lie in (0, 100]")
    m = math.ceil(k / 100.0 * v.size)
    return float(np.partition(np.abs(v), v.size - m)[v.size - m])


def build_mask(values: np.ndarray, thr: float) -> np.ndarray:
    """Boolean mask, true wherever |value| >= thr."""
    if thr < 0:
        raise ValueError("thr must be >= 0")
    return np.abs(np.asarray(values, dtype=np.float64)) >= thr


def sparsify(
    values: np.ndarray,
    k: float,
    *,
    segments: Sequence[int] | None = None,
) -> tuple[SparseSelection, np.ndarray]:
    """Split an accumulated update into (transmitted selection, retained residual).

    By default the threshold is computed once over the whole flattened vector.
    With `segments` (per-layer lengths summing to the vector length) a separate
    threshold is chosen inside each segment; the selection then reports the
    smallest of the per-segment thresholds as its `thr`.

    Ties at the threshold are all selected (the mask uses >=), so the selection
    may exceed the nominal ceil(k% * n) budget when magnitudes repeat.
    """
    v = np.asarray(values, dtype=np.float64)
    if segments is None:
        thr = compute_threshold(v, k)
        mask = build_mask(v, thr)
    else:
        if sum(segments) != v.size:
            raise ValueError("segment lengths must sum to the vector length")
        mask = np.zeros(v.size, dtype=bool)
        thr = math.inf
        offset = 0
        for length in segments:
            seg = v[offset : offset + length]
            seg_thr = compute_threshold(seg, k)
            mask[offset : offset + length] = build_mask(seg, seg_thr)
            thr = min(thr, seg_thr)
            offset += length
    idx = np.flatnonzero(mask)
    selection = SparseSelection(
        indices=idx, values=v[idx].copy(), thr=float(thr), model_len=v.size
    )
    residual = np.where(mask, 0.0, v)
    return selection, residual


def accumulate(residual: np.ndarray, new_update: np.ndarray) -> np.ndarray:
    """Elementwise sum of the retained residual and a fresh update."""
    r = np.asarray(residual, dtype=np.float64)
    u = np.asarray(new_update, dtype=np.float64)
    if r.shape != u.shape:
        raise ValueError("length mismatch")
    return r + u

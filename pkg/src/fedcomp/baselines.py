"""Comparison pipelines sharing one round-trip interface.

Four upload strategies: `identity` (dense float32 cost, lossless in the
simulator), `sparsify-only` (top-k values sent as raw float32 plus u32
indices), `ternary` (stochastic {-u, 0, +u} rounding of the dense delta),
and `dhqc` (top-k sparsification followed by hierarchical 4-bit
quantization). Every pipeline reports the exact byte length of its
serialized update so communication accounting is auditable.

Ternary wire format (little-endian): magic "TERN", version 0x01,
model_len u64, u float32, then 2-bit trits packed four per byte starting
at the low bits (00 = 0, 01 = +1, 10 = -1); pad trits are 0. The dense and
sparse baseline formats are headed "DENS" / "SPRS" analogously.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import hqc
from .errors import (
    BadMagicError,
    BadVersionError,
    DecodeError,
    IndexOrderError,
    TruncatedError,
)
from .sparsify import SparseSelection, accumulate, sparsify

IDENTITY = "identity"
SPARSIFY_ONLY = "sparsify-only"
TERNARY = "ternary"
DHQC = "dhqc"
PIPELINE_KINDS = (IDENTITY, SPARSIFY_ONLY, TERNARY, DHQC)

TERNARY_MAGIC = b"TERN"
DENSE_MAGIC = b"DENS"
SPARSE_MAGIC = b"SPRS"
VERSION = 1

_TRIT_CODES = {0: 0, 1: 1, -1: 2}  # 2-bit encoding; 3 is invalid


@dataclass(frozen=True)
class Pipeline:
    """A compression strategy fixed for a simulation run."""

    kind: str
    k: float = 1.0  # top-k percent, where applicable
    reconstruct: str = "lower"  # dhqc dequantization point
    segments: tuple[int, ...] | None = None  # per-layer threshold mode

    def __post_init__(self) -> None:
        if self.kind not in PIPELINE_KINDS:
            raise ValueError(f"unknown pipeline kind {self.kind!r}")
        if not 0 < self.k <= 100:
            raise ValueError("k must lie in (0, 100]")
        if self.reconstruct not in hqc.RECONSTRUCT_MODES:
            raise ValueError(f"reconstruct must be one of {hqc.RECONSTRUCT_MODES}")


@dataclass(frozen=True)
class TernaryUpdate:
    """Dense ternary update: scale u >= 0 and one trit in {-1, 0, +1} per coordinate."""

    u: float
    trits: np.ndarray
    model_len: int

    def __post_init__(self) -> None:
        trits = np.asarray(self.trits, dtype=np.int8)
        if trits.ndim != 1 or trits.size != self.model_len:
            raise ValueError("trit count must equal model_len")
        if self.u < 0 or not np.isfinite(self.u):
            raise ValueError("u must be finite and >= 0")
        if trits.size and (trits.min() < -1 or trits.max() > 1):
            raise ValueError("trits must lie in {-1, 0, 1}")
        object.__setattr__(self, "trits", trits)


def ternary_encode(delta: np.ndarray, seed: int) -> TernaryUpdate:
    """Expectation-preserving stochastic ternarization of a dense delta.

    u is the largest absolute coordinate; each coordinate becomes sign(delta_i)
    with probability |delta_i| / u, else 0, so u * trit_i is unbiased for
    delta_i. A zero delta yields u = 0 and all-zero trits.
    """
    v = np.asarray(delta, dtype=np.float64)
    if not np.isfinite(v).all():
        raise ValueError("delta must be finite")
    u = float(np.abs(v).max()) if v.size else 0.0
    if u == 0:
        trits = np.zeros(v.size, dtype=np.int8)
    else:
        prob = np.abs(v) / u
        draws = np.random.default_rng(seed).random(v.size)
        trits = np.where(draws < prob, np.sign(v), 0.0).astype(np.int8)
    return TernaryUpdate(u=u, trits=trits, model_len=v.size)


def ternary_decode(update: TernaryUpdate) -> np.ndarray:
    """Dense reconstruction u * trit, coordinate-wise."""
    return update.u * update.trits.astype(np.float64)


def _check_header(data: bytes, magic: bytes, header_len: int) -> None:
    if len(data) >= 4 and data[:4] != magic:
        raise BadMagicError(f"bad magic {data[:4]!r}")
    if len(data) < header_len:
        raise TruncatedError(f"header truncated at {len(data)} bytes")
    if data[4] != VERSION:
        raise BadVersionError(f"unsupported version {data[4]}")


def _check_length(data: bytes, expected: int) -> None:
    if len(data) < expected:
        raise TruncatedError(f"expected {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise DecodeError(f"trailing data beyond {expected} bytes")


def ternary_packed_size(model_len: int) -> int:
    return 17 + (model_len + 3) // 4


def pack_ternary(update: TernaryUpdate) -> bytes:
    """Serialize; u is written at float32 precision."""
    header = TERNARY_MAGIC + bytes((VERSION,)) + struct.pack(
        "<Qf", update.model_len, np.float32(update.u)
    )
    codes = np.zeros(update.model_len, dtype=np.uint8)
    codes[update.trits == 1] = 1
    codes[update.trits == -1] = 2
    pad = (-codes.size) % 4
    if pad:
        codes = np.append(codes, np.zeros(pad, dtype=np.uint8))
    grouped = codes.reshape(-1, 4)
    packed = (
        grouped[:, 0]
        | (grouped[:, 1] << np.uint8(2))
        | (grouped[:, 2] << np.uint8(4))
        | (grouped[:, 3] << np.uint8(6))
    )
    return header + packed.astype(np.uint8).tobytes()


def unpack_ternary(data: bytes) -> TernaryUpdate:
    data = bytes(data)
    _check_header(data, TERNARY_MAGIC, 17)
    model_len, u = struct.unpack_from("<Qf", data, 5)
    _check_length(data, ternary_packed_size(model_len))
    packed = np.frombuffer(data, dtype=np.uint8, offset=17)
    codes = np.empty(4 * packed.size, dtype=np.uint8)
    for slot in range(4):
        codes[slot::4] = (packed >> (2 * slot)) & 0x03
    if np.any(codes == 3):
        raise DecodeError("invalid trit code 0b11")
    if np.any(codes[model_len:] != 0):
        raise DecodeError("nonzero padding trits")
    codes = codes[:model_len]
    trits = np.zeros(model_len, dtype=np.int8)
    trits[codes == 1] = 1
    trits[codes == 2] = -1
    return TernaryUpdate(u=float(u), trits=trits, model_len=model_len)


def dense_packed_size(model_len: int) -> int:
    return 13 + 4 * model_len


def pack_dense(values: np.ndarray) -> bytes:
    """Dense float32 serialization; the uncompressed baseline's wire cost."""
    v = np.asarray(values, dtype=np.float64)
    header = DENSE_MAGIC + bytes((VERSION,)) + struct.pack("<Q", v.size)
    return header + v.astype("<f4").tobytes()


def unpack_dense(data: bytes) -> np.ndarray:
    data = bytes(data)
    _check_header(data, DENSE_MAGIC, 13)
    (model_len,) = struct.unpack_from("<Q", data, 5)
    _check_length(data, dense_packed_size(model_len))
    return np.frombuffer(data, dtype="<f4", offset=13).astype(np.float64)


def sparse_packed_size(count: int) -> int:
    return 21 + 8 * count


def pack_sparse(selection: SparseSelection) -> bytes:
    """Top-k transmission cost model: u32 indices plus float32 values."""
    if selection.count and int(selection.indices[-1]) > 0xFFFFFFFF:
        raise ValueError("indices exceed the u32 wire width")
    header = SPARSE_MAGIC + bytes((VERSION,)) + struct.pack(
        "<QQ", selection.model_len, selection.count
    )
    return (
        header
        + selection.indices.astype("<u4").tobytes()
        + selection.values.astype("<f4").tobytes()
    )


def unpack_sparse(data: bytes) -> SparseSelection:
    data = bytes(data)
    _check_header(data, SPARSE_MAGIC, 21)
    model_len, count = struct.unpack_from("<QQ", data, 5)
    _check_length(data, sparse_packed_size(count))
    indices = np.frombuffer(data, dtype="<u4", count=count, offset=21).astype(np.int64)
    if count and not np.all(np.diff(indices) > 0):
        raise IndexOrderError("indices not strictly increasing")
    values = np.frombuffer(data, dtype="<f4", count=count, offset=21 + 4 * count)
    # thr is not transmitted in this format; 0 keeps the selection invariant valid.
    try:
        return SparseSelection(
            indices=indices,
            values=values.astype(np.float64),
            thr=0.0,
            model_len=model_len,
        )
    except ValueError as exc:
        raise DecodeError(str(exc)) from exc


def pipeline_roundtrip(
    pipeline: Pipeline,
    delta: np.ndarray,
    residual: np.ndarray,
    seed: int,
    client_weight: int = 1,
) -> tuple[SparseSelection, np.ndarray, int]:
    """Compress one client delta and report what the server would reconstruct.

    Returns (reconstructed sparse delta, updated residual, bytes on the wire).
    Identity and ternary do not use the residual; sparsify-only and dhqc fold
    it into the update before thresholding and retain the complement.
    """
    v = np.asarray(delta, dtype=np.float64)
    r = np.asarray(residual, dtype=np.float64)
    if v.shape != r.shape:
        raise ValueError("delta and residual lengths differ")
    n = v.size
    if pipeline.kind == IDENTITY:
        selection = SparseSelection(
            indices=np.arange(n, dtype=np.int64), values=v.copy(), thr=0.0, model_len=n
        )
        return selection, r.copy(), len(pack_dense(v))
    if pipeline.kind == TERNARY:
        update = ternary_encode(v, seed)
        dense = ternary_decode(update)
        idx = np.flatnonzero(update.trits)
        selection = SparseSelection(
            indices=idx, values=dense[idx], thr=0.0, model_len=n
        )
        return selection, r.copy(), len(pack_ternary(update))
    accumulated = accumulate(r, v)
    selection, new_residual = sparsify(accumulated, pipeline.k, segments=pipeline.segments)
    if pipeline.kind == SPARSIFY_ONLY:
        return selection, new_residual, len(pack_sparse(selection))
    encoded = hqc.encode_update(selection, client_weight, pipeline.reconstruct)
    return hqc.decode_update(encoded), new_residual, len(hqc.pack(encoded))

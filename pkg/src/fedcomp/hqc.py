"""Hierarchical 4-bit quantization of selected values and its wire format.

Each transmitted value is encoded as one sign bit plus a 3-bit interval
number: the magnitude range [thr, theta] (theta = largest selected
magnitude) is cut into 8 equal intervals of width step = (theta - thr) / 8,
and a value's interval index is floor((|value| - thr) / step), clamped to
[0, 7]. Decoding reconstructs the lower interval edge thr + location * step
by default; a midpoint mode (thr + (location + 0.5) * step) halves the
worst-case error and is carried as a flag bit on the wire.

Wire format v1 (all multi-byte integers little-endian):

    bytes 0-3   magic = ASCII "DHQC"
    byte  4     version = 0x01
    byte  5     flags (bit0: reconstruct-midpoint; others must be 0)
    bytes 6-13  model_len: u64
    bytes 14-21 count: u64
    bytes 22-25 thr: float32
    bytes 26-29 theta: float32
    bytes 30-33 client_weight: u32
    then count x u32 indices (strictly increasing)
    then ceil(count/2) bytes of codes, low nibble first; each nibble is
    (sign << 3) | location; an odd count pads the final high nibble with 0.

thr and theta therefore live at float32 precision. To keep the codec
contracts valid after serialization, quantization ranges derived from a
selection round thr *down* and theta *up* to the nearest float32, so every
selected value still lies inside [thr, theta].
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    BadVersionError,
    DecodeError,
    IndexOrderError,
    TruncatedError,
)
from .sparsify import SparseSelection

MAGIC = b"DHQC"
VERSION = 1
FLAG_MIDPOINT = 0x01
HEADER_LEN = 34
NUM_INTERVALS = 8

RECONSTRUCT_MODES = ("lower", "midpoint")


def _f32_down(x: float) -> float:
    """Largest float32 value <= x (x must be >= 0; never rounds below 0)."""
    y = float(np.float32(x))
    if y <= x:
        return y
    return float(np.nextafter(np.float32(y), np.float32(-np.inf)))


def _f32_up(x: float) -> float:
    """Smallest float32 value >= x."""
    y = float(np.float32(x))
    if y >= x:
        return y
    return float(np.nextafter(np.float32(y), np.float32(np.inf)))


@dataclass(frozen=True)
class QuantParams:
    """Quantization range: [thr, theta] split into NUM_INTERVALS intervals."""

    thr: float
    theta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.thr) and math.isfinite(self.theta)):
            raise ValueError("thr and theta must be finite")
        if self.thr < 0:
            raise ValueError("thr must be >= 0")
        if self.theta < self.thr:
            raise ValueError("theta must be >= thr")

    @property
    def step(self) -> float:
        return (self.theta - self.thr) / NUM_INTERVALS

    @classmethod
    def for_wire(cls, thr: float, theta: float) -> "QuantParams":
        """Range widened to float32-representable endpoints (thr down, theta up)."""
        return cls(_f32_down(thr), _f32_up(theta))


@dataclass(frozen=True)
class QuantCode:
    """One encoded value: sign bit (1 = negative) and 3-bit interval number."""

    sign: int
    location: int

    def __post_init__(self) -> None:
        if self.sign not in (0, 1):
            raise ValueError("sign must be 0 or 1")
        if not 0 <= self.location <= 7:
            raise ValueError("location must lie in [0, 7]")

    @property
    def nibble(self) -> int:
        return (self.sign << 3) | self.location


@dataclass(frozen=True)
class EncodedUpdate:
    """Wire-ready compressed update: header fields, indices, and packed codes."""

    model_len: int
    quant: QuantParams
    indices: np.ndarray
    codes: np.ndarray  # uint8 nibbles, one per index: (sign << 3) | location
    client_weight: int
    reconstruct: str = "lower"

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        codes = np.asarray(self.codes, dtype=np.uint8)
        if idx.ndim != 1 or codes.ndim != 1 or idx.size != codes.size:
            raise ValueError("indices and codes must be 1-D and equally long")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.model_len:
                raise ValueError("indices out of range")
            if not np.all(np.diff(idx) > 0):
                raise ValueError("indices must be strictly increasing")
        if np.any(codes > 0x0F):
            raise ValueError("codes must be 4-bit nibbles")
        if self.client_weight < 0:
            raise ValueError("client_weight must be >= 0")
        if self.reconstruct not in RECONSTRUCT_MODES:
            raise ValueError(f"reconstruct must be one of {RECONSTRUCT_MODES}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "codes", codes)

    @property
    def count(self) -> int:
        return int(self.indices.size)


def find_max_abs(selection: SparseSelection) -> float:
    """Largest absolute selected value; an empty selection degenerates to thr."""
    if selection.count == 0:
        return selection.thr
    return float(np.abs(selection.values).max())


def quantize(value: float, q: QuantParams) -> QuantCode:
    """Encode one value whose magnitude lies in [thr, theta]."""
    mag = abs(value)
    if mag < q.thr or mag > q.theta:
        raise ValueError(f"|value| = {mag!r} outside [{q.thr!r}, {q.theta!r}]")
    step = q.step
    location = 0 if step == 0 else min(7, int(math.floor((mag - q.thr) / step)))
    return QuantCode(sign=1 if value < 0 else 0, location=location)


def dequantize(code: QuantCode, q: QuantParams, reconstruct: str = "lower") -> float:
    """Reconstructed value for a code: +/- (thr + location * step)."""
    offset = code.location + 0.5 if reconstruct == "midpoint" else float(code.location)
    mag = q.thr + offset * q.step
    return -mag if code.sign else mag


def _quantize_array(values: np.ndarray, q: QuantParams) -> np.ndarray:
    mags = np.abs(values)
    if values.size and (mags.min() < q.thr or mags.max() > q.theta):
        raise ValueError("value magnitude outside [thr, theta]")
    if q.step == 0:
        locations = np.zeros(values.size, dtype=np.uint8)
    else:
        locations = np.minimum(
            np.floor((mags - q.thr) / q.step), 7
        ).astype(np.uint8)
    signs = (values < 0).astype(np.uint8)
    return (signs << 3) | locations


def _dequantize_array(
    codes: np.ndarray, q: QuantParams, reconstruct: str
) -> np.ndarray:
    offsets = (codes & 0x07).astype(np.float64)
    if reconstruct == "midpoint":
        offsets += 0.5
    mags = q.thr + offsets * q.step
    return np.where(codes >> 3 == 1, -mags, mags)


def encode_update(
    selection: SparseSelection, client_weight: int, reconstruct: str = "lower"
) -> EncodedUpdate:
    """Quantize a selection against its own [thr, max |value|] range."""
    q = QuantParams.for_wire(selection.thr, find_max_abs(selection))
    return EncodedUpdate(
        model_len=selection.model_len,
        quant=q,
        indices=selection.indices.copy(),
        codes=_quantize_array(selection.values, q),
        client_weight=client_weight,
        reconstruct=reconstruct,
    )


def decode_update(encoded: EncodedUpdate) -> SparseSelection:
    """Dequantize every code; indices pass through unchanged."""
    try:
        values = _dequantize_array(encoded.codes, encoded.quant, encoded.reconstruct)
        return SparseSelection(
            indices=encoded.indices.copy(),
            values=values,
            thr=encoded.quant.thr,
            model_len=encoded.model_len,
        )
    except ValueError as exc:
        raise DecodeError(str(exc)) from exc


def packed_size(count: int) -> int:
    """Exact wire size in bytes for an update with `count` coordinates."""
    return HEADER_LEN + 4 * count + (count + 1) // 2


def _pack_nibbles(codes: np.ndarray) -> bytes:
    if codes.size % 2:
        codes = np.append(codes, np.uint8(0))
    return (codes[0::2] | (codes[1::2] << np.uint8(4))).astype(np.uint8).tobytes()


def _unpack_nibbles(raw: bytes, count: int) -> np.ndarray:
    packed = np.frombuffer(raw, dtype=np.uint8)
    out = np.empty(2 * packed.size, dtype=np.uint8)
    out[0::2] = packed & 0x0F
    out[1::2] = packed >> 4
    if count % 2 and out[count] != 0:
        raise DecodeError("nonzero padding in final code byte")
    return out[:count]


def pack(encoded: EncodedUpdate) -> bytes:
    """Serialize to the canonical v1 byte layout (one encoding per update)."""
    q = encoded.quant
    for name, value in (("thr", q.thr), ("theta", q.theta)):
        if float(np.float32(value)) != value:
            raise ValueError(f"{name} is not exactly representable as float32")
    if encoded.count and int(encoded.indices[-1]) > 0xFFFFFFFF:
        raise ValueError("indices exceed the u32 wire width")
    if encoded.client_weight > 0xFFFFFFFF:
        raise ValueError("client_weight exceeds the u32 wire width")
    flags = FLAG_MIDPOINT if encoded.reconstruct == "midpoint" else 0
    header = MAGIC + bytes((VERSION, flags)) + struct.pack(
        "<QQffI",
        encoded.model_len,
        encoded.count,
        q.thr,
        q.theta,
        encoded.client_weight,
    )
    return (
        header
        + encoded.indices.astype("<u4").tobytes()
        + _pack_nibbles(encoded.codes)
    )


def unpack(data: bytes) -> EncodedUpdate:
    """Parse and validate a v1 byte sequence; inverse of pack on valid inputs."""
    data = bytes(data)
    if len(data) >= 4 and data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}")
    if len(data) < HEADER_LEN:
        raise TruncatedError(f"header truncated at {len(data)} bytes")
    version = data[4]
    if version != VERSION:
        raise BadVersionError(f"unsupported version {version}")
    flags = data[5]
    if flags & ~FLAG_MIDPOINT:
        raise DecodeError(f"unsupported flags 0x{flags:02x}")
    model_len, count, thr, theta, client_weight = struct.unpack_from("<QQffI", data, 6)
    thr, theta = float(thr), float(theta)
    if not (math.isfinite(thr) and math.isfinite(theta)) or thr < 0 or theta < thr:
        raise DecodeError("invalid quantization range")
    expected = packed_size(count)
    if len(data) < expected:
        raise TruncatedError(f"expected {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise DecodeError(f"trailing data beyond {expected} bytes")
    indices = np.frombuffer(data, dtype="<u4", count=count, offset=HEADER_LEN).astype(
        np.int64
    )
    if count:
        if not np.all(np.diff(indices) > 0):
            raise IndexOrderError("indices not strictly increasing")
        if int(indices[-1]) >= model_len:
            raise DecodeError("index out of range for model_len")
    codes = _unpack_nibbles(data[HEADER_LEN + 4 * count :], count)
    return EncodedUpdate(
        model_len=model_len,
        quant=QuantParams(thr, theta),
        indices=indices,
        codes=codes,
        client_weight=client_weight,
        reconstruct="midpoint" if flags & FLAG_MIDPOINT else "lower",
    )


def compression_ratio(model_len: int, packed_bytes: int) -> float:
    """Dense float32 bytes for the whole model divided by the wire bytes."""
    if packed_bytes < 1:
        raise ValueError("packed_bytes must be >= 1")
    return (4.0 * model_len) / packed_bytes

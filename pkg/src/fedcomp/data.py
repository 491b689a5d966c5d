"""Dataset acquisition: IDX parsing, synthetic blobs, and IID partitioning."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .models import Batch

IDX_UBYTE = 0x08


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix plus integer class labels. Image features are in [0, 1]."""

    features: np.ndarray
    labels: np.ndarray
    name: str
    num_classes: int

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or labels.ndim != 1 or feats.shape[0] != labels.shape[0]:
            raise ValueError("features rows must align with labels")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError("labels out of range")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def take(self, indices: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(
            features=self.features[indices],
            labels=self.labels[indices],
            name=self.name,
            num_classes=self.num_classes,
        )

    def as_batch(self) -> Batch:
        return Batch(self.features, self.labels)


@dataclass(frozen=True)
class Partition:
    """Disjoint per-client sample index lists covering the dataset exactly once."""

    assignments: tuple[np.ndarray, ...]

    @property
    def num_clients(self) -> int:
        return len(self.assignments)


def parse_idx(data: bytes) -> np.ndarray:
    """Decode an IDX byte stream (big-endian, unsigned-byte payload) to a tensor."""
    if len(data) < 4:
        raise DataError("truncated IDX header")
    if data[0] != 0 or data[1] != 0:
        raise DataError("bad magic: IDX files start with two zero bytes")
    type_byte = data[2]
    if type_byte != IDX_UBYTE:
        raise DataError(f"unsupported type byte 0x{type_byte:02x}")
    ndim = data[3]
    header_len = 4 + 4 * ndim
    if len(data) < header_len:
        raise DataError("truncated IDX dimension list")
    dims = struct.unpack_from(f">{ndim}I", data, 4) if ndim else ()
    payload = data[header_len:]
    expected = math.prod(dims)
    if len(payload) != expected:
        raise DataError(
            f"size mismatch: dims {dims} imply {expected} bytes, got {len(payload)}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def load_idx_dataset(
    images_path: str | Path,
    labels_path: str | Path,
    *,
    limit: int | None = None,
    seed: int = 0,
    name: str = "mnist",
    num_classes: int = 10,
) -> LabeledDataset:
    """Load an IDX image/label file pair, flatten, and rescale pixels by /255.

    With `limit`, a seeded shuffle selects that many samples.
    """
    for path in (images_path, labels_path):
        if not Path(path).is_file():
            raise DataError(f"dataset file not found: {path}")
    images = parse_idx(Path(images_path).read_bytes())
    labels = parse_idx(Path(labels_path).read_bytes())
    if images.ndim < 2 or labels.ndim != 1:
        raise DataError("expected an image tensor and a 1-D label vector")
    if images.shape[0] != labels.shape[0]:
        raise DataError("image and label counts differ")
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    labels = labels.astype(np.int64)
    if limit is not None and limit < len(labels):
        order = np.random.default_rng(seed).permutation(len(labels))[:limit]
        features, labels = features[order], labels[order]
    return LabeledDataset(
        features=features, labels=labels, name=name, num_classes=num_classes
    )


def synth_classification(
    n: int, d: int, classes: int, separation: float, seed: int
) -> LabeledDataset:
    """Gaussian blobs: one unit-variance cluster per class, mean norm = separation.

    Labels are near-balanced (class counts differ by at most one) and the whole
    construction is a pure function of the seed.
    """
    if classes < 2 or n < classes:
        raise ValueError("need n >= classes >= 2")
    if d < 1:
        raise ValueError("d must be >= 1")
    if separation < 0:
        raise ValueError("separation must be >= 0")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((classes, d))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    means = separation * directions / norms
    labels = np.arange(n, dtype=np.int64) % classes
    rng.shuffle(labels)
    features = means[labels] + rng.standard_normal((n, d))
    return LabeledDataset(
        features=features,
        labels=labels,
        name=f"synth-blobs(n={n},d={d},c={classes},sep={separation})",
        num_classes=classes,
    )


def partition_iid(ds: LabeledDataset, num_clients: int, seed: int) -> Partition:
    """Seeded shuffle then contiguous near-equal slices (sizes differ by <= 1)."""
    if num_clients < 1:
        raise ValueError("num_clients must be >= 1")
    if num_clients > len(ds):
        raise ValueError("more clients than samples")
    order = np.random.default_rng(seed).permutation(len(ds))
    base, extra = divmod(len(ds), num_clients)
    assignments = []
    offset = 0
    for client in range(num_clients):
        size = base + (1 if client < extra else 0)
        assignments.append(order[offset : offset + size].copy())
        offset += size
    return Partition(assignments=tuple(assignments))

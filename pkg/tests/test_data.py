import struct

import numpy as np
import pytest

from fedcomp.data import (
    LabeledDataset,
    load_idx_dataset,
    parse_idx,
    partition_iid,
    synth_classification,
)
from fedcomp.errors import DataError
from fedcomp.models import LOGISTIC, ModelSpec, evaluate, init_params, local_train


def serialize_idx(tensor: np.ndarray) -> bytes:
    """Test-only inverse of parse_idx (unsigned-byte tensors)."""
    tensor = np.asarray(tensor, dtype=np.uint8)
    header = bytes([0, 0, 0x08, tensor.ndim]) + struct.pack(
        f">{tensor.ndim}I", *tensor.shape
    )
    return header + tensor.tobytes()


def test_parse_idx_layout():
    payload = bytes(range(256)) * 6 + bytes(32)  # 2 * 28 * 28 = 1568 bytes
    raw = bytes([0, 0, 0x08, 3]) + struct.pack(">3I", 2, 28, 28) + payload
    tensor = parse_idx(raw)
    assert tensor.shape == (2, 28, 28)
    assert tensor.dtype == np.uint8
    assert tensor[0, 0, 5] == 5


def test_parse_idx_errors():
    good = serialize_idx(np.arange(12).reshape(3, 4))
    with pytest.raises(DataError, match="size mismatch"):
        parse_idx(good[:-1])
    with pytest.raises(DataError, match="magic"):
        parse_idx(b"\x01" + good[1:])
    with pytest.raises(DataError, match="unsupported type"):
        parse_idx(good[:2] + b"\x0d" + good[3:])
    with pytest.raises(DataError):
        parse_idx(b"\x00\x00")
    with pytest.raises(DataError):
        parse_idx(bytes([0, 0, 8, 2, 0, 0]))  # dimension list cut short


def test_parse_idx_empty_dims():
    raw = bytes([0, 0, 0x08, 1]) + struct.pack(">I", 0)
    tensor = parse_idx(raw)
    assert tensor.shape == (0,)


def test_parse_serialize_round_trip():
    rng = np.random.default_rng(0)
    for shape in [(7,), (3, 5), (2, 4, 6), (1, 28, 28)]:
        tensor = rng.integers(0, 256, size=shape).astype(np.uint8)
        assert np.array_equal(parse_idx(serialize_idx(tensor)), tensor)


def test_load_idx_dataset(tmp_path):
    rng = np.random.default_rng(1)
    images = rng.integers(0, 256, size=(30, 4, 4)).astype(np.uint8)
    labels = rng.integers(0, 10, size=30).astype(np.uint8)
    img_path = tmp_path / "images.idx"
    lab_path = tmp_path / "labels.idx"
    img_path.write_bytes(serialize_idx(images))
    lab_path.write_bytes(serialize_idx(labels))

    ds = load_idx_dataset(img_path, lab_path)
    assert len(ds) == 30
    assert ds.input_dim == 16
    assert ds.features.min() >= 0.0 and ds.features.max() <= 1.0
    assert np.array_equal(ds.labels, labels.astype(np.int64))

    sub_a = load_idx_dataset(img_path, lab_path, limit=10, seed=5)
    sub_b = load_idx_dataset(img_path, lab_path, limit=10, seed=5)
    assert len(sub_a) == 10
    assert np.array_equal(sub_a.features, sub_b.features)

    with pytest.raises(DataError, match="not found"):
        load_idx_dataset(tmp_path / "missing.idx", lab_path)
    (tmp_path / "short.idx").write_bytes(serialize_idx(labels[:10]))
    with pytest.raises(DataError, match="counts differ"):
        load_idx_dataset(img_path, tmp_path / "short.idx")


def test_synth_determinism_and_balance():
    a = synth_classification(101, 7, 3, 2.0, seed=9)
    b = synth_classification(101, 7, 3, 2.0, seed=9)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)
    counts = np.bincount(a.labels, minlength=3)
    assert counts.max() - counts.min() <= 1
    c = synth_classification(101, 7, 3, 2.0, seed=10)
    assert not np.array_equal(a.features, c.features)


def test_synth_validation():
    with pytest.raises(ValueError):
        synth_classification(1, 5, 2, 1.0, seed=0)  # n < classes
    with pytest.raises(ValueError):
        synth_classification(10, 0, 2, 1.0, seed=0)
    with pytest.raises(ValueError):
        synth_classification(10, 5, 1, 1.0, seed=0)


def _train_and_score(ds, seeds=15, alpha=0.5):
    split = int(0.8 * len(ds))
    train, test = ds.take(np.arange(split)), ds.take(np.arange(split, len(ds)))
    spec = ModelSpec(LOGISTIC, ds.input_dim, ds.num_classes)
    w = init_params(spec, 0)
    for seed in range(seeds):
        w = local_train(w, spec, train.as_batch(), 1, 32, alpha, seed=seed)
    accuracy, _ = evaluate(w, spec, test.as_batch())
    return accuracy


def test_synth_zero_separation_is_chance_level():
    ds = synth_classification(5000, 10, 2, 0.0, seed=3)
    assert abs(_train_and_score(ds) - 0.5) <= 0.05


def test_synth_wide_separation_is_nearly_separable():
    ds = synth_classification(2000, 10, 2, 10.0, seed=3)
    assert _train_and_score(ds) >= 0.99


def test_partition_single_client():
    ds = synth_classification(20, 3, 2, 1.0, seed=0)
    part = partition_iid(ds, 1, seed=0)
    assert sorted(part.assignments[0].tolist()) == list(range(20))


def test_partition_remainder_spread():
    ds = synth_classification(10, 3, 2, 1.0, seed=0)
    part = partition_iid(ds, 3, seed=1)
    assert sorted(len(a) for a in part.assignments) == [3, 3, 4]
    assert len(part.assignments[0]) == 4  # earlier clients absorb the remainder


def test_partition_disjoint_and_covering():
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = int(rng.integers(1, 400))
        m = int(rng.integers(1, n + 1))
        ds = synth_classification(max(n, 2), 4, 2, 1.0, seed=int(rng.integers(1e6)))
        ds = ds.take(np.arange(n)) if n >= 2 else ds.take(np.array([0]))
        part = partition_iid(ds, m, seed=int(rng.integers(1e6)))
        merged = np.concatenate(part.assignments)
        assert len(merged) == n
        assert len(np.unique(merged)) == n
        sizes = [len(a) for a in part.assignments]
        assert max(sizes) - min(sizes) <= 1


def test_partition_too_many_clients():
    ds = synth_classification(5, 3, 2, 1.0, seed=0)
    with pytest.raises(ValueError):
        partition_iid(ds, 6, seed=0)


def test_partition_label_histograms_match_hypergeometric():
    # Each client's class-0 count is hypergeometric(N, K, n_c); all counts
    # must fall within 3 sigma of the expectation.
    ds = synth_classification(6000, 5, 2, 1.0, seed=7)
    part = partition_iid(ds, 20, seed=8)
    total = len(ds)
    k0 = int((ds.labels == 0).sum())
    for assignment in part.assignments:
        n_c = len(assignment)
        observed = int((ds.labels[assignment] == 0).sum())
        mean = n_c * k0 / total
        var = n_c * (k0 / total) * (1 - k0 / total) * (total - n_c) / (total - 1)
        assert abs(observed - mean) <= 3 * np.sqrt(var)


def test_dataset_take_and_validation():
    ds = synth_classification(10, 3, 2, 1.0, seed=0)
    sub = ds.take(np.array([1, 3, 5]))
    assert len(sub) == 3
    assert np.array_equal(sub.features[0], ds.features[1])
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((3, 2)), np.array([0, 1, 5]), "bad", num_classes=2)

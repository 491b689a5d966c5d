#!/usr/bin/env python3
"""IDX ingestion end to end, without a network: synthesize a small digit-style
dataset, write real IDX files, and run a federated simulation from a config
file that points at them.

With real MNIST files on disk the same config works unchanged; point the
mnist_* keys at train-images-idx3-ubyte etc. and raise the subset sizes.
"""

import struct
import tempfile
from pathlib import Path

import numpy as np

from fedcomp import SimConfig, load_idx_dataset, parse_idx, run_simulation


def write_idx(path: Path, tensor: np.ndarray) -> None:
    tensor = np.asarray(tensor, dtype=np.uint8)
    header = bytes([0, 0, 0x08, tensor.ndim]) + struct.pack(
        f">{tensor.ndim}I", *tensor.shape
    )
    path.write_bytes(header + tensor.tobytes())


def fake_digits(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """8x8 images whose bright quadrant encodes the class: a toy stand-in."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 4, size=n).astype(np.uint8)
    images = rng.integers(0, 60, size=(n, 8, 8)).astype(np.uint8)
    for i, label in enumerate(labels):
        r, c = divmod(int(label), 2)
        images[i, 4 * r : 4 * r + 4, 4 * c : 4 * c + 4] += 160
    return images, labels


workdir = Path(tempfile.mkdtemp(prefix="fedcomp-idx-"))
train_images, train_labels = fake_digits(1600, seed=1)
test_images, test_labels = fake_digits(400, seed=2)
for name, tensor in [
    ("train-images.idx", train_images),
    ("train-labels.idx", train_labels),
    ("test-images.idx", test_images),
    ("test-labels.idx", test_labels),
]:
    write_idx(workdir / name, tensor)
print(f"wrote IDX files to {workdir}")

parsed = parse_idx((workdir / "train-images.idx").read_bytes())
print(f"parse_idx: shape {parsed.shape}, dtype {parsed.dtype}")
ds = load_idx_dataset(
    workdir / "train-images.idx", workdir / "train-labels.idx", num_classes=4
)
print(f"dataset: {len(ds)} samples, {ds.input_dim} features, "
      f"pixels in [{ds.features.min():.2f}, {ds.features.max():.2f}]")

config_text = f"""
dataset = mnist
mnist_train_images = {workdir / 'train-images.idx'}
mnist_train_labels = {workdir / 'train-labels.idx'}
mnist_test_images = {workdir / 'test-images.idx'}
mnist_test_labels = {workdir / 'test-labels.idx'}
mnist_train_subset = 1600
mnist_test_subset = 400
model = mlp-1h
hidden_dim = 16
clients = 8
rounds = 20
pipeline = dhqc
k = 2
sampling = static
fraction = 1.0
alpha = 0.2
seed = 0
out = {workdir / 'metrics.csv'}
"""
config_path = workdir / "sim.cfg"
config_path.write_text(config_text)

# The ingested labels only span 4 classes here; the softmax head simply
# carries 10 outputs as it would for real MNIST files.
config = SimConfig.from_file(config_path)
result = run_simulation(config)
print(f"\n20 rounds on the toy IDX task:")
for key in ("final_accuracy", "final_loss", "total_bytes", "mean_compression_ratio"):
    print(f"  {key}: {result.summary[key]}")
print(f"per-round CSV: {workdir / 'metrics.csv'}")

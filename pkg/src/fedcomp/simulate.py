"""Round orchestration, configuration, metrics, and CSV emission.

A simulation is a pure function of its SimConfig: every random draw comes
from the master seed, with per-(purpose, round, client) seeds derived by a
stable hash so that parallel and sequential execution produce identical
results. Each round broadcasts the global model, trains the sampled
clients locally, compresses their deltas through the configured pipeline,
aggregates the decoded updates, and records accuracy plus exact upload
byte counts.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import baselines, models
from .aggregate import GlobalState, aggregate, broadcast
from .baselines import Pipeline, pipeline_roundtrip
from .data import LabeledDataset, load_idx_dataset, partition_iid, synth_classification
from .errors import ConfigError
from .models import Batch, ModelSpec, evaluate, init_params, local_train
from .sampling import RoundContext, SamplingPolicy, sample_clients
from .sparsify import ResidualStore

log = logging.getLogger("fedcomp")

CSV_HEADER = (
    "t,participants,test_accuracy,test_loss,"
    "bytes_uploaded,cumulative_bytes,compression_ratio"
)

THRESHOLD_SCOPES = ("global", "per-layer")
DATASET_KINDS = ("synthetic", "mnist")

# Seed-derivation purposes; distinct tags keep the random streams disjoint.
P_TRAIN = 0
P_COMPRESS = 1
P_SAMPLE = 2
P_DATA_TRAIN = 3
P_DATA_TEST = 4
P_INIT = 5
P_PARTITION = 6


def derive_seed(master: int, *parts: int) -> int:
    """Stable 64-bit seed from the master seed and integer context tags."""
    h = hashlib.blake2b(digest_size=8)
    for value in (master, *parts):
        h.update(struct.pack("<q", value))
    return int.from_bytes(h.digest(), "little")


@dataclass
class SimConfig:
    """Everything a run depends on; see README for the key=value file format."""

    dataset: str = "synthetic"
    model: str = models.LOGISTIC
    hidden_dim: int = 32
    clients: int = 20
    rounds: int = 100
    pipeline: str = baselines.IDENTITY
    k: float = 1.0
    reconstruct: str = "lower"
    threshold_scope: str = "global"
    sampling: str = "static"
    fraction: float = 0.5
    phi: float = 0.1
    alpha: float = 0.1
    batch_size: int = 32
    local_epochs: int = 1
    seed: int = 0
    out: str = "metrics.csv"
    synth_samples: int = 5000
    synth_features: int = 20
    synth_classes: int = 2
    synth_separation: float = 3.0
    synth_test_samples: int = 1000
    mnist_train_images: str = ""
    mnist_train_labels: str = ""
    mnist_test_images: str = ""
    mnist_test_labels: str = ""
    mnist_train_subset: int = 2000
    mnist_test_subset: int = 1000

    def validate(self) -> None:
        if self.dataset not in DATASET_KINDS:
            raise ConfigError(f"unknown dataset {self.dataset!r}")
        if self.model not in models.MODEL_KINDS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.pipeline not in baselines.PIPELINE_KINDS:
            raise ConfigError(f"unknown pipeline {self.pipeline!r}")
        if self.threshold_scope not in THRESHOLD_SCOPES:
            raise ConfigError(f"unknown threshold_scope {self.threshold_scope!r}")
        if self.sampling not in ("static", "dynamic"):
            raise ConfigError(f"unknown sampling {self.sampling!r}")
        if self.reconstruct not in ("lower", "midpoint"):
            raise ConfigError(f"unknown reconstruct {self.reconstruct!r}")
        if self.clients < 1:
            raise ConfigError("clients must be >= 1")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.local_epochs < 1:
            raise ConfigError("local_epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if not 0 < self.k <= 100:
            raise ConfigError("k must lie in (0, 100]")
        if not 0 < self.fraction <= 1:
            raise ConfigError("fraction must lie in (0, 1]")
        if self.phi < 0:
            raise ConfigError("phi must be >= 0")
        if self.dataset == "mnist":
            for key in (
                "mnist_train_images",
                "mnist_train_labels",
                "mnist_test_images",
                "mnist_test_labels",
            ):
                if not getattr(self, key):
                    raise ConfigError(f"mnist dataset requires {key}")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "SimConfig":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kind = known[key]
            try:
                if kind == "int":
                    kwargs[key] = int(raw)
                elif kind == "float":
                    kwargs[key] = float(raw)
                else:
                    kwargs[key] = raw
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
        config = cls(**kwargs)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: str | Path) -> "SimConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        return cls.from_mapping(parse_config_text(path.read_text(encoding="utf-8")))

    def sampling_policy(self) -> SamplingPolicy:
        if self.sampling == "static":
            return SamplingPolicy.static(self.fraction)
        return SamplingPolicy.dynamic(self.phi)

    def pipeline_for(self, spec: ModelSpec) -> Pipeline:
        segments = spec.layer_lengths() if self.threshold_scope == "per-layer" else None
        return Pipeline(
            kind=self.pipeline, k=self.k, reconstruct=self.reconstruct, segments=segments
        )


def parse_config_text(text: str) -> dict[str, str]:
    """Parse flat `key = value` lines; full-line # comments; duplicates rejected."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


@dataclass(frozen=True)
class RoundMetrics:
    t: int
    participants: int
    test_accuracy: float
    test_loss: float
    bytes_uploaded: int
    cumulative_bytes: int
    compression_ratio: float

    def csv_row(self) -> str:
        return (
            f"{self.t},{self.participants},{self.test_accuracy!r},"
            f"{self.test_loss!r},{self.bytes_uploaded},{self.cumulative_bytes},"
            f"{self.compression_ratio!r}"
        )


@dataclass
class SimState:
    """Mutable per-run state threaded through run_round."""

    config: SimConfig
    spec: ModelSpec
    global_state: GlobalState
    residuals: ResidualStore
    client_batches: list[Batch]
    test_batch: Batch
    pipeline: Pipeline
    policy: SamplingPolicy
    total_bytes: int = 0


def _build_datasets(config: SimConfig) -> tuple[LabeledDataset, LabeledDataset]:
    if config.dataset == "synthetic":
        # One pooled draw so train and test share the same class means; rows are
        # iid after the internal label shuffle, so a contiguous split is sound.
        pooled = synth_classification(
            config.synth_samples + config.synth_test_samples,
            config.synth_features,
            config.synth_classes,
            config.synth_separation,
            seed=derive_seed(config.seed, P_DATA_TRAIN),
        )
        train = pooled.take(np.arange(config.synth_samples))
        test = pooled.take(
            np.arange(config.synth_samples, config.synth_samples + config.synth_test_samples)
        )
        return train, test
    train = load_idx_dataset(
        config.mnist_train_images,
        config.mnist_train_labels,
        limit=config.mnist_train_subset,
        seed=derive_seed(config.seed, P_DATA_TRAIN),
        name="mnist-train",
    )
    test = load_idx_dataset(
        config.mnist_test_images,
        config.mnist_test_labels,
        limit=config.mnist_test_subset,
        seed=derive_seed(config.seed, P_DATA_TEST),
        name="mnist-test",
    )
    return train, test


def init_simulation(config: SimConfig) -> SimState:
    """Materialize datasets, partition, model, and zeroed residuals."""
    config.validate()
    train, test = _build_datasets(config)
    spec = ModelSpec(
        kind=config.model,
        input_dim=train.input_dim,
        num_classes=train.num_classes,
        hidden_dim=config.hidden_dim if config.model == models.MLP else 0,
    )
    partition = partition_iid(
        train, config.clients, seed=derive_seed(config.seed, P_PARTITION)
    )
    client_batches = [train.take(idx).as_batch() for idx in partition.assignments]
    params = init_params(spec, seed=derive_seed(config.seed, P_INIT))
    return SimState(
        config=config,
        spec=spec,
        global_state=GlobalState(round=0, params=params, model_spec=spec),
        residuals=ResidualStore(config.clients, spec.param_count),
        client_batches=client_batches,
        test_batch=test.as_batch(),
        pipeline=config.pipeline_for(spec),
        policy=config.sampling_policy(),
    )


def run_round(state: SimState, config: SimConfig, t: int) -> tuple[SimState, RoundMetrics]:
    """Execute round t: sample, train, compress, aggregate, evaluate."""
    ctx = RoundContext(
        t=t, num_clients=config.clients, seed=derive_seed(config.seed, P_SAMPLE)
    )
    participants = sample_clients(state.policy, ctx)
    global_params = broadcast(state.global_state)
    updates = []
    bytes_uploaded = 0
    for client_id in participants:
        client_id = int(client_id)
        data = state.client_batches[client_id]
        local = local_train(
            global_params,
            state.spec,
            data,
            epochs=config.local_epochs,
            batch_size=config.batch_size,
            alpha=config.alpha,
            seed=derive_seed(config.seed, P_TRAIN, t, client_id),
        )
        selection, new_residual, nbytes = pipeline_roundtrip(
            state.pipeline,
            local - global_params,
            state.residuals.get(client_id),
            seed=derive_seed(config.seed, P_COMPRESS, t, client_id),
            client_weight=len(data),
        )
        state.residuals.put(client_id, new_residual)
        updates.append((selection, len(data)))
        bytes_uploaded += nbytes
    state.global_state = aggregate(state.global_state, updates)
    accuracy, loss = evaluate(state.global_state.params, state.spec, state.test_batch)
    state.total_bytes += bytes_uploaded
    metrics = RoundMetrics(
        t=t,
        participants=len(participants),
        test_accuracy=accuracy,
        test_loss=loss,
        bytes_uploaded=bytes_uploaded,
        cumulative_bytes=state.total_bytes,
        compression_ratio=4.0 * state.spec.param_count * len(participants) / bytes_uploaded,
    )
    log.debug("round %d: %s", t, metrics)
    return state, metrics


@dataclass
class SimResult:
    metrics: list[RoundMetrics]
    summary: dict


def simulate_rounds(config: SimConfig) -> SimResult:
    """Run every round; no file I/O."""
    state = init_simulation(config)
    log.info(
        "simulating %d rounds: pipeline=%s sampling=%s clients=%d params=%d",
        config.rounds,
        config.pipeline,
        config.sampling,
        config.clients,
        state.spec.param_count,
    )
    metrics = []
    for t in range(config.rounds):
        state, round_metrics = run_round(state, config, t)
        metrics.append(round_metrics)
    total_participants = sum(m.participants for m in metrics)
    summary = {
        "rounds": config.rounds,
        "param_count": state.spec.param_count,
        "final_accuracy": metrics[-1].test_accuracy,
        "final_loss": metrics[-1].test_loss,
        "total_bytes": state.total_bytes,
        "mean_compression_ratio": float(
            np.mean([m.compression_ratio for m in metrics])
        ),
        "total_participants": total_participants,
        # Downlink is full-precision model broadcast; tracked separately and
        # excluded from the upload-centric compression ratio.
        "total_downlink_bytes": 4 * state.spec.param_count * total_participants,
    }
    log.info("done: %s", summary)
    return SimResult(metrics=metrics, summary=summary)


def write_metrics_csv(path: str | Path, metrics: Sequence[RoundMetrics]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(CSV_HEADER + "\n")
        for m in metrics:
            handle.write(m.csv_row() + "\n")


def run_simulation(config: SimConfig, out_path: str | Path | None = None) -> SimResult:
    """Run all rounds and write the per-round metrics CSV."""
    result = simulate_rounds(config)
    write_metrics_csv(out_path if out_path is not None else config.out, result.metrics)
    return result


@dataclass
class ComparisonResult:
    labels: list[str]
    header: list[str]
    rows: list[list]
    summary: dict

    def csv_text(self) -> str:
        lines = [",".join(self.header)]
        for row in self.rows:
            lines.append(
                ",".join(repr(v) if isinstance(v, float) else str(v) for v in row)
            )
        return "\n".join(lines) + "\n"


def _run_labels(configs: Sequence[SimConfig]) -> list[str]:
    base = [f"{c.pipeline}-{c.sampling}" for c in configs]
    labels = []
    for i, name in enumerate(base):
        if base.count(name) > 1:
            name = f"{name}-{base[: i + 1].count(name)}"
        labels.append(name)
    return labels


def compare_runs(configs: Sequence[SimConfig]) -> ComparisonResult:
    """Run several configs that differ only in pipeline/sampling; align rounds."""
    if len(configs) < 2:
        raise ConfigError("compare requires at least two configs")
    neutral = [
        replace(
            c,
            pipeline=baselines.IDENTITY,
            k=1.0,
            reconstruct="lower",
            threshold_scope="global",
            sampling="static",
            fraction=0.5,
            phi=0.0,
            out="",
        )
        for c in configs
    ]
    for other in neutral[1:]:
        if other != neutral[0]:
            raise ConfigError("configs must differ only in pipeline/sampling settings")
    labels = _run_labels(configs)
    results = [simulate_rounds(c) for c in configs]
    header = ["t"]
    for label in labels:
        header += [
            f"{label}_test_accuracy",
            f"{label}_cumulative_bytes",
            f"{label}_compression_ratio",
        ]
    rows = []
    for t in range(configs[0].rounds):
        row: list = [t]
        for result in results:
            m = result.metrics[t]
            row += [m.test_accuracy, m.cumulative_bytes, m.compression_ratio]
        rows.append(row)
    summary = {
        label: {
            "final_accuracy": result.summary["final_accuracy"],
            "total_bytes": result.summary["total_bytes"],
            "compression_ratio": 4.0
            * result.summary["param_count"]
            * result.summary["total_participants"]
            / result.summary["total_bytes"],
        }
        for label, result in zip(labels, results)
    }
    return ComparisonResult(labels=labels, header=header, rows=rows, summary=summary)

"""Deterministic federated-learning communication simulator and codec library.

Building blocks: flat-parameter models with manual gradients, top-k
sparsification with residual accumulation, hierarchical 4-bit quantization
with a bit-exact wire format, ternary and float32 baseline codecs, client
sampling schedules, weighted aggregation, and a seeded round-by-round
simulation harness with CSV metrics.
"""

from .aggregate import GlobalState, aggregate, broadcast
from .baselines import (
    DHQC,
    IDENTITY,
    PIPELINE_KINDS,
    SPARSIFY_ONLY,
    TERNARY,
    Pipeline,
    TernaryUpdate,
    pack_dense,
    pack_sparse,
    pack_ternary,
    pipeline_roundtrip,
    ternary_decode,
    ternary_encode,
    unpack_dense,
    unpack_sparse,
    unpack_ternary,
)
from .data import (
    LabeledDataset,
    Partition,
    load_idx_dataset,
    parse_idx,
    partition_iid,
    synth_classification,
)
from .errors import (
    BadMagicError,
    BadVersionError,
    ConfigError,
    DataError,
    DecodeError,
    FedcompError,
    IndexOrderError,
    TruncatedError,
)
from .hqc import (
    EncodedUpdate,
    QuantCode,
    QuantParams,
    compression_ratio,
    decode_update,
    dequantize,
    encode_update,
    find_max_abs,
    pack,
    packed_size,
    quantize,
    unpack,
)
from .models import (
    LOGISTIC,
    MLP,
    Batch,
    ModelSpec,
    evaluate,
    forward_loss,
    gradient,
    init_params,
    local_train,
    sgd_step,
)
from .sampling import RoundContext, SamplingPolicy, sample_clients, sample_size
from .simulate import (
    ComparisonResult,
    RoundMetrics,
    SimConfig,
    SimResult,
    compare_runs,
    derive_seed,
    init_simulation,
    run_round,
    run_simulation,
    simulate_rounds,
    write_metrics_csv,
)
from .sparsify import (
    ResidualStore,
    SparseSelection,
    accumulate,
    build_mask,
    compute_threshold,
    sparsify,
)

__version__ = "0.1.0"

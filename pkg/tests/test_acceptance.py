"""Acceptance gate: one test per criterion, each at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one line per
criterion. Every expected value is either analytic, frozen from an
independent oracle, or computed by an oracle implemented here that never
shares code with the path under test.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from fedcomp.aggregate import GlobalState, aggregate, broadcast
from fedcomp.baselines import ternary_decode, ternary_encode
from fedcomp.errors import (
    BadMagicError,
    BadVersionError,
    IndexOrderError,
    TruncatedError,
)
from fedcomp.hqc import (
    QuantParams,
    _dequantize_array,
    _quantize_array,
    compression_ratio,
    decode_update,
    encode_update,
    pack,
    unpack,
)
from fedcomp.models import (
    LOGISTIC,
    MLP,
    Batch,
    ModelSpec,
    forward_loss,
    gradient,
    init_params,
    local_train,
)
from fedcomp.sampling import RoundContext, SamplingPolicy, sample_clients, sample_size
from fedcomp.simulate import (
    P_TRAIN,
    SimConfig,
    derive_seed,
    init_simulation,
    run_simulation,
    simulate_rounds,
)
from fedcomp.sparsify import accumulate, sparsify

sys.path.insert(0, str(Path(__file__).parent))
from test_wire import fuzz_update  # noqa: E402  (golden-file recipe)

GOLDEN_DIR = Path(__file__).parent / "golden"


def _report(number: int, name: str) -> None:
    print(f"ACCEPTANCE {number} ({name}): PASS")


def test_criterion_01_codec_round_trip_bound():
    # 50 seeded (thr, theta) configurations x 1e5 values each; strict < step
    # inside [thr, theta); <= step at |v| = theta (with a few-ulp float
    # allowance, since thr + 7*step can round above theta - step).
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    for _ in range(50):
        thr = float(rng.uniform(0.0, 5.0))
        q = QuantParams(thr, thr + float(rng.uniform(0.1, 10.0)))
        values = rng.uniform(thr, q.theta, size=100_000)
        values *= rng.choice([-1.0, 1.0], size=values.size)
        decoded = _dequantize_array(_quantize_array(values, q), q, "lower")
        errors = np.abs(decoded - values)
        assert int((errors >= q.step).sum()) == 0  # zero violations, strictly
        edge_slack = 4 * np.finfo(float).eps * q.theta
        for edge in (q.theta, -q.theta):
            edge_decoded = _dequantize_array(
                _quantize_array(np.array([edge]), q), q, "lower"
            )[0]
            assert abs(edge_decoded - edge) <= q.step + edge_slack
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"took {elapsed:.2f}s"
    _report(1, "codec round-trip bound")


def test_criterion_02_topk_oracle_equivalence():
    # Selection must equal a brute-force descending-sort selection with the
    # >=-at-threshold tie rule, over 1000 vectors of lengths 1..10^4.
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    for i in range(1000):
        n = int(rng.integers(1, 10_001))
        v = rng.normal(size=n)
        if i % 5 == 0:  # force ties at the threshold magnitude
            v = np.round(v, 1)
        k = float(rng.uniform(0.01, 100.0))
        m = math.ceil(k / 100.0 * n)
        thr_oracle = float(np.sort(np.abs(v))[::-1][m - 1])
        oracle_set = np.flatnonzero(np.abs(v) >= thr_oracle)
        selection, residual = sparsify(v, k)
        assert selection.thr == thr_oracle
        assert np.array_equal(selection.indices, oracle_set)
        assert np.array_equal(selection.densify() + residual, v)
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"took {elapsed:.2f}s"
    _report(2, "top-k oracle equivalence")


def test_criterion_03_wire_format_golden_and_fuzz():
    for i in range(3):
        golden = (GOLDEN_DIR / f"update_{i}.bin").read_bytes()
        assert pack(fuzz_update(i)) == golden, f"golden file {i} drifted"
    for seed in range(1000):
        update = fuzz_update(seed)
        raw = pack(update)
        back = unpack(raw)
        assert back.model_len == update.model_len
        assert back.quant == update.quant
        assert np.array_equal(back.indices, update.indices)
        assert np.array_equal(back.codes, update.codes)
        assert back.client_weight == update.client_weight
        assert back.reconstruct == update.reconstruct
        assert pack(back) == raw
    raw = bytearray(pack(fuzz_update(6)))
    with pytest.raises(BadMagicError):
        unpack(b"XHQC" + bytes(raw[4:]))
    with pytest.raises(BadVersionError):
        unpack(bytes(raw[:4]) + b"\x02" + bytes(raw[5:]))
    with pytest.raises(TruncatedError):
        unpack(bytes(raw[:-1]))
    swapped = bytearray(raw)
    swapped[34:38], swapped[38:42] = raw[38:42], raw[34:38]
    with pytest.raises(IndexOrderError):
        unpack(bytes(swapped))
    _report(3, "wire-format golden files and fuzz")


def test_criterion_04_compression_ratio_arithmetic():
    # Closed form at model_len = 1e6, k = 0.1% (1000 coordinates):
    # (4 * 1e6) / (34 + 1000*4 + 500) = 882.223...; the tool must also
    # report the same order of magnitude (>= 500x) end to end.
    closed_form = 4_000_000 / 4534
    model_len = 10**6
    v = np.random.default_rng(1).normal(size=model_len)
    selection, _ = sparsify(v, 0.1)
    assert selection.count == 1000  # continuous draws: no ties
    raw = pack(encode_update(selection, client_weight=1))
    ratio = compression_ratio(model_len, len(raw))
    assert ratio == pytest.approx(closed_form, rel=1e-3)
    assert ratio >= 500.0
    _report(4, "compression-ratio arithmetic")


def _oracle_fedavg_round(global_params, spec, client_batches, config, t):
    """Independent local-SGD + weighted-model-average oracle."""
    client_models = []
    for cid, data in enumerate(client_batches):
        w = global_params.copy()
        rng = np.random.default_rng(derive_seed(config.seed, P_TRAIN, t, cid))
        n = len(data)
        for _ in range(config.local_epochs):
            order = rng.permutation(n)
            for s in range(0, n, config.batch_size):
                idx = order[s : s + config.batch_size]
                mb = Batch(data.features[idx], data.labels[idx])
                w = w - config.alpha * gradient(w, spec, mb)
        client_models.append(w)
    weights = np.array([len(b) for b in client_batches], dtype=np.float64)
    weights /= weights.sum()
    return sum(wgt * model for wgt, model in zip(weights, client_models))


def test_criterion_05_fedavg_equivalence():
    config = SimConfig(
        dataset="synthetic",
        synth_samples=240,  # divides evenly across 4 clients
        synth_test_samples=40,
        synth_features=6,
        synth_classes=2,
        clients=4,
        rounds=5,
        pipeline="identity",
        sampling="static",
        fraction=1.0,
        batch_size=16,
        seed=3,
    )
    state = init_simulation(config)
    sizes = {len(b) for b in state.client_batches}
    assert sizes == {60}  # equal |D_i|
    oracle_params = state.global_state.params.copy()
    from fedcomp.simulate import run_round

    for t in range(config.rounds):
        oracle_params = _oracle_fedavg_round(
            oracle_params, state.spec, state.client_batches, config, t
        )
        state, _ = run_round(state, config, t)
        diff = np.abs(state.global_state.params - oracle_params).max()
        assert diff <= 1e-10, f"round {t}: max deviation {diff}"
    _report(5, "FedAvg equivalence oracle")


def test_criterion_06_conservation():
    # 50-round DHQC run; per client and per coordinate the transmitted
    # dequantized mass plus the final residual must equal the summed raw
    # deltas within (rounds transmitted) * step_max; the pre-quantization
    # split itself must be exact.
    clients, rounds, k = 6, 50, 5.0
    spec = ModelSpec(LOGISTIC, 10, 2)
    from fedcomp.data import partition_iid, synth_classification

    ds = synth_classification(1200, 10, 2, 3.0, seed=42)
    part = partition_iid(ds, clients, seed=1)
    batches = [ds.take(idx).as_batch() for idx in part.assignments]
    state = GlobalState(round=0, params=init_params(spec, 0), model_spec=spec)
    n = spec.param_count
    residuals = [np.zeros(n) for _ in range(clients)]
    sum_deltas = [np.zeros(n) for _ in range(clients)]
    sum_decoded = [np.zeros(n) for _ in range(clients)]
    step_max = np.zeros(clients)
    transmitted = np.zeros(clients, dtype=int)

    for t in range(rounds):
        global_params = broadcast(state)
        updates = []
        for cid in range(clients):
            local = local_train(
                global_params, spec, batches[cid], 1, 32, 0.1,
                seed=derive_seed(0, P_TRAIN, t, cid),
            )
            delta = local - global_params
            sum_deltas[cid] += delta
            accumulated = accumulate(residuals[cid], delta)
            selection, residual = sparsify(accumulated, k)
            assert np.array_equal(selection.densify() + residual, accumulated)
            encoded = encode_update(selection, client_weight=len(batches[cid]))
            decoded = decode_update(encoded)
            sum_decoded[cid] += decoded.densify()
            residuals[cid] = residual
            step_max[cid] = max(step_max[cid], encoded.quant.step)
            transmitted[cid] += 1
            updates.append((decoded, len(batches[cid])))
        state = aggregate(state, updates)

    for cid in range(clients):
        discrepancy = np.abs(sum_decoded[cid] + residuals[cid] - sum_deltas[cid])
        bound = transmitted[cid] * step_max[cid] + 1e-9
        assert discrepancy.max() <= bound, (
            f"client {cid}: {discrepancy.max()} > {bound}"
        )
    _report(6, "conservation over a DHQC run")


def test_criterion_07_sampler_trace():
    policy = SamplingPolicy.dynamic(0.1)
    trace = [
        sample_size(policy, RoundContext(t=t, num_clients=100, seed=0))
        for t in range(101)
    ]
    oracle = [
        min(100, max(5, int(math.floor(100.0 * math.exp(-0.1 * t) + 0.5))))
        for t in range(101)
    ]
    assert trace == oracle
    assert trace[0] == 100
    assert all(v == 5 for v in trace[30:])
    # Membership stays within bounds and is deterministic in (seed, t).
    got = sample_clients(policy, RoundContext(t=40, num_clients=100, seed=8))
    again = sample_clients(policy, RoundContext(t=40, num_clients=100, seed=8))
    assert np.array_equal(got, again) and len(got) == 5
    _report(7, "sampler trace")


CONVERGENCE_BASE = dict(
    dataset="synthetic",
    synth_samples=5000,
    synth_test_samples=1000,
    synth_features=20,
    synth_classes=2,
    synth_separation=3.0,
    clients=20,
    rounds=100,
    sampling="static",
    fraction=0.5,
    seed=0,
)


def test_criterion_08_desk_scale_convergence_parity():
    start = time.perf_counter()
    finals = {}
    for kind in ("identity", "dhqc", "sparsify-only", "ternary"):
        config = SimConfig(pipeline=kind, k=1.0, **CONVERGENCE_BASE)
        result = simulate_rounds(config)
        finals[kind] = result.summary["final_accuracy"]
        assert finals[kind] >= 0.9, f"{kind} failed the convergence smoke floor"
    assert abs(finals["dhqc"] - finals["identity"]) <= 0.02
    assert abs(finals["ternary"] - finals["identity"]) <= 0.03
    assert abs(finals["sparsify-only"] - finals["identity"]) <= 0.03
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0, f"took {elapsed:.1f}s"
    _report(
        8,
        "desk-scale convergence parity "
        + " ".join(f"{k}={v:.4f}" for k, v in finals.items()),
    )


def _cumulative_participants(policy, clients, rounds):
    return sum(
        sample_size(policy, RoundContext(t=t, num_clients=clients, seed=0))
        for t in range(rounds)
    )


def _read_csv_columns(path):
    rows = Path(path).read_text().strip().split("\n")
    header = rows[0].split(",")
    data = [r.split(",") for r in rows[1:]]
    return {name: [row[i] for row in data] for i, name in enumerate(header)}


def test_criterion_09_dynamic_sampling_property(tmp_path):
    clients, rounds = 20, 100
    static_cum = _cumulative_participants(
        SamplingPolicy.static(0.5), clients, rounds
    )
    phi = next(
        cand
        for cand in (0.01, 0.02, 0.03, 0.05, 0.1, 0.2, 0.5)
        if _cumulative_participants(SamplingPolicy.dynamic(cand), clients, rounds)
        <= static_cum
    )
    wins = 0
    for seed in range(5):
        base = dict(CONVERGENCE_BASE, pipeline="dhqc", k=1.0, seed=seed)
        static_csv = tmp_path / f"static_{seed}.csv"
        dynamic_csv = tmp_path / f"dynamic_{seed}.csv"
        run_simulation(SimConfig(**base), out_path=static_csv)
        dyn_cfg = dict(base)
        dyn_cfg.update(sampling="dynamic", phi=phi)
        run_simulation(SimConfig(**dyn_cfg), out_path=dynamic_csv)

        static_cols = _read_csv_columns(static_csv)
        dynamic_cols = _read_csv_columns(dynamic_csv)
        # Exact budget verification straight from the CSVs.
        assert sum(map(int, dynamic_cols["participants"])) <= sum(
            map(int, static_cols["participants"])
        )
        assert int(dynamic_cols["cumulative_bytes"][-1]) <= int(
            static_cols["cumulative_bytes"][-1]
        )
        static_mean = np.mean(
            [float(a) for a in static_cols["test_accuracy"][1:21]]
        )
        dynamic_mean = np.mean(
            [float(a) for a in dynamic_cols["test_accuracy"][1:21]]
        )
        wins += dynamic_mean >= static_mean
    assert wins >= 3, f"dynamic sampling won only {wins}/5 seeds"
    _report(9, f"dynamic-sampling property (phi={phi}, wins={wins}/5)")


def test_criterion_10_ternary_unbiasedness():
    rng = np.random.default_rng(77)
    delta = rng.normal(size=32)
    u = np.abs(delta).max()
    draws = 10_000
    total = np.zeros(32)
    for seed in range(draws):
        total += ternary_decode(ternary_encode(delta, seed=seed))
    mean = total / draws
    prob = np.abs(delta) / u
    sigma = np.sqrt(np.maximum(u**2 * prob - delta**2, 0.0) / draws)
    assert np.all(np.abs(mean - delta) <= 3 * sigma + 1e-12)
    _report(10, "ternary unbiasedness")


def _central_difference(params, spec, batch, h=1e-5):
    out = np.empty_like(params)
    for i in range(params.size):
        plus, minus = params.copy(), params.copy()
        plus[i] += h
        minus[i] -= h
        out[i] = (
            forward_loss(plus, spec, batch) - forward_loss(minus, spec, batch)
        ) / (2 * h)
    return out


def test_criterion_11_gradient_correctness():
    specs = [ModelSpec(LOGISTIC, 4, 3), ModelSpec(MLP, 4, 3, hidden_dim=5)]
    for spec in specs:
        for seed in range(20):
            rng = np.random.default_rng(seed)
            params = rng.uniform(-0.5, 0.5, spec.param_count)
            batch = Batch(rng.normal(size=(6, 4)), rng.integers(0, 3, size=6))
            analytic = gradient(params, spec, batch)
            numeric = _central_difference(params, spec, batch)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-6)
    _report(11, "gradient correctness (both model kinds, 20 instances)")

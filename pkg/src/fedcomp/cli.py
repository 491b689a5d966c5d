"""Command-line front end.

    fedcomp simulate --config sim.cfg [--out metrics.csv] [--seed 7]
    fedcomp compare --configs a.cfg,b.cfg --out comparison.csv
    fedcomp inspect-update update.bin

Exit codes: 0 success, 2 configuration error, 3 data error. The env var
SIM_LOG_LEVEL (error | info | debug) controls logging verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import hqc
from .errors import ConfigError, DataError
from .simulate import SimConfig, compare_runs, run_simulation

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _configure_logging() -> None:
    name = os.environ.get("SIM_LOG_LEVEL", "info").lower()
    if name not in LOG_LEVELS:
        raise ConfigError(
            f"SIM_LOG_LEVEL must be one of {sorted(LOG_LEVELS)}, got {name!r}"
        )
    logging.basicConfig(level=LOG_LEVELS[name], format="%(levelname)s %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedcomp",
        description="Deterministic federated-learning communication simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one simulation and write its CSV")
    sim.add_argument("--config", required=True, help="path to a key=value config file")
    sim.add_argument("--out", default=None, help="override the config's CSV path")
    sim.add_argument("--seed", type=int, default=None, help="override the master seed")

    cmp_ = sub.add_parser("compare", help="run several configs and align their rounds")
    cmp_.add_argument(
        "--configs", required=True, help="comma-separated list of config paths"
    )
    cmp_.add_argument("--out", required=True, help="path for the comparison CSV")

    insp = sub.add_parser(
        "inspect-update", help="pretty-print a packed compressed update"
    )
    insp.add_argument("binfile", help="path to a packed update")
    return parser


def _cmd_simulate(args: argparse.Namespace) -> None:
    config = SimConfig.from_file(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    result = run_simulation(config, out_path=args.out)
    out = args.out if args.out is not None else config.out
    print(f"wrote {config.rounds} rounds to {out}")
    for key, value in result.summary.items():
        print(f"  {key}: {value}")


def _cmd_compare(args: argparse.Namespace) -> None:
    paths = [p.strip() for p in args.configs.split(",") if p.strip()]
    configs = [SimConfig.from_file(p) for p in paths]
    comparison = compare_runs(configs)
    Path(args.out).write_text(comparison.csv_text(), encoding="utf-8")
    print(f"wrote comparison of {len(configs)} runs to {args.out}")
    for label in comparison.labels:
        row = comparison.summary[label]
        print(
            f"  {label}: final_accuracy={row['final_accuracy']:.4f} "
            f"total_bytes={row['total_bytes']} "
            f"compression_ratio={row['compression_ratio']:.2f}"
        )


def _cmd_inspect(args: argparse.Namespace) -> None:
    path = Path(args.binfile)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    data = path.read_bytes()
    update = hqc.unpack(data)
    q = update.quant
    print(f"{path}: {len(data)} bytes")
    print(f"  model_len:      {update.model_len}")
    print(f"  count:          {update.count}")
    print(f"  thr:            {q.thr!r}")
    print(f"  theta:          {q.theta!r}")
    print(f"  step:           {q.step!r}")
    print(f"  client_weight:  {update.client_weight}")
    print(f"  reconstruct:    {update.reconstruct}")
    print(
        f"  compression:    {hqc.compression_ratio(update.model_len, len(data)):.2f}x"
        " vs dense float32"
    )
    decoded = hqc.decode_update(update)
    shown = min(update.count, 10)
    for i in range(shown):
        code = int(update.codes[i])
        print(
            f"    [{int(update.indices[i])}] sign={code >> 3} "
            f"location={code & 7} value={float(decoded.values[i])!r}"
        )
    if update.count > shown:
        print(f"    ... {update.count - shown} more")


def main(argv: list[str] | None = None) -> int:
    try:
        _configure_logging()
        args = _build_parser().parse_args(argv)
        if args.command == "simulate":
            _cmd_simulate(args)
        elif args.command == "compare":
            _cmd_compare(args)
        else:
            _cmd_inspect(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

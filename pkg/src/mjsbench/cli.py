"""Command-line entry point: sysid-sweep, regret-sweep, and single subcommands."""

from __future__ import annotations

import argparse
import json
import os.path
import sys

from .errors import ConfigError
from .experiments import (
    REGRET_COLUMNS,
    SYSID_COLUMNS,
    ExperimentConfig,
    load_config,
    rows_to_csv,
    run_regret_sweep,
    run_single,
    run_sysid_sweep,
    with_overrides,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", help="output path (default: standard output)")
    parser.add_argument("--seed", type=int, help="override base_seed")
    parser.add_argument("--reps", type=int, help="override replications")
    parser.add_argument("--jobs", type=int, help="worker processes (env MJS_BENCH_JOBS wins)")
    parser.add_argument("--no-plot", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mjs-bench",
        description="Benchmark harness for jump-system identification and adaptive LQR",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("sysid-sweep", "regret-sweep"):
        p = sub.add_parser(name, help=f"run a {name.split('-')[0]} grid and emit CSV")
        _add_common(p)
    p = sub.add_parser("single", help="end-to-end report for one model")
    _add_common(p)
    p.add_argument("--model", help="model JSON file ({n, p, s, A, B, T})")
    return parser


def _config_for(args: argparse.Namespace, kind: str) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
        if cfg.kind != kind:
            raise ConfigError(f"field 'kind': config says {cfg.kind!r} but subcommand is {kind!r}")
    else:
        cfg = ExperimentConfig(kind=kind)
    cfg = with_overrides(
        cfg,
        base_seed=args.seed,
        replications=args.reps,
        jobs=args.jobs,
        out=args.out,
        model_file=getattr(args, "model", None),
    )
    if args.no_plot:
        cfg = with_overrides(cfg, plot=False)
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as handle:
            handle.write(text)


def _figure_path(out: str) -> str:
    return os.path.splitext(out)[0] + ".png"


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sysid-sweep":
            cfg = _config_for(args, "sysid-sweep")
            rows = run_sysid_sweep(cfg)
            _emit(rows_to_csv(rows, SYSID_COLUMNS), cfg.out)
            if cfg.plot and cfg.out is not None:
                from .plots import render_sysid_figure

                render_sysid_figure(rows, _figure_path(cfg.out))
        elif args.command == "regret-sweep":
            cfg = _config_for(args, "regret-sweep")
            rows = run_regret_sweep(cfg)
            _emit(rows_to_csv(rows, REGRET_COLUMNS), cfg.out)
            if cfg.plot and cfg.out is not None:
                from .plots import render_regret_figure

                render_regret_figure(rows, _figure_path(cfg.out))
        else:
            cfg = _config_for(args, "single-run")
            report = run_single(cfg)
            _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", cfg.out)
            if cfg.plot and cfg.out is not None:
                from .plots import render_single_figure

                render_single_figure(report, _figure_path(cfg.out))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

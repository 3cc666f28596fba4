"""Command line entry point: run experiments, validate configs, write results."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .reports import (
    render_run_figures,
    run_stem,
    write_manifest,
    write_raw_csv,
    write_results_csv,
)
from .scenarios import ConfigError, ScenarioConfig, builtin_scenario, run_monte_carlo

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jdtc",
        description="Joint detection, tracking and classification experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write CSV, manifest and figures")
    run.add_argument(
        "--scenario",
        default="example1",
        help="example1 | example2 | fusion-demo | file (requires --config)",
    )
    run.add_argument("--config", type=Path, help="JSON scenario config (scenario=file)")
    run.add_argument("--algo", choices=("cjde-lmb", "etd", "dte"), default=None)
    run.add_argument("--trials", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--gamma", type=float, default=None)
    run.add_argument("--threads", type=int, default=None, help="trial worker count")
    run.add_argument("--out", type=Path, default=Path("results"))
    run.add_argument("--raw", action="store_true", help="also dump per-trial scores")
    run.add_argument("--no-figures", action="store_true", help="skip the metric charts")

    val = sub.add_parser("validate", help="check a JSON scenario config")
    val.add_argument("--config", type=Path, required=True)
    return parser


def _load_config_file(path: Path) -> ScenarioConfig:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if isinstance(data, dict) and isinstance(data.get("config"), dict):
        data = data["config"]  # run manifests wrap the config; accept them directly
    try:
        config = ScenarioConfig.from_dict(data)
        config.validate()
    except (ConfigError, TypeError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config


def _resolve_config(args: argparse.Namespace) -> ScenarioConfig:
    if args.scenario == "file" or args.config is not None:
        if args.config is None:
            raise ConfigError("--scenario file requires --config PATH")
        config = _load_config_file(args.config)
    else:
        config = builtin_scenario(args.scenario, gamma=args.gamma)
    overrides = {}
    if args.algo is not None:
        overrides["algorithm"] = args.algo
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.gamma is not None:
        overrides["gamma"] = args.gamma
    if overrides:
        config = replace(config, **overrides)
    config.validate()
    return config


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        config = _resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_monte_carlo(config, threads=args.threads)
        out: Path = args.out
        stem = run_stem(config)
        csv_path = write_results_csv(out / f"{stem}.csv", result.rows)
        manifest = write_manifest(
            out / f"{stem}_manifest.json",
            config,
            extra={"failures": result.failures, "threads": args.threads},
        )
        written = [csv_path, manifest]
        if args.raw:
            written.append(write_raw_csv(out / f"{stem}_raw.csv", result))
        if not args.no_figures:
            written.extend(render_run_figures(out, stem, result.rows, config))
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failure: surface and signal exit 2
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in written:
        print(path)
    if result.failures:
        print(f"warning: {result.failures} trial(s) diverged and were excluded", file=sys.stderr)
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        config = _load_config_file(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{args.config}: ok ({config.name}, {config.algorithm}, {config.trials} trials)")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "validate":
        return _cmd_validate(args)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

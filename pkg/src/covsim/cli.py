"""Command-line entry point: ``covsim <experiment> [--config PATH] [options]``."""

from __future__ import annotations

import argparse
import json
import sys

from .estimators import EstimatorKind
from .harness import EXPERIMENTS, ConfigError, RunConfig, emit_csv, run_experiment


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="covsim",
        description="Layout-aware covariance estimation experiments for multi-cell massive MIMO.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--seed", type=int, help="master RNG seed (overrides config)")
    ap.add_argument("--threads", type=int, help="worker threads for Monte-Carlo trials")
    ap.add_argument("--out", help="CSV output path (default: standard output)")
    ap.add_argument("--trials", type=int, help="trials per drop (overrides config)")
    ap.add_argument("--drops", type=int, help="angle-of-arrival drops (overrides config)")
    ap.add_argument("--estimator", dest="estimators",
                    help="comma-separated subset of " +
                         ",".join(k.value for k in EstimatorKind))
    ap.add_argument("--quiet", action="store_true", help="suppress progress lines")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg_dict = {}
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                cfg_dict = json.load(fh)
            if not isinstance(cfg_dict, dict):
                raise ConfigError("config file must hold a JSON object")
        cfg = RunConfig.from_dict(args.experiment, cfg_dict, seed=args.seed,
                                  threads=args.threads, out=args.out, trials=args.trials,
                                  drops=args.drops, estimators=args.estimators)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"covsim: cannot read config: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"covsim: invalid configuration: {exc}", file=sys.stderr)
        return 2

    rows = run_experiment(cfg, log=None if args.quiet else sys.stderr)
    try:
        emit_csv(rows, cfg.out if cfg.out else sys.stdout)
    except OSError as exc:
        print(f"covsim: cannot write output: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

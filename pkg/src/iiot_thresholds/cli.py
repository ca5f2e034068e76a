"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 IO error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, PROFILES, load_config
from .experiment import export, run_sweep, summarize
from .network import Deployment, SensingModel, calibrate_w
from .optimizers import solve
from .sim import SimConfig, run_slots

__all__ = ["main", "EXIT_OK", "EXIT_CONFIG", "EXIT_IO"]

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3
log = logging.getLogger("iiot_thresholds")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iiot-thresholds", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="run every method over random deployments")
    s.add_argument("--config", help="INI file; profile defaults when omitted")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    s.add_argument("--seed", type=int, help="override the master seed")

    s = sub.add_parser("solve", help="run one optimizer on a deployment")
    s.add_argument("--method", required=True)
    s.add_argument("--deployment", required=True, help="deployment JSON")
    s.add_argument("--config", help="INI file for model constants and method options")
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("simulate", help="simulate a threshold vector")
    s.add_argument("--deployment", required=True, help="deployment JSON")
    s.add_argument("--delta", required=True, help="JSON list of thresholds, or a file holding one")
    s.add_argument("--ttis", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--config", help="INI file for alpha and eta")
    return p


def _config(path, profile="desk") -> ExperimentConfig:
    return load_config(path, profile) if path else PROFILES[profile]


def _read_json(text_or_path: str, what: str):
    try:
        is_file = Path(text_or_path).is_file()
    except OSError:  # e.g. inline JSON longer than a file name may be
        is_file = False
    try:
        raw = Path(text_or_path).read_text() if is_file else text_or_path
    except OSError as exc:
        raise OSError(f"cannot read {what} {text_or_path}: {exc}") from exc
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} is not valid JSON: {exc}") from exc


def _deployment(path: str) -> Deployment:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read deployment {path}: {exc}") from exc
    try:
        return Deployment.from_dict(json.loads(text))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid deployment file {path}: {exc}") from exc


def _sweep(args) -> int:
    cfg = _config(args.config, args.profile)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    rows, timings = run_sweep(cfg, with_timings=True)
    files = export(rows, args.out, timings=timings)
    for a in summarize(rows):
        log.info("%-12s N=%-4d feasible=%.2f W=%.3e", a["method"], a["n"], a["feasibility"], a["w_mean"])
    print("\n".join(str(f) for f in files))
    return EXIT_OK


def _solve(args) -> int:
    cfg = _config(args.config)
    dep = _deployment(args.deployment)
    model = cfg.model
    cals = calibrate_w(dep, model, samples=cfg.calibration_samples, seed=args.seed)
    try:
        res = solve(args.method, dep, cals, model, cfg.budget, cfg.options(args.method), seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(res.to_json())
    return EXIT_OK


def _simulate(args) -> int:
    cfg = _config(args.config)
    dep = _deployment(args.deployment)
    delta = np.asarray(_read_json(args.delta, "threshold vector"), dtype=float)
    try:
        report = run_slots(dep, SensingModel(eta=cfg.eta, alpha=cfg.alpha), delta,
                           SimConfig(args.ttis, seed=args.seed))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(report.to_json())
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handler = {"sweep": _sweep, "solve": _solve, "simulate": _simulate}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

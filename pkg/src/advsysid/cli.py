"""Command-line entry point.

    advsysid {simulate|fit|experiment|certify} --config <path> --out <dir>
             [--seed N] [--threads N] [--sampled N] [--trajectory CSV]

Exit codes are a stable contract: 0 success, 1 runtime failure, 2
usage/config error. Every run writes ``manifest.json`` into the output
directory before any computation output; the manifest echoes the fully
resolved configuration, so a run is reproducible from it alone. The
default thread count comes from ``ADVSYSID_THREADS`` (1 if unset).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .certificate import ExactModeUnavailableError, NetBudgetError, certify
from .config import ConfigError, ResolvedConfig, load_config
from .dynamics import (DivergenceError, SystemSpec, random_system,
                       read_trajectory_csv, simulate, write_trajectory_csv)
from .estimators import (METHOD_L1NORM, InsufficientExcitationError,
                         LadSolveError, fit_l1, fit_l2norm, fit_ols)
from .experiments import (run_experiment, sweep, write_report_json,
                          write_sweep_csv, write_trace_csv)
from .linalg import frobenius_distance
from .svgplot import write_error_trace_svg

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

_FIT_FUNCS = {
    "ols": fit_ols,
    "l2norm": fit_l2norm,
    "l1norm": fit_l1,
}


def _default_threads() -> int:
    raw = os.environ.get("ADVSYSID_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advsysid",
        description="Simulation and estimation lab for linear system "
                    "identification under adversarial disturbances.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, trajectory=False):
        p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the master seed")
        p.add_argument("--threads", type=int, default=_default_threads(),
                       help="parallel trial workers (default from "
                            "ADVSYSID_THREADS)")
        if trajectory:
            p.add_argument("--trajectory", required=True,
                           help="trajectory CSV produced by `simulate`")

    common(sub.add_parser("simulate", help="write one trajectory CSV"))
    common(sub.add_parser("fit", help="fit estimators on a trajectory CSV"),
           trajectory=True)
    common(sub.add_parser("experiment",
                          help="run error traces / sweeps with plots"))
    cert = sub.add_parser("certify", help="run the uniqueness certificate")
    common(cert, trajectory=True)
    cert.add_argument("--sampled", type=int, default=None, metavar="N",
                      help="sampled mode with N random directions "
                           "(required for d > 3)")
    return parser


def _write_manifest(out_dir: Path, subcommand: str, resolved: ResolvedConfig,
                    extra: dict | None = None) -> None:
    manifest = {
        "subcommand": subcommand,
        "tool_version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "out_dir": str(out_dir),
        "master_seed": resolved.master_seed,
        "config": resolved.echo,
    }
    if extra:
        manifest.update(extra)
    write_report_json(manifest, out_dir / "manifest.json")


def _build_system(resolved: ResolvedConfig) -> SystemSpec:
    if resolved.system is not None:
        return resolved.system
    ss = np.random.SeedSequence(resolved.master_seed)
    system_seed, _ = ss.spawn(2)
    return random_system(resolved.d, resolved.target_norm, system_seed)


def _apply_seed(resolved: ResolvedConfig, seed: int | None) -> ResolvedConfig:
    if seed is None:
        return resolved
    resolved.master_seed = seed
    resolved.experiment = replace(resolved.experiment, master_seed=seed)
    resolved.echo["run"]["master_seed"] = seed
    return resolved


def cmd_simulate(args) -> int:
    resolved = _apply_seed(load_config(args.config), args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = _build_system(resolved)
    _write_manifest(out_dir, "simulate", resolved, extra={
        "system": {"d": spec.d, "a_star": spec.a_star.tolist(),
                   "x0": spec.x0.tolist()},
        "T": resolved.sim_horizon,
    })
    _, traj_seed = np.random.SeedSequence(resolved.master_seed).spawn(2)
    traj = simulate(spec, resolved.model, resolved.sim_horizon, traj_seed)
    write_trajectory_csv(traj, out_dir / "trajectory.csv")
    print(f"wrote {out_dir / 'trajectory.csv'} "
          f"(T={traj.T}, d={traj.d}, attacks={int(traj.attack_flags.sum())})")
    return EXIT_OK


def _load_truth(trajectory_path: Path) -> np.ndarray | None:
    manifest_path = trajectory_path.parent / "manifest.json"
    if not manifest_path.exists():
        return None
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    system = manifest.get("system")
    if not system or "a_star" not in system:
        return None
    return np.asarray(system["a_star"], dtype=float)


def cmd_fit(args) -> int:
    resolved = _apply_seed(load_config(args.config), args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir, "fit", resolved,
                    extra={"trajectory": str(args.trajectory)})
    traj = read_trajectory_csv(args.trajectory)
    a_star = _load_truth(Path(args.trajectory))
    for name in resolved.experiment.estimators:
        result = _FIT_FUNCS[name](traj)
        payload = result.to_dict()
        if a_star is not None and a_star.shape == result.a_hat.shape:
            payload["frobenius_error"] = frobenius_distance(result.a_hat, a_star)
        write_report_json(payload, out_dir / f"fit_{name}.json")
        shown = payload.get("frobenius_error")
        print(f"{name}: objective={result.objective:.6g}"
              + (f" frobenius_error={shown:.3e}" if shown is not None else ""))
    return EXIT_OK


def _cell_svg_name(p: float, d: int) -> str:
    return f"error_trace_p{p:g}_d{d}.svg"


def _median_series(report) -> dict:
    series: dict = {}
    for name in report.trials[0].traces:
        by_t: dict = {}
        for trial in report.trials:
            for t, err in trial.traces[name]:
                if err is not None:
                    by_t.setdefault(t, []).append(err)
        series[name] = [(t, float(np.median(v))) for t, v in sorted(by_t.items())]
    return series


def cmd_experiment(args) -> int:
    resolved = _apply_seed(load_config(args.config), args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir, "experiment", resolved)
    base = resolved.experiment
    warnings = 0

    if resolved.p_values or resolved.d_values:
        p_values = resolved.p_values or [resolved.model.p]
        d_values = resolved.d_values or [resolved.d]
        result = sweep(base, p_values, d_values, threads=args.threads)
        write_sweep_csv(result, out_dir / "sweep.csv")
        payload = {"config": resolved.echo, "sweep": result.to_dict()["table"],
                   "cells": {}}
        all_failed = True
        for (p, d), report in result.cells.items():
            write_trace_csv(report, out_dir / f"trace_p{p:g}_d{d}.csv")
            write_error_trace_svg(out_dir / _cell_svg_name(p, d),
                                  _median_series(report),
                                  f"p={p:g}, d={d} (median of "
                                  f"{report.summary['per_estimator'][list(report.summary['per_estimator'])[0]]['trials']} trials)")
            payload["cells"][f"p={p:g},d={d}"] = report.summary
            failed = sum(s["failed_fits"]
                         for s in report.summary["per_estimator"].values())
            warnings += failed
            for s in report.summary["per_estimator"].values():
                if s["median_final_error"] is not None:
                    all_failed = False
        write_report_json(payload, out_dir / "report.json")
        if all_failed:
            print("error: every cell failed", file=sys.stderr)
            return EXIT_RUNTIME
    else:
        report = run_experiment(base, threads=args.threads)
        write_trace_csv(report, out_dir / "trace.csv")
        write_error_trace_svg(
            out_dir / _cell_svg_name(resolved.model.p, resolved.d),
            _median_series(report),
            f"p={resolved.model.p:g}, d={resolved.d} "
            f"(median of {base.trials} trials)")
        write_report_json({"config": resolved.echo,
                           "report": report.to_dict()},
                          out_dir / "report.json")
        warnings += sum(s["failed_fits"]
                        for s in report.summary["per_estimator"].values())
        if all(s["median_final_error"] is None
               for s in report.summary["per_estimator"].values()):
            print("error: every fit failed", file=sys.stderr)
            return EXIT_RUNTIME
    if warnings:
        print(f"completed with {warnings} failed fits (see report.json)")
    else:
        print("completed")
    return EXIT_OK


def cmd_certify(args) -> int:
    resolved = _apply_seed(load_config(args.config), args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir, "certify", resolved,
                    extra={"trajectory": str(args.trajectory)})
    traj = read_trajectory_csv(args.trajectory)
    if args.sampled is not None:
        report = certify(traj, mode="sampled", n_samples=args.sampled,
                         seed=resolved.master_seed)
    elif traj.d > 3:
        print(f"error: d={traj.d} > 3 needs --sampled N; the exact sphere "
              f"net is capped by the covering bound (1 + 2/eps)^d <= 1e7",
              file=sys.stderr)
        return EXIT_USAGE
    else:
        report = certify(traj, epsilon=resolved.epsilon)
    write_report_json(report.to_dict(), out_dir / "certificate.json")
    print(f"certified={report.certified} margin={report.margin:.6g} "
          f"mode={report.mode}")
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "experiment": cmd_experiment,
    "certify": cmd_certify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.subcommand](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NetBudgetError, ExactModeUnavailableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InsufficientExcitationError, LadSolveError, DivergenceError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Monte-Carlo harness: error traces over growing sample sizes, recovery
times, and sweeps over attack probability and dimension.

Each trial is an independent work unit seeded by
``SeedSequence((master_seed, trial_index))``; identical configs produce
bit-identical reports whatever the thread count, and sweep cells share
trial seeds so cross-cell comparisons ride on common random numbers.
Recovery is persistent by construction: the recovery time is the first
checkpoint from which the error stays below the threshold through the last
checkpoint, so a single dip never counts.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .certificate import certify
from .disturbances import DisturbanceModel
from .dynamics import (AttackStats, SystemSpec, attack_stats,
                       derive_trial_seed, random_system, simulate)
from .estimators import (ALL_METHODS, METHOD_L1NORM, METHOD_L2NORM,
                         METHOD_OLS, InsufficientExcitationError,
                         LadSolveError, fit_l1, fit_l2norm, fit_ols)
from .linalg import frobenius_distance

DEFAULT_CHECKPOINTS = (125, 250, 500, 1000, 2000, 4000)

_FITTERS = {
    METHOD_OLS: lambda traj: fit_ols(traj),
    METHOD_L2NORM: lambda traj: fit_l2norm(traj),
    METHOD_L1NORM: lambda traj: fit_l1(traj),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment cell."""

    d: int
    target_norm: Optional[float]
    model: DisturbanceModel
    t_checkpoints: tuple = DEFAULT_CHECKPOINTS
    trials: int = 10
    recovery_tol: float = 1e-6
    confidence_delta: float = 0.1
    master_seed: int = 0
    estimators: tuple = ALL_METHODS
    system: Optional[SystemSpec] = None  # fixed system; else random per trial

    def __post_init__(self):
        cps = tuple(int(t) for t in self.t_checkpoints)
        if not cps or any(b <= a for a, b in zip(cps, cps[1:])):
            raise ValueError("t_checkpoints must be a strictly increasing sequence")
        object.__setattr__(self, "t_checkpoints", cps)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.recovery_tol <= 0.0:
            raise ValueError("recovery_tol must be positive")
        if not 0.0 < self.confidence_delta <= 1.0:
            raise ValueError("confidence_delta must lie in (0, 1]")
        est = tuple(self.estimators)
        if not est:
            raise ValueError("estimators must not be empty")
        for name in est:
            if name not in ALL_METHODS:
                raise ValueError(f"unknown estimator {name!r}")
        object.__setattr__(self, "estimators", est)
        if self.system is not None:
            if self.system.d != self.d:
                raise ValueError("explicit system dimension disagrees with d")
        elif self.target_norm is None or not 0.0 < self.target_norm < 1.0:
            raise ValueError("target_norm must be in (0, 1) for random systems")

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "target_norm": self.target_norm,
            "model": model_to_dict(self.model),
            "t_checkpoints": list(self.t_checkpoints),
            "trials": self.trials,
            "recovery_tol": self.recovery_tol,
            "confidence_delta": self.confidence_delta,
            "master_seed": self.master_seed,
            "estimators": list(self.estimators),
            "system": None if self.system is None else {
                "a_star": self.system.a_star.tolist(),
                "x0": self.system.x0.tolist(),
            },
        }


def model_to_dict(model: DisturbanceModel) -> dict:
    return {
        "kind": model.kind,
        "p": model.p,
        "declared_sigma_w": model.declared_sigma_w,
        "declared_lambda": model.declared_lambda,
        "beta_bound": model.beta_bound,
        "params": dict(model.params),
        "rule": None if model.rule is None else getattr(
            model.rule, "__name__", "custom"),
        "dim": model.dim,
    }


@dataclass
class TrialResult:
    """Per-trial error traces and outcomes for each estimator."""

    trial: int
    traces: dict            # estimator -> list of (T, error or None)
    failures: dict          # estimator -> list of (T, message)
    recovery: dict          # estimator -> checkpoint or None
    attack: AttackStats
    certificate: Optional[dict]
    l1_non_unique: Optional[bool]

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "estimators": {
                name: {
                    "trace": [[t, err] for t, err in self.traces[name]],
                    "recovery_time": self.recovery[name],
                    "failures": [[t, msg] for t, msg in self.failures[name]],
                }
                for name in self.traces
            },
            "attack_stats": {"K_T_size": self.attack.k_t_size,
                             "N_T": self.attack.n_t},
            "certificate": self.certificate,
            "l1_non_unique": self.l1_non_unique,
        }


@dataclass
class RecoveryReport:
    config: dict
    trials: list
    summary: dict

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "trials": [t.to_dict() for t in self.trials],
            "summary": self.summary,
        }


def recovery_time(trace, recovery_tol: float) -> Optional[int]:
    """First checkpoint from which the error stays below the threshold
    through the end of the trace; None when it never does."""
    if not trace:
        raise ValueError("empty trace")
    rec = None
    for t, err in reversed(trace):
        if err is not None and err < recovery_tol:
            rec = t
        else:
            break
    return rec


def error_trace(config: ExperimentConfig, trial_index: int) -> TrialResult:
    """Run one trial: simulate once to the last checkpoint, then fit every
    selected estimator on each checkpoint prefix of the same trajectory."""
    ss = derive_trial_seed(config.master_seed, trial_index)
    system_seed, traj_seed = ss.spawn(2)
    spec = config.system if config.system is not None else random_system(
        config.d, config.target_norm, system_seed)
    traj = simulate(spec, config.model, max(config.t_checkpoints), traj_seed)

    traces = {name: [] for name in config.estimators}
    failures = {name: [] for name in config.estimators}
    l1_non_unique = None
    for t_cp in config.t_checkpoints:
        pre = traj.prefix(t_cp)
        for name in config.estimators:
            try:
                result = _FITTERS[name](pre)
            except (InsufficientExcitationError, LadSolveError) as exc:
                failures[name].append((t_cp, str(exc)))
                traces[name].append((t_cp, None))
                continue
            err = frobenius_distance(result.a_hat, spec.a_star)
            traces[name].append((t_cp, err))
            if name == METHOD_L1NORM and t_cp == config.t_checkpoints[-1]:
                l1_non_unique = result.non_unique

    recovery = {name: recovery_time(traces[name], config.recovery_tol)
                for name in config.estimators}
    cert = certify(traj).to_dict() if spec.d <= 3 else None
    return TrialResult(
        trial=trial_index, traces=traces, failures=failures,
        recovery=recovery, attack=attack_stats(traj), certificate=cert,
        l1_non_unique=l1_non_unique,
    )


def _trial_worker(args):
    config, index = args
    return error_trace(config, index)


def _quantiles(values: list) -> dict:
    """Summaries over recovery times with non-recovery counted as infinite;
    infinite quantiles serialize as None so failures are never averaged
    away silently."""
    padded = [v if v is not None else math.inf for v in values]
    out = {}
    with np.errstate(invalid="ignore"):  # all-inf cells interpolate to nan
        for key, q in (("q25", 0.25), ("median", 0.5), ("q75", 0.75)):
            val = float(np.quantile(padded, q))
            out[key] = val if math.isfinite(val) else None
    return out


def summarize_trials(trials: list, config: ExperimentConfig) -> dict:
    per_estimator = {}
    for name in config.estimators:
        recs = [t.recovery[name] for t in trials]
        finals = [t.traces[name][-1][1] for t in trials]
        ok_finals = [e for e in finals if e is not None]
        quart = _quantiles(recs)
        per_estimator[name] = {
            "recovered_trials": sum(r is not None for r in recs),
            "trials": len(trials),
            "recovery_rate": sum(r is not None for r in recs) / len(trials),
            "median_recovery_time": quart["median"],
            "recovery_iqr": [quart["q25"], quart["q75"]],
            "median_final_error": (float(np.median(ok_finals))
                                   if ok_finals else None),
            "failed_fits": sum(len(t.failures[name]) for t in trials),
        }
    return {
        "per_estimator": per_estimator,
        "confidence_delta": config.confidence_delta,
        "certified_trials": sum(
            1 for t in trials
            if t.certificate is not None and t.certificate["certified"]),
    }


def run_experiment(config: ExperimentConfig, threads: int = 1) -> RecoveryReport:
    """Run all trials of one cell; trials are independent and may execute
    in parallel processes, merged deterministically by trial index."""
    jobs = [(config, i) for i in range(config.trials)]
    if threads > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            trials = list(pool.map(_trial_worker, jobs))
    else:
        trials = [error_trace(config, i) for i in range(config.trials)]
    trials.sort(key=lambda t: t.trial)
    return RecoveryReport(
        config=config.to_dict(), trials=trials,
        summary=summarize_trials(trials, config),
    )


@dataclass
class SweepResult:
    """Reports per (p, d) cell plus a flat median-recovery table."""

    cells: dict             # (p, d) -> RecoveryReport
    table: list             # rows: {p, d, estimator, median_recovery_time, ...}

    def to_dict(self) -> dict:
        return {
            "cells": {f"p={p:g},d={d}": rep.to_dict()
                      for (p, d), rep in self.cells.items()},
            "table": self.table,
        }


def sweep(base_config: ExperimentConfig, p_values, d_values,
          threads: int = 1) -> SweepResult:
    """Grid of experiments over attack probability and dimension.

    Cells where the l1 estimator never recovers are marked in the table
    rather than dropped.
    """
    p_values = list(p_values)
    d_values = list(d_values)
    if not p_values or not d_values:
        raise ValueError("sweep grids must be nonempty")
    cells = {}
    table = []
    for p in p_values:
        for d in d_values:
            cfg = replace(base_config, d=d, model=base_config.model.with_p(p),
                          system=None)
            report = run_experiment(cfg, threads=threads)
            cells[(p, d)] = report
            for name in cfg.estimators:
                s = report.summary["per_estimator"][name]
                table.append({
                    "p": p, "d": d, "estimator": name,
                    "median_recovery_time": s["median_recovery_time"],
                    "recovery_iqr": s["recovery_iqr"],
                    "recovery_rate": s["recovery_rate"],
                    "never_recovered": s["recovered_trials"] == 0,
                })
    return SweepResult(cells=cells, table=table)


def write_trace_csv(report: RecoveryReport, path) -> None:
    """Flat per-trial error curves: trial, estimator, T, frobenius_error."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "estimator", "T", "frobenius_error"])
        for trial in report.trials:
            for name, trace in trial.traces.items():
                for t, err in trace:
                    writer.writerow([trial.trial, name, t,
                                     "" if err is None else repr(err)])


def write_sweep_csv(result: SweepResult, path) -> None:
    """Per-trial recovery times across the grid: p, d, estimator, trial,
    recovery_time (blank when the trial never recovered)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "d", "estimator", "trial", "recovery_time"])
        for (p, d), report in result.cells.items():
            for trial in report.trials:
                for name, rec in trial.recovery.items():
                    writer.writerow([f"{p:g}", d, name, trial.trial,
                                     "" if rec is None else rec])


def write_report_json(payload: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")

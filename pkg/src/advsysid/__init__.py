"""Desk-scale lab for linear system identification under adversarial
noncentral disturbances: simulation, robust estimation, recovery
certificates, and a Monte-Carlo experiment harness."""

from .certificate import (CertificateReport, ExactModeUnavailableError,
                          NetBudgetError, NetSpec, build_net, certify, z_sum)
from .disturbances import (DisturbanceModel, SymmetryAudit, example1_model,
                           example2_model, iid_gaussian_model,
                           nondegeneracy_probe, remark1_model, sample,
                           scripted_model, sign_pos, symmetry_audit,
                           zero_model)
from .dynamics import (AttackStats, DivergenceError, SystemSpec, Trajectory,
                       attack_stats, derive_trial_seed, random_system,
                       read_trajectory_csv, simulate, write_trajectory_csv)
from .estimators import (ALL_METHODS, METHOD_L1NORM, METHOD_L2NORM,
                         METHOD_OLS, EstimatorResult,
                         InsufficientExcitationError, LadRowResult,
                         LadSolveError, fit_l1, fit_l2norm, fit_ols, lad_row)
from .experiments import (ExperimentConfig, RecoveryReport, SweepResult,
                          TrialResult, error_trace, recovery_time,
                          run_experiment, sweep, write_sweep_csv,
                          write_trace_csv)
from .linalg import (DegenerateGramError, frobenius_distance, min_eig_sym,
                     solve_spd, spectral_norm)

__version__ = "0.1.0"

__all__ = [
    "AttackStats", "CertificateReport", "DegenerateGramError",
    "DisturbanceModel", "DivergenceError", "EstimatorResult",
    "ExactModeUnavailableError", "ExperimentConfig",
    "InsufficientExcitationError", "LadRowResult", "LadSolveError",
    "NetBudgetError", "NetSpec", "RecoveryReport", "SweepResult",
    "SymmetryAudit", "SystemSpec", "Trajectory", "TrialResult",
    "ALL_METHODS", "METHOD_L1NORM", "METHOD_L2NORM", "METHOD_OLS",
    "attack_stats", "build_net", "certify", "derive_trial_seed",
    "error_trace", "example1_model", "example2_model", "fit_l1",
    "fit_l2norm", "fit_ols", "frobenius_distance", "iid_gaussian_model",
    "lad_row", "min_eig_sym", "nondegeneracy_probe", "random_system",
    "read_trajectory_csv", "recovery_time", "remark1_model",
    "run_experiment", "sample", "scripted_model", "sign_pos", "simulate",
    "solve_spd", "spectral_norm", "sweep", "symmetry_audit",
    "write_sweep_csv", "write_trace_csv", "write_trajectory_csv",
    "zero_model",
]

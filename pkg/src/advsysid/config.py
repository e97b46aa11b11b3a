"""Experiment configuration: a single TOML file with nested tables.

Presets bundle the built-in scenario parameters ("example1", "example2",
"remark1", "gaussian"); any key given in the file overrides the preset.
Validation reports the offending field by dotted path.

Schema::

    preset = "example1"            # optional
    [system]
    d = 10
    target_norm = 0.6              # or an explicit system:
    # a_star = [[0.5]]
    # x0 = [0.5]
    [model]
    kind = "sign_restricted"       # zero | iid_gaussian | sign_restricted
                                   # | arbitrary_noncentral | remark1
    p = 0.7
    # kind-specific numeric fields, see _build_model
    [experiment]
    t_checkpoints = [125, 250, 500, 1000, 2000, 4000]
    trials = 10
    recovery_tol = 1e-6
    confidence_delta = 0.1
    estimators = ["ols", "l2norm", "l1norm"]
    p_values = [0.7, 0.75, 0.8]    # optional sweep grids
    d_values = [10, 20]
    [run]
    master_seed = 42
    T = 4000                       # horizon for `simulate`
    epsilon = 0.05                 # optional fixed certificate epsilon
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .disturbances import (KIND_ARBITRARY_NONCENTRAL, KIND_IID_GAUSSIAN,
                           KIND_SIGN_RESTRICTED, DisturbanceModel,
                           iid_gaussian_model, remark1_model, zero_model)
from .dynamics import SystemSpec
from .estimators import ALL_METHODS
from .experiments import DEFAULT_CHECKPOINTS, ExperimentConfig

_PSI2_BOUNDED = 1.0 / math.sqrt(math.log(2.0))


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""

    def __init__(self, fieldpath: str, message: str):
        super().__init__(f"{fieldpath}: {message}")
        self.fieldpath = fieldpath


PRESETS: dict[str, dict] = {
    "example1": {
        "system": {"d": 10, "target_norm": 0.6},
        "model": {"kind": "sign_restricted", "p": 0.7},
        "experiment": {"t_checkpoints": list(DEFAULT_CHECKPOINTS)},
        "run": {"T": 4000},
    },
    "example2": {
        "system": {"d": 10, "target_norm": 0.95},
        "model": {"kind": "arbitrary_noncentral", "p": 0.45},
        "experiment": {
            "t_checkpoints": [250, 500, 1000, 2000, 4000, 8000]},
        "run": {"T": 8000},
    },
    "remark1": {
        "system": {"a_star": [[0.5]], "x0": [0.5]},
        "model": {"kind": "remark1"},
        "experiment": {"t_checkpoints": [125, 250, 500]},
        "run": {"T": 500},
    },
    "gaussian": {
        "system": {"d": 10, "target_norm": 0.6},
        "model": {"kind": "iid_gaussian", "p": 1.0, "mean": 0.0, "std": 1.0},
        "experiment": {"t_checkpoints": list(DEFAULT_CHECKPOINTS)},
        "run": {"T": 4000},
    },
}


@dataclass
class ResolvedConfig:
    """A parsed, validated configuration plus its plain-dict echo."""

    preset: Optional[str]
    d: int
    target_norm: Optional[float]
    system: Optional[SystemSpec]
    model: DisturbanceModel
    experiment: ExperimentConfig
    master_seed: int
    sim_horizon: int
    epsilon: Optional[float]
    p_values: Optional[list]
    d_values: Optional[list]
    echo: dict


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _require(section: dict, fieldpath: str, key: str, types):
    if key not in section:
        raise ConfigError(f"{fieldpath}.{key}", "missing required field")
    value = section[key]
    if not isinstance(value, types):
        raise ConfigError(f"{fieldpath}.{key}",
                          f"expected {types}, got {type(value).__name__}")
    return value


def _number(section: dict, fieldpath: str, key: str, default=None):
    if key not in section:
        if default is None:
            raise ConfigError(f"{fieldpath}.{key}", "missing required field")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{fieldpath}.{key}", "expected a number")
    return float(value)


def _build_model(section: dict, d: Optional[int]) -> DisturbanceModel:
    kind = _require(section, "model", "kind", str)
    if kind == "zero":
        return zero_model()
    if kind == "remark1":
        if d is not None and d != 1:
            raise ConfigError("model.kind", "remark1 requires a scalar system")
        return remark1_model()
    p = _number(section, "model", "p")
    if not 0.0 <= p <= 1.0:
        raise ConfigError("model.p", f"attack probability must be in [0, 1], got {p}")
    if kind == KIND_IID_GAUSSIAN:
        std = _number(section, "model", "std", 1.0)
        if std <= 0:
            raise ConfigError("model.std", "must be positive")
        return iid_gaussian_model(p, mean=_number(section, "model", "mean", 0.0),
                                  std=std)
    if kind == KIND_SIGN_RESTRICTED:
        params = {
            "neg_low": _number(section, "model", "neg_low", -3.0),
            "neg_high": _number(section, "model", "neg_high", -1.0),
            "pos_low": _number(section, "model", "pos_low", 10.0),
            "pos_high": _number(section, "model", "pos_high", 20.0),
            "neg_prob": _number(section, "model", "neg_prob", 0.5),
            "shared_gamma": bool(section.get("shared_gamma", False)),
        }
        if not params["neg_low"] <= params["neg_high"] < 0.0:
            raise ConfigError("model.neg_low",
                              "negative amplitude interval must satisfy "
                              "neg_low <= neg_high < 0")
        if not 0.0 < params["pos_low"] <= params["pos_high"]:
            raise ConfigError("model.pos_low",
                              "positive amplitude interval must satisfy "
                              "0 < pos_low <= pos_high")
        if not 0.0 <= params["neg_prob"] <= 1.0:
            raise ConfigError("model.neg_prob", "must be in [0, 1]")
        if not 0.0 < p < 1.0:
            raise ConfigError("model.p",
                              "sign-restricted models need p in (0, 1)")
        bound = max(abs(params["neg_low"]), params["pos_high"])
        return DisturbanceModel(
            kind=KIND_SIGN_RESTRICTED, p=p,
            declared_sigma_w=bound * _PSI2_BOUNDED, declared_lambda=1.0,
            beta_bound=bound, params=params,
        )
    if kind == KIND_ARBITRARY_NONCENTRAL:
        variance = _number(section, "model", "variance", 5.0)
        if variance <= 0:
            raise ConfigError("model.variance", "must be positive")
        scale = _number(section, "model", "mean_scale", 100.0)
        offset = _number(section, "model", "mean_offset", 2.0)
        if not 0.0 < p < 1.0:
            raise ConfigError("model.p",
                              "arbitrary-noncentral models need p in (0, 1)")
        return DisturbanceModel(
            kind=KIND_ARBITRARY_NONCENTRAL, p=p,
            declared_sigma_w=(abs(scale) * (1 + abs(offset))) * _PSI2_BOUNDED
            + math.sqrt(variance),
            declared_lambda=math.sqrt(variance),
            params={"mean_scale": scale, "mean_offset": offset,
                    "variance": variance},
        )
    raise ConfigError("model.kind",
                      f"unknown kind {kind!r}; expected one of zero, "
                      f"iid_gaussian, sign_restricted, arbitrary_noncentral, "
                      f"remark1")


def _build_system(section: dict) -> tuple[int, Optional[float], Optional[SystemSpec]]:
    if "a_star" in section:
        a_star = np.asarray(_require(section, "system", "a_star", list),
                            dtype=float)
        x0 = np.asarray(_require(section, "system", "x0", list), dtype=float)
        if a_star.ndim != 2 or a_star.shape[0] != a_star.shape[1]:
            raise ConfigError("system.a_star", "must be a square matrix")
        d = int(a_star.shape[0])
        try:
            return d, None, SystemSpec(d=d, a_star=a_star, x0=x0)
        except ValueError as exc:
            raise ConfigError("system", str(exc)) from exc
    d = _require(section, "system", "d", int)
    if isinstance(d, bool) or d < 1:
        raise ConfigError("system.d", "must be a positive integer")
    target_norm = _number(section, "system", "target_norm")
    if not 0.0 < target_norm < 1.0:
        raise ConfigError("system.target_norm",
                          f"must be in (0, 1), got {target_norm:g}")
    return d, target_norm, None


def _grid(section: dict, key: str) -> Optional[list]:
    if key not in section:
        return None
    values = section[key]
    if not isinstance(values, list) or not values:
        raise ConfigError(f"experiment.{key}", "expected a nonempty list")
    return values


def resolve_config(data: dict) -> ResolvedConfig:
    """Validate a parsed config dict and build the runtime objects."""
    preset = data.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError("preset",
                              f"unknown preset {preset!r}; available: "
                              f"{', '.join(sorted(PRESETS))}")
        data = _merge(PRESETS[preset], data)
    for key in data:
        if key not in ("preset", "system", "model", "experiment", "run"):
            raise ConfigError(key, "unknown top-level section")

    system_section = data.get("system")
    if not isinstance(system_section, dict):
        raise ConfigError("system", "missing [system] table")
    d, target_norm, system = _build_system(system_section)

    model_section = data.get("model")
    if not isinstance(model_section, dict):
        raise ConfigError("model", "missing [model] table")
    model = _build_model(model_section, d)

    exp = data.get("experiment", {})
    if not isinstance(exp, dict):
        raise ConfigError("experiment", "expected a table")
    estimators = exp.get("estimators", list(ALL_METHODS))
    if not isinstance(estimators, list):
        raise ConfigError("experiment.estimators", "expected a list")
    estimators = [str(e).lower() for e in estimators]
    for name in estimators:
        if name not in ALL_METHODS:
            raise ConfigError("experiment.estimators",
                              f"unknown estimator {name!r}")
    if not estimators:
        raise ConfigError("experiment.estimators", "must not be empty")

    run = data.get("run", {})
    if not isinstance(run, dict):
        raise ConfigError("run", "expected a table")
    master_seed = run.get("master_seed", 0)
    if isinstance(master_seed, bool) or not isinstance(master_seed, int):
        raise ConfigError("run.master_seed", "expected an integer")
    horizon = run.get("T", max(exp.get("t_checkpoints", DEFAULT_CHECKPOINTS)))
    if isinstance(horizon, bool) or not isinstance(horizon, int) or horizon < 1:
        raise ConfigError("run.T", "expected a positive integer")
    epsilon = run.get("epsilon")
    if epsilon is not None:
        epsilon = _number(run, "run", "epsilon")
        if epsilon <= 0:
            raise ConfigError("run.epsilon", "must be positive")

    try:
        experiment = ExperimentConfig(
            d=d, target_norm=target_norm, model=model,
            t_checkpoints=tuple(exp.get("t_checkpoints", DEFAULT_CHECKPOINTS)),
            trials=int(exp.get("trials", 10)),
            recovery_tol=float(exp.get("recovery_tol", 1e-6)),
            confidence_delta=float(exp.get("confidence_delta", 0.1)),
            master_seed=master_seed,
            estimators=tuple(estimators),
            system=system,
        )
    except ValueError as exc:
        raise ConfigError("experiment", str(exc)) from exc

    echo = _merge({}, data)
    echo.setdefault("run", {})
    echo["run"]["master_seed"] = master_seed
    echo["run"]["T"] = horizon
    return ResolvedConfig(
        preset=preset, d=d, target_norm=target_norm, system=system,
        model=model, experiment=experiment, master_seed=master_seed,
        sim_horizon=horizon, epsilon=epsilon,
        p_values=_grid(exp, "p_values"), d_values=_grid(exp, "d_values"),
        echo=echo,
    )


def load_config(path) -> ResolvedConfig:
    """Parse and validate a TOML config file."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"invalid TOML in {path}: {exc}") from None
    return resolve_config(data)

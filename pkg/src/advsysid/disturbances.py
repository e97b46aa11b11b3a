"""Adversarial disturbance models and the audits that probe their claims.

Each model is an immutable tagged record: an attack-probability p, declared
sub-Gaussian / non-degeneracy metadata, and kind-specific numeric fields.
Sampling draws one Bernoulli(p) per step for the whole vector (an attack
zeroes or fires every coordinate together), then the kind-specific attack
distribution conditioned on the current state.

Sign convention: sgn(0) := +1 everywhere. States hit exact zero only on a
measure-zero event under the continuous models, but the convention must be
fixed for determinism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .linalg import min_eig_sym

KIND_ZERO = "zero"
KIND_IID_GAUSSIAN = "iid_gaussian"
KIND_SIGN_RESTRICTED = "sign_restricted"
KIND_ARBITRARY_NONCENTRAL = "arbitrary_noncentral"
KIND_SCRIPTED = "scripted"

_KINDS = (KIND_ZERO, KIND_IID_GAUSSIAN, KIND_SIGN_RESTRICTED,
          KIND_ARBITRARY_NONCENTRAL, KIND_SCRIPTED)

# psi_2 norm of a bounded variable |w| <= B is at most B / sqrt(ln 2).
_PSI2_BOUNDED = 1.0 / math.sqrt(math.log(2.0))


def sign_pos(z: np.ndarray) -> np.ndarray:
    """Sign with sgn(0) := +1."""
    return np.where(np.asarray(z) >= 0.0, 1.0, -1.0)


@dataclass(frozen=True)
class DisturbanceModel:
    """A stochastic attack policy plus the parameters it declares.

    ``declared_sigma_w`` and ``declared_lambda`` are assertions by the
    model, not guarantees; :func:`symmetry_audit` and
    :func:`nondegeneracy_probe` check them empirically. ``beta_bound`` is
    the amplifier cap B of sign-restricted models (0 when not applicable).
    """

    kind: str
    p: float
    declared_sigma_w: float
    declared_lambda: float = 0.0
    beta_bound: float = 0.0
    params: dict = field(default_factory=dict)
    rule: Optional[Callable] = None
    dim: Optional[int] = None  # required state dimension, None = any

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"attack probability must be in [0, 1], got {self.p}")
        if self.declared_sigma_w <= 0.0:
            raise ValueError("declared_sigma_w must be positive")
        if self.kind == KIND_ZERO and self.p != 0.0:
            raise ValueError("zero model must have p = 0")
        if self.kind == KIND_SIGN_RESTRICTED and self.beta_bound <= 0.0:
            raise ValueError("sign-restricted models need a positive beta_bound")
        if self.kind == KIND_SCRIPTED and self.rule is None:
            raise ValueError("scripted models need a rule")

    def with_p(self, p: float) -> "DisturbanceModel":
        return replace(self, p=p)


def zero_model() -> DisturbanceModel:
    """Never attacks; the trajectory is the noise-free rollout."""
    return DisturbanceModel(kind=KIND_ZERO, p=0.0, declared_sigma_w=_PSI2_BOUNDED)


def iid_gaussian_model(p: float, mean: float = 0.0, std: float = 1.0) -> DisturbanceModel:
    """Coordinate-wise i.i.d. Gaussian attacks, state-independent."""
    if std <= 0.0:
        raise ValueError("std must be positive")
    sigma_w = math.sqrt(mean * mean + std * std) * _PSI2_BOUNDED + std
    return DisturbanceModel(
        kind=KIND_IID_GAUSSIAN, p=p, declared_sigma_w=sigma_w,
        declared_lambda=std, params={"mean": float(mean), "std": float(std)},
    )


def example1_model(p: float, shared_gamma: bool = False) -> DisturbanceModel:
    """Sign-restricted adversary: per coordinate w^i = -sgn(x^i) * gamma with
    gamma ~ Uniform[-3,-1] or Uniform[10,20], each with probability 0.5.

    Noncentral (conditional mean -sgn(x^i) * 6.5) yet sign-symmetric: the
    sign of gamma is a fair coin, so w^i is positive or negative with equal
    conditional probability. ``shared_gamma`` draws one gamma per step
    instead of one per coordinate.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"example 1 needs p in (0, 1), got {p}")
    return DisturbanceModel(
        kind=KIND_SIGN_RESTRICTED, p=p,
        declared_sigma_w=20.0 * _PSI2_BOUNDED, declared_lambda=1.0,
        beta_bound=20.0,
        params={"neg_low": -3.0, "neg_high": -1.0, "pos_low": 10.0,
                "pos_high": 20.0, "neg_prob": 0.5,
                "shared_gamma": bool(shared_gamma)},
    )


def example2_model(p: float) -> DisturbanceModel:
    """Arbitrary noncentral adversary: per coordinate Gaussian with mean
    100 * (sgn(x^i) + 2) and variance 5.

    Almost always positive, built to drag estimators toward a positive
    bias; deliberately fails the sign-symmetry audit.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"example 2 needs p in (0, 1), got {p}")
    variance = 5.0
    return DisturbanceModel(
        kind=KIND_ARBITRARY_NONCENTRAL, p=p,
        declared_sigma_w=300.0 * _PSI2_BOUNDED + math.sqrt(variance),
        declared_lambda=math.sqrt(variance),
        params={"mean_scale": 100.0, "mean_offset": 2.0, "variance": variance},
    )


def _remark1_rule(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return -sign_pos(x)


def remark1_model() -> DisturbanceModel:
    """Deterministic scalar deception: attacks every step with w = -sgn(x).

    Only valid for d = 1. No symmetric estimator can recover the true
    coefficient under this adversary; it is the built-in negative control.
    """
    return DisturbanceModel(
        kind=KIND_SCRIPTED, p=1.0, declared_sigma_w=_PSI2_BOUNDED,
        declared_lambda=0.0, rule=_remark1_rule, dim=1,
    )


def scripted_model(rule: Callable, p: float, declared_sigma_w: float,
                   declared_lambda: float = 0.0,
                   dim: Optional[int] = None) -> DisturbanceModel:
    """Arbitrary user-supplied adversary: ``rule(x, rng) -> w`` draws one
    attack vector conditioned on the current state. Audits still apply."""
    return DisturbanceModel(
        kind=KIND_SCRIPTED, p=p, declared_sigma_w=declared_sigma_w,
        declared_lambda=declared_lambda, rule=rule, dim=dim,
    )


def _check_state(model: DisturbanceModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("state must be a 1-d vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("state contains non-finite entries")
    if model.dim is not None and x.shape[0] != model.dim:
        raise ValueError(
            f"model requires dimension {model.dim}, got state of dimension {x.shape[0]}"
        )
    return x


def _attack_values(model: DisturbanceModel, x: np.ndarray, n: int,
                   rng: np.random.Generator) -> np.ndarray:
    """n draws from the attack distribution conditioned on state x; (n, d)."""
    d = x.shape[0]
    if model.kind == KIND_ZERO:
        return np.zeros((n, d))
    if model.kind == KIND_IID_GAUSSIAN:
        pr = model.params
        return pr["mean"] + pr["std"] * rng.standard_normal((n, d))
    if model.kind == KIND_SIGN_RESTRICTED:
        pr = model.params
        shape = (n, 1) if pr["shared_gamma"] else (n, d)
        pick_neg = rng.random(shape) < pr["neg_prob"]
        u = rng.random(shape)
        gamma = np.where(pick_neg,
                         pr["neg_low"] + u * (pr["neg_high"] - pr["neg_low"]),
                         pr["pos_low"] + u * (pr["pos_high"] - pr["pos_low"]))
        return -sign_pos(x)[None, :] * gamma
    if model.kind == KIND_ARBITRARY_NONCENTRAL:
        pr = model.params
        mean = pr["mean_scale"] * (sign_pos(x) + pr["mean_offset"])
        return mean[None, :] + math.sqrt(pr["variance"]) * rng.standard_normal((n, d))
    # scripted: one rule call per draw
    out = np.empty((n, d))
    for k in range(n):
        w = np.asarray(model.rule(x, rng), dtype=float)
        if w.shape != (d,) or not np.all(np.isfinite(w)):
            raise ValueError("scripted rule returned an invalid disturbance")
        out[k] = w
    return out


def sample(model: DisturbanceModel, x: np.ndarray,
           rng: np.random.Generator) -> tuple[np.ndarray, bool]:
    """One disturbance draw at state x: the zero vector with probability
    1 - p, otherwise an attack-distribution draw (flagged as an attack even
    if the value happens to be small). Deterministic given the generator
    state."""
    x = _check_state(model, x)
    if rng.random() >= model.p:
        return np.zeros(x.shape[0]), False
    return _attack_values(model, x, 1, rng)[0], True


@dataclass(frozen=True)
class SymmetryAudit:
    """Empirical attack-conditioned sign frequencies at each probe state."""

    freq_pos: np.ndarray   # (n_states, d)
    freq_neg: np.ndarray
    freq_zero: np.ndarray
    max_deviation: float   # max over states, coordinates of |freq_pos - freq_neg|


def symmetry_audit(model: DisturbanceModel, probe_states, n: int,
                   seed) -> SymmetryAudit:
    """Check the equal-sign-probability condition empirically.

    Draws n attack-conditioned samples at each probe state and tallies the
    per-coordinate sign frequencies. A sign-symmetric model keeps
    ``max_deviation`` within binomial noise (about 3 * sqrt(0.25 / n));
    a one-sided adversary pushes it toward 1.
    """
    if n < 1000:
        raise ValueError("symmetry audit needs n >= 1000 samples")
    rng = np.random.default_rng(seed)
    probes = [np.asarray(x, dtype=float) for x in probe_states]
    fp, fn, fz = [], [], []
    for x in probes:
        _check_state(model, x)
        w = _attack_values(model, x, n, rng)
        fp.append((w > 0).mean(axis=0))
        fn.append((w < 0).mean(axis=0))
        fz.append((w == 0).mean(axis=0))
    freq_pos, freq_neg, freq_zero = np.array(fp), np.array(fn), np.array(fz)
    max_dev = float(np.abs(freq_pos - freq_neg).max()) if probes else 0.0
    return SymmetryAudit(freq_pos=freq_pos, freq_neg=freq_neg,
                         freq_zero=freq_zero, max_deviation=max_dev)


def nondegeneracy_probe(model: DisturbanceModel, probe_states, n: int,
                        seed) -> float:
    """Estimate the non-degeneracy floor lambda^2.

    For each probe state x, forms the empirical second moment of (x + w)
    over n attack-conditioned draws and takes its smallest eigenvalue;
    returns the minimum across probe states. A degenerate adversary (one
    that can pin the next state to a subspace) drives this to zero.
    """
    if n < 1000:
        raise ValueError("non-degeneracy probe needs n >= 1000 samples")
    rng = np.random.default_rng(seed)
    worst = math.inf
    for x in probe_states:
        x = _check_state(model, np.asarray(x, dtype=float))
        v = x[None, :] + _attack_values(model, x, n, rng)
        moment = v.T @ v / n
        moment = (moment + moment.T) / 2.0
        worst = min(worst, min_eig_sym(moment))
    if not math.isfinite(worst):
        raise ValueError("no probe states supplied")
    return float(worst)

"""Uniqueness certificate for the l1-norm estimator.

The certified condition: for every coordinate i, the sum over time of

    z_t^i(y) = |y . x_t|   if w_t^i = 0
               +y . x_t    if w_t^i > 0
               -y . x_t    if w_t^i < 0

is strictly positive for every unit direction y. Positivity over the whole
sphere is established from positivity on a finite epsilon-net plus a
Lipschitz margin: the map y -> sum_t z_t^i(y) is Lipschitz with constant
sum_t ||x_t||_2, so

    min over net - epsilon * sum_t ||x_t||_2 > 0

proves positivity everywhere. The certificate is one-sided: a failed
margin proves nothing about non-recovery.

Exact nets are restricted to d <= 3; the net size is exponential in d and
the sphere-covering bound (1 + 2/eps)^d is capped at 1e7. Higher
dimensions get a sampled mode that reports the same statistic over random
directions as evidence only and never certifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .dynamics import Trajectory

NET_BUDGET = 10_000_000
# Empirical covering radius of an n-point Fibonacci sphere is ~2.7/sqrt(n);
# construction uses 3.2 for slack, then verifies by sampling.
_FIB_SAFETY = 3.2
_FIB_VERIFY_SAMPLES = 60_000
_UNIT_TOL = 1e-9
# Auto-epsilon ladder: slack fraction of the measured net minimum per rung.
# The cheap rung certifies most healthy trajectories with a small net; the
# 0.01 rung leaves only 1% of the minimum as slack and is the last resort
# before giving up.
EPSILON_RUNGS = (0.2, 0.01)


class NetBudgetError(ValueError):
    """The requested net exceeds the covering-number budget."""

    def __init__(self, d: int, epsilon: float, bound: float):
        super().__init__(
            f"net too large: covering bound (1 + 2/{epsilon:g})^{d} ~ {bound:.3e} "
            f"exceeds budget {NET_BUDGET:.0e}"
        )
        self.bound = bound


class ExactModeUnavailableError(ValueError):
    """Exact certification requested beyond d = 3."""

    def __init__(self, d: int):
        super().__init__(
            f"exact certification is restricted to d <= 3 (the sphere net is "
            f"exponential in dimension); got d = {d}. Use sampled mode for "
            f"diagnostic evidence."
        )


@dataclass(frozen=True)
class NetSpec:
    """A finite subset of the unit sphere with covering radius <= epsilon."""

    d: int
    epsilon: float
    points: np.ndarray  # (n, d), unit rows


@dataclass(frozen=True)
class CertificateReport:
    """Outcome of a certification run.

    In exact mode ``certified == (margin > 0)`` with
    ``margin = min(per_coordinate_min) - epsilon * lipschitz_bound``.
    In sampled mode the minima are evidence over random directions,
    ``margin`` carries no net slack, and ``certified`` is always False.
    """

    certified: bool
    per_coordinate_min: tuple
    lipschitz_bound: float
    margin: float
    epsilon: float
    mode: str               # "exact" | "sampled"
    n_directions: int

    def to_dict(self) -> dict:
        return {
            "certified": self.certified,
            "per_coordinate_min": list(self.per_coordinate_min),
            "lipschitz_bound": self.lipschitz_bound,
            "margin": self.margin,
            "epsilon": self.epsilon,
            "mode": self.mode,
            "n_directions": self.n_directions,
        }


def z_sum(traj: Trajectory, i: int, y: np.ndarray) -> float:
    """Sum over t of the three-case statistic for coordinate i (0-based)
    along the unit direction y."""
    y = np.asarray(y, dtype=float)
    if y.shape != (traj.d,):
        raise ValueError(f"direction must have dimension {traj.d}")
    if abs(np.linalg.norm(y) - 1.0) > _UNIT_TOL:
        raise ValueError("direction must be a unit vector")
    if not 0 <= i < traj.d:
        raise ValueError(f"coordinate {i} outside 0..{traj.d - 1}")
    proj = traj.states[:-1] @ y
    w = traj.disturbances[:, i]
    z = np.where(w == 0.0, np.abs(proj), np.sign(w) * proj)
    return float(z.sum())


def direction_mins(states: np.ndarray, sign_matrix: np.ndarray,
                   points: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Per-coordinate minimum over a set of directions of the z-statistic
    sums, with sign_matrix[t, i] in {-1, 0, +1} selecting the case.

    Shared between the certificate (signs of the stored disturbances) and
    the solver's uniqueness probe (signs of the fitted residuals).
    """
    d = sign_matrix.shape[1]
    mins = np.full(d, np.inf)
    for lo in range(0, points.shape[0], chunk):
        block = points[lo:lo + chunk]
        proj = states @ block.T          # (T, c)
        abs_proj = np.abs(proj)
        for i in range(d):
            s = sign_matrix[:, i:i + 1]
            contrib = np.where(s == 0.0, abs_proj, s * proj)
            mins[i] = min(mins[i], float(contrib.sum(axis=0).min()))
    return mins


def _covering_bound_log(d: int, epsilon: float) -> float:
    return d * math.log1p(2.0 / epsilon)


def _fibonacci_sphere(n: int) -> np.ndarray:
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    theta = math.pi * (3.0 - math.sqrt(5.0)) * np.arange(n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta), z])


def build_net(d: int, epsilon: float) -> NetSpec:
    """Construct an epsilon-net of the unit sphere for d in {1, 2, 3}.

    d = 1: the two endpoints. d = 2: a uniform angular grid with spacing
    2*asin(eps/2), which bounds the chord distance to the nearest grid
    point by eps with a factor-two margin. d = 3: a Fibonacci-sphere grid
    sized from the empirical covering law and then verified by sampling
    (resized upward if the check fails). Refuses when the sphere-covering
    bound (1 + 2/eps)^d exceeds the budget.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if _covering_bound_log(d, epsilon) > math.log(NET_BUDGET):
        raise NetBudgetError(d, epsilon, math.exp(_covering_bound_log(d, epsilon)))
    if d > 3:
        raise ExactModeUnavailableError(d)
    if d == 1:
        points = np.array([[1.0], [-1.0]])
    elif d == 2:
        spacing = 2.0 * math.asin(min(epsilon, 2.0) / 2.0)
        n = max(4, int(math.ceil(2.0 * math.pi / spacing)))
        angles = 2.0 * math.pi * np.arange(n) / n
        points = np.column_stack([np.cos(angles), np.sin(angles)])
    else:
        n = max(64, int(math.ceil((_FIB_SAFETY / epsilon) ** 2)))
        rng = np.random.default_rng(0xC0FFEE)
        for _ in range(8):
            points = _fibonacci_sphere(n)
            samples = rng.standard_normal((_FIB_VERIFY_SAMPLES, 3))
            samples /= np.linalg.norm(samples, axis=1, keepdims=True)
            radius = float(cKDTree(points).query(samples, k=1)[0].max())
            if radius <= epsilon:
                break
            n = int(n * 1.5)
        else:
            raise ValueError(
                f"could not verify covering radius {epsilon:g} at d = 3"
            )
    return NetSpec(d=d, epsilon=epsilon, points=points)


def min_feasible_epsilon(d: int) -> float:
    """Smallest epsilon whose covering bound fits the budget."""
    return 2.0 / (NET_BUDGET ** (1.0 / d) - 1.0)


def _sign_matrix(traj: Trajectory) -> np.ndarray:
    return np.sign(traj.disturbances)


def certify(traj: Trajectory, epsilon: Optional[float] = None,
            mode: str = "exact", n_samples: int = 1000,
            seed: int = 0) -> CertificateReport:
    """Run the uniqueness certificate on a trajectory.

    Exact mode (d <= 3 only) evaluates the per-coordinate minima over an
    epsilon-net and certifies iff the minimum clears the Lipschitz slack
    epsilon * sum_t ||x_t||_2. When ``epsilon`` is omitted the policy is:
    probe a coarse net, set epsilon to 0.01 * (coarse min) / (Lipschitz
    bound) clamped to the net budget, and refine once if the margin fails.

    Sampled mode evaluates the same minima over ``n_samples`` random unit
    directions; it is evidence only and never certifies.
    """
    states = traj.states[:-1]
    signs = _sign_matrix(traj)
    lipschitz = float(np.linalg.norm(states, axis=1).sum())

    if mode == "sampled":
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((n_samples, traj.d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        mins = direction_mins(states, signs, dirs)
        return CertificateReport(
            certified=False, per_coordinate_min=tuple(float(v) for v in mins),
            lipschitz_bound=lipschitz, margin=float(mins.min()),
            epsilon=0.0, mode="sampled", n_directions=n_samples,
        )
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    if traj.d > 3:
        raise ExactModeUnavailableError(traj.d)

    if epsilon is not None:
        net = build_net(traj.d, epsilon)
        mins = direction_mins(states, signs, net.points)
        margin = float(mins.min() - epsilon * lipschitz)
        return CertificateReport(
            certified=margin > 0.0,
            per_coordinate_min=tuple(float(v) for v in mins),
            lipschitz_bound=lipschitz, margin=margin, epsilon=epsilon,
            mode="exact", n_directions=net.points.shape[0],
        )

    # Auto policy: coarse probe, then progressively tighter slack rungs.
    floor = min_feasible_epsilon(traj.d)
    eps = 0.2
    net = build_net(traj.d, eps)
    mins = direction_mins(states, signs, net.points)
    margin = float(mins.min() - eps * lipschitz)
    for factor in EPSILON_RUNGS:
        if margin > 0.0 or mins.min() <= 0.0:
            break  # certified, or provably hopeless (finer nets only shrink the min)
        new_eps = max(factor * float(mins.min()) / max(lipschitz, 1e-300), floor)
        if new_eps >= eps:
            break
        eps = new_eps
        net = build_net(traj.d, eps)
        mins = direction_mins(states, signs, net.points)
        margin = float(mins.min() - eps * lipschitz)
    return CertificateReport(
        certified=margin > 0.0,
        per_coordinate_min=tuple(float(v) for v in mins),
        lipschitz_bound=lipschitz, margin=margin, epsilon=eps,
        mode="exact", n_directions=net.points.shape[0],
    )

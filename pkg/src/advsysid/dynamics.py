"""Ground-truth system construction and trajectory simulation.

The state recurrence is ``x_{t+1} = A_star @ x_t + w_t`` applied stepwise;
the disturbance at step t is sampled by the disturbance model conditioned
on the realized current state. Trajectories are exactly reproducible from
their seed: trial seeds are derived counter-style from a master seed via
``numpy.random.SeedSequence((master_seed, trial_index))``, see
:func:`derive_trial_seed`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .linalg import spectral_norm

# States are aborted past this norm: a misconfigured adversarial model can
# explode the recurrence, and failing loudly beats emitting NaNs.
DIVERGENCE_LIMIT = 1e150

CSV_FLAG_TRUE = "1"
CSV_FLAG_FALSE = "0"


class DivergenceError(RuntimeError):
    """State norm exceeded :data:`DIVERGENCE_LIMIT` during simulation."""

    def __init__(self, step: int, norm: float):
        super().__init__(
            f"state norm {norm:.3e} exceeded {DIVERGENCE_LIMIT:.0e} at step {step}"
        )
        self.step = step


@dataclass(frozen=True)
class SystemSpec:
    """The ground truth being recovered: dimension, dynamics matrix, start state."""

    d: int
    a_star: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a_star, dtype=float)
        x = np.asarray(self.x0, dtype=float)
        if a.shape != (self.d, self.d):
            raise ValueError(f"a_star must be {self.d}x{self.d}, got {a.shape}")
        if x.shape != (self.d,):
            raise ValueError(f"x0 must have dimension {self.d}, got {x.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(x))):
            raise ValueError("system entries must be finite")
        norm = spectral_norm(a)
        if norm >= 1.0:
            raise ValueError(f"operator norm of a_star must be < 1, got {norm:.6f}")
        object.__setattr__(self, "a_star", a)
        object.__setattr__(self, "x0", x)


@dataclass(frozen=True)
class Trajectory:
    """States x_0..x_T plus the disturbances w_0..w_{T-1} that produced them.

    ``attack_flags[t]`` is True iff w_t was drawn from the attack
    distribution (it may still be numerically small); a False flag means
    w_t is the exact zero vector.
    """

    states: np.ndarray        # (T+1, d)
    disturbances: np.ndarray  # (T, d)
    attack_flags: np.ndarray  # (T,) bool

    def __post_init__(self):
        s = np.asarray(self.states, dtype=float)
        w = np.asarray(self.disturbances, dtype=float)
        f = np.asarray(self.attack_flags, dtype=bool)
        if s.ndim != 2 or w.ndim != 2:
            raise ValueError("states and disturbances must be 2-d arrays")
        if s.shape[0] != w.shape[0] + 1 or s.shape[1] != w.shape[1]:
            raise ValueError(
                f"inconsistent shapes: states {s.shape}, disturbances {w.shape}"
            )
        if f.shape != (w.shape[0],):
            raise ValueError("attack_flags length must equal the number of steps")
        if np.any(w[~f] != 0.0):
            raise ValueError("non-attack steps must carry exact zero disturbances")
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "disturbances", w)
        object.__setattr__(self, "attack_flags", f)

    @property
    def T(self) -> int:
        return self.disturbances.shape[0]

    @property
    def d(self) -> int:
        return self.states.shape[1]

    def prefix(self, T: int) -> "Trajectory":
        """The sub-trajectory over steps 0..T (states x_0..x_T)."""
        if not 1 <= T <= self.T:
            raise ValueError(f"prefix length {T} outside 1..{self.T}")
        return Trajectory(self.states[: T + 1], self.disturbances[:T],
                          self.attack_flags[:T])


@dataclass(frozen=True)
class AttackStats:
    """Counts from the attack-time set: size of the set itself, and the
    number of quiet steps immediately preceded by an attack."""

    k_t_size: int
    n_t: int


def derive_trial_seed(master_seed: int, trial_index: int) -> np.random.SeedSequence:
    """Counter-based per-trial seed derivation from a master seed.

    Independent streams for parallel trials; documented so external tools
    can replay individual trials.
    """
    return np.random.SeedSequence((master_seed, trial_index))


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_system(d: int, target_norm: float, seed) -> SystemSpec:
    """Random system with i.i.d. standard normal entries rescaled to the
    requested operator norm; x0 is drawn standard normal.

    Deterministic given the seed. ``target_norm`` must lie in (0, 1).
    """
    if not 0.0 < target_norm < 1.0:
        raise ValueError(f"target_norm must be in (0, 1), got {target_norm}")
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = _as_generator(seed)
    raw = rng.standard_normal((d, d))
    sigma = float(np.linalg.svd(raw, compute_uv=False)[0])
    if sigma == 0.0:
        raise ValueError("degenerate random draw with zero norm")
    a_star = raw * (target_norm / sigma)
    x0 = rng.standard_normal(d)
    return SystemSpec(d=d, a_star=a_star, x0=x0)


def simulate(spec: SystemSpec, model, T: int, seed) -> Trajectory:
    """Roll the recurrence forward for T steps under a disturbance model.

    The model is sampled at each step conditioned on the realized current
    state; identical (spec, model, T, seed) yield bit-identical output.
    """
    from .disturbances import sample  # local import to avoid a cycle

    if T < 1:
        raise ValueError("T must be >= 1")
    rng = _as_generator(seed)
    d = spec.d
    states = np.empty((T + 1, d))
    disturbances = np.empty((T, d))
    flags = np.empty(T, dtype=bool)
    states[0] = spec.x0
    x = spec.x0
    for t in range(T):
        w, is_attack = sample(model, x, rng)
        x = spec.a_star @ x + w
        norm = float(np.linalg.norm(x))
        if not np.isfinite(norm) or norm > DIVERGENCE_LIMIT:
            raise DivergenceError(t, norm)
        states[t + 1] = x
        disturbances[t] = w
        flags[t] = is_attack
    return Trajectory(states=states, disturbances=disturbances, attack_flags=flags)


def attack_stats(traj: Trajectory) -> AttackStats:
    """Count attack steps and quiet steps immediately following an attack."""
    f = traj.attack_flags
    k = int(f.sum())
    n = int(np.sum(~f[1:] & f[:-1])) if len(f) > 1 else 0
    return AttackStats(k_t_size=k, n_t=n)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Flat CSV dump: one row per step with columns t, x_1..x_d, w_1..w_d,
    attack_flag; the final row holds x_T with the disturbance cells empty.

    Floats are written with ``repr`` so the file round-trips bit-exactly.
    """
    d = traj.d
    header = (["t"] + [f"x_{i + 1}" for i in range(d)]
              + [f"w_{i + 1}" for i in range(d)] + ["attack_flag"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(traj.T):
            row = [str(t)]
            row += [repr(float(v)) for v in traj.states[t]]
            row += [repr(float(v)) for v in traj.disturbances[t]]
            row.append(CSV_FLAG_TRUE if traj.attack_flags[t] else CSV_FLAG_FALSE)
            writer.writerow(row)
        writer.writerow([str(traj.T)] + [repr(float(v)) for v in traj.states[traj.T]]
                        + [""] * d + [""])


def read_trajectory_csv(path) -> Trajectory:
    """Inverse of :func:`write_trajectory_csv`, with schema validation."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty trajectory file") from None
        rows = list(reader)
    if len(header) < 4 or len(header) % 2 != 0:
        raise ValueError(f"{path}: expected columns t, x_1..x_d, w_1..w_d, "
                         f"attack_flag; found {len(header)} columns")
    d = (len(header) - 2) // 2
    expected = ["t"] + [f"x_{i + 1}" for i in range(d)] \
        + [f"w_{i + 1}" for i in range(d)] + ["attack_flag"]
    for got, want in zip(header, expected):
        if got != want:
            raise ValueError(f"{path}: expected column {want!r}, found {got!r}")
    if len(rows) < 2:
        raise ValueError(f"{path}: trajectory needs at least one step")
    T = len(rows) - 1
    states = np.empty((T + 1, d))
    disturbances = np.empty((T, d))
    flags = np.empty(T, dtype=bool)
    for t, row in enumerate(rows):
        if len(row) != len(expected):
            raise ValueError(f"{path}: row {t} has {len(row)} cells, "
                             f"expected {len(expected)}")
        if int(row[0]) != t:
            raise ValueError(f"{path}: row {t} carries step index {row[0]}")
        states[t] = [float(v) for v in row[1:1 + d]]
        if t < T:
            disturbances[t] = [float(v) for v in row[1 + d:1 + 2 * d]]
            flags[t] = row[-1] == CSV_FLAG_TRUE
    return Trajectory(states=states, disturbances=disturbances, attack_flags=flags)

"""The three competing estimators: OLS, the non-smooth l2-norm estimator,
and the l1-norm estimator.

The l1 objective decouples across output coordinates, so the matrix fit
reduces to one least-absolute-deviations regression per row, each solved
exactly as a linear program. The solver works on the bounded-variable dual
(T variables, d equality constraints), reconstructs the primal coefficients
by interpolating the zero-residual points that the strictly-interior dual
multipliers identify, and accepts the reconstruction only if its objective
matches the dual bound (weak duality makes that an optimality
certificate). Degenerate instances fall back to the dense primal LP. Both
paths are exact simplex-class solves, not subgradient schemes: the exact
recovery claims need an exact argmin.

Uniqueness of the LAD minimizer is decidable from the solution itself: the
objective grows in direction v at rate

    D(v) = -sum_{r_t != 0} sgn(r_t) x_t . v + sum_{r_t = 0} |x_t . v|,

so the minimizer is unique iff D is strictly positive on the unit sphere.
``fit_l1`` proves this with the same net-plus-Lipschitz-margin machinery as
the certificate module (cheap for d <= 3) and falls back to an exact
cone-feasibility LP when the margin is inconclusive. A detected flat
optimal face is resolved to its lexicographically smallest vertex and
flagged ``non_unique``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from . import certificate
from .dynamics import Trajectory
from .linalg import DegenerateGramError, solve_spd

METHOD_OLS = "ols"
METHOD_L2NORM = "l2norm"
METHOD_L1NORM = "l1norm"
ALL_METHODS = (METHOD_OLS, METHOD_L2NORM, METHOD_L1NORM)

DEFAULT_LAD_TOL = 1e-9
DEFAULT_IRLS_TOL = 1e-8
_IRLS_WEIGHT_FLOOR = 1e-12
_IRLS_MAX_ITER = 500
_INTERIOR_TOL = 1e-7


class InsufficientExcitationError(RuntimeError):
    """The trajectory does not excite enough directions for the fit."""


class LadSolveError(RuntimeError):
    """The LAD linear program failed; the message names the failure."""


@dataclass
class EstimatorResult:
    """A fitted dynamics matrix with its objective value and solve metadata.

    ``non_unique`` is l1-specific and tri-state: True when a flat optimal
    face was detected (the returned matrix is its lexicographically
    smallest vertex), False when uniqueness was verified exactly, None when
    the probe was skipped.
    """

    a_hat: np.ndarray
    objective: float
    method: str
    iterations: int
    converged: bool
    tol: float
    non_unique: Optional[bool] = None

    def to_dict(self) -> dict:
        return {
            "a_hat": self.a_hat.tolist(),
            "objective": self.objective,
            "method": self.method,
            "iterations": self.iterations,
            "converged": self.converged,
            "tol": self.tol,
            "non_unique": self.non_unique,
        }


@dataclass
class LadRowResult:
    """Solution of one least-absolute-deviations row regression."""

    coeffs: np.ndarray
    objective: float
    iterations: int
    non_unique: Optional[bool] = None


def _design(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    return traj.states[:-1], traj.states[1:]


def fit_ols(traj: Trajectory) -> EstimatorResult:
    """Ordinary least squares via the normal equations.

    Closed form: A_hat = (sum x_{t+1} x_t^T)(sum x_t x_t^T)^{-1}, solved
    through the SPD Cholesky path; a singular Gram matrix is reported as
    insufficient excitation.
    """
    X, Y = _design(traj)
    T, d = X.shape
    if T < d:
        raise InsufficientExcitationError(f"need T >= d, got T={T}, d={d}")
    gram = X.T @ X
    cross = X.T @ Y
    try:
        a_hat = solve_spd(gram, cross).T
    except DegenerateGramError as exc:
        raise InsufficientExcitationError(
            f"insufficient excitation: {exc}") from exc
    resid = Y - X @ a_hat.T
    return EstimatorResult(
        a_hat=a_hat, objective=float((resid * resid).sum()),
        method=METHOD_OLS, iterations=1, converged=True, tol=1e-10,
    )


def l2norm_objective(traj: Trajectory, a: np.ndarray) -> float:
    """Sum over time of the unsquared residual l2 norms."""
    X, Y = _design(traj)
    return float(np.linalg.norm(Y - X @ a.T, axis=1).sum())


def fit_l2norm(traj: Trajectory, tol: float = DEFAULT_IRLS_TOL) -> EstimatorResult:
    """Minimize the sum of residual l2 norms by iteratively reweighted
    least squares.

    The objective is not row-decoupled, so the whole matrix is refit each
    pass with weights 1/sqrt(||r_t||^2 + eps^2), the smoothing eps decayed
    by 0.1 per stage from 1e-2 down to 1e-10 and the weights floored at
    1e-12. Converged means the true (unsmoothed) objective moved by less
    than tol*(1 + objective) at the final smoothing stage; hitting the
    500-iteration cap returns the best iterate with ``converged=False``.
    """
    X, Y = _design(traj)
    T, d = X.shape
    if T < d:
        raise InsufficientExcitationError(f"need T >= d, got T={T}, d={d}")
    a = fit_ols(traj).a_hat
    obj = l2norm_objective(traj, a)
    iterations = 0
    converged = False
    eps_ladder = [1e-2 * 0.1 ** k for k in range(9)]  # 1e-2 .. 1e-10
    for stage, eps in enumerate(eps_ladder):
        last = stage == len(eps_ladder) - 1
        # IRLS converges linearly, so meeting the stopping change exactly
        # leaves a tail gap several times larger; the last stage polishes
        # well past the declared tolerance to absorb it.
        stop = tol * (0.02 if last else 1.0)
        while iterations < _IRLS_MAX_ITER:
            resid = Y - X @ a.T
            weights = 1.0 / np.sqrt((resid * resid).sum(axis=1) + eps * eps)
            weights = np.maximum(weights, _IRLS_WEIGHT_FLOOR)
            Xw = X * weights[:, None]
            try:
                a_new = solve_spd(X.T @ Xw, Xw.T @ Y).T
            except DegenerateGramError:
                return EstimatorResult(
                    a_hat=a, objective=obj, method=METHOD_L2NORM,
                    iterations=iterations, converged=False, tol=tol,
                )
            iterations += 1
            new_obj = l2norm_objective(traj, a_new)
            if new_obj <= obj:
                a, improved = a_new, obj - new_obj
                obj = new_obj
            else:
                improved = 0.0  # smoothed step overshot the true objective
            if improved < stop * (1.0 + obj):
                converged = converged or (
                    last and improved < tol * (1.0 + obj))
                break
        if iterations >= _IRLS_MAX_ITER:
            break
    return EstimatorResult(
        a_hat=a, objective=obj, method=METHOD_L2NORM,
        iterations=iterations, converged=converged, tol=tol,
    )


def _lad_primal(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float, int]:
    T, d = X.shape
    A_eq = sp.hstack([sp.csc_matrix(X), sp.eye(T, format="csc"),
                      -sp.eye(T, format="csc")], format="csc")
    c = np.concatenate([np.zeros(d), np.ones(2 * T)])
    bounds = [(None, None)] * d + [(0, None)] * (2 * T)
    res = linprog(c, A_eq=A_eq, b_eq=y, bounds=bounds, method="highs")
    if res.status != 0:
        raise LadSolveError(f"primal LAD LP failed: {res.message}")
    return res.x[:d], float(res.fun), int(res.nit)


def lad_row(regressors, targets, tol: float = DEFAULT_LAD_TOL,
            check_unique: bool = False) -> LadRowResult:
    """Exact minimizer of sum_t |targets_t - a . regressors_t|.

    Solves the bounded dual LP and interpolates the primal solution from
    the zero-residual points; the result is accepted only when its
    objective meets the dual bound within tol (an optimality certificate by
    weak duality), otherwise the dense primal LP is solved instead. With
    ``check_unique`` the flat-face test and lexicographic tie-break run
    before returning (see :func:`resolve_row_uniqueness`).
    """
    X = np.asarray(regressors, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.ndim != 2:
        raise ValueError("regressors must be a (T, d) array")
    T, d = X.shape
    if y.shape != (T,):
        raise ValueError(f"targets must have length {T}")
    if T < d:
        raise InsufficientExcitationError(f"need T >= d, got T={T}, d={d}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("regression data must be finite")

    res = linprog(-y, A_eq=sp.csc_matrix(X.T), b_eq=np.zeros(d),
                  bounds=[(-1.0, 1.0)] * T, method="highs")
    coeffs = None
    iterations = 0
    if res.status == 0:
        iterations = int(res.nit)
        dual_obj = float(-res.fun)
        interior = np.abs(res.x) < 1.0 - _INTERIOR_TOL
        if int(interior.sum()) >= d:
            cand, *_ = np.linalg.lstsq(X[interior], y[interior], rcond=None)
            obj = float(np.abs(y - X @ cand).sum())
            if obj <= dual_obj + tol * (1.0 + obj):
                coeffs = cand
    if coeffs is None:
        coeffs, obj, nit = _lad_primal(X, y)
        iterations += nit
        obj = float(np.abs(y - X @ coeffs).sum())
    row = LadRowResult(coeffs=coeffs, objective=obj, iterations=iterations)
    if check_unique:
        resolve_row_uniqueness(X, y, row, tol)
    return row


def _residual_signs(X: np.ndarray, y: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Residual signs with near-zero residuals classified as exactly zero."""
    resid = y - X @ coeffs
    zero_tol = 1e-7 * (1.0 + float(np.abs(y).max(initial=0.0)))
    signs = np.sign(resid)
    signs[np.abs(resid) <= zero_tol] = 0.0
    return signs


def _flat_direction_exists(X: np.ndarray, signs: np.ndarray, tol: float) -> bool:
    """Exact test for a direction v != 0 with zero directional derivative.

    D(v) = c . v + sum_{active} |x_t . v| with c = -sum_{inactive}
    sgn(r_t) x_t is positively homogeneous, so it vanishes somewhere on the
    sphere iff it vanishes on a face of the unit cube: minimize D with one
    coordinate pinned to +-1, a small LP per face over the active points
    only.
    """
    T, d = X.shape
    active = signs == 0.0
    c_vec = -(signs[~active, None] * X[~active]).sum(axis=0)
    Xa = X[active]
    m = Xa.shape[0]
    scale = float(np.abs(X).sum())
    flat_tol = tol * (1.0 + scale)
    cost = np.concatenate([c_vec, np.ones(m)])
    if m:
        A_ub = sp.vstack([
            sp.hstack([sp.csc_matrix(Xa), -sp.eye(m, format="csc")]),
            sp.hstack([sp.csc_matrix(-Xa), -sp.eye(m, format="csc")]),
        ], format="csc")
        b_ub = np.zeros(2 * m)
    else:
        A_ub, b_ub = None, None
    for j in range(d):
        for sigma in (1.0, -1.0):
            bounds = [(-1.0, 1.0)] * d + [(0.0, None)] * m
            bounds[j] = (sigma, sigma)
            res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds,
                          method="highs")
            if res.status != 0:  # the pinned-face LP is always feasible and bounded
                raise LadSolveError(f"uniqueness probe LP failed: {res.message}")
            if res.fun <= flat_tol:
                return True
    return False


def _lexmin_vertex(X: np.ndarray, y: np.ndarray, objective: float,
                   tol: float) -> np.ndarray:
    """Lexicographically smallest point of the optimal face, coordinate by
    coordinate; raises when the face is unbounded (regressors do not span)."""
    T, d = X.shape
    A_eq = sp.hstack([sp.csc_matrix(X), sp.eye(T, format="csc"),
                      -sp.eye(T, format="csc")], format="csc")
    A_ub = sp.csc_matrix(
        np.concatenate([np.zeros(d), np.ones(2 * T)])[None, :])
    cap = objective + tol * (1.0 + objective)
    fixed: list[float] = []
    for j in range(d):
        cost = np.zeros(d + 2 * T)
        cost[j] = 1.0
        bounds = [(None, None)] * d + [(0, None)] * (2 * T)
        for k, val in enumerate(fixed):
            pad = 1e-9 * (1.0 + abs(val))  # keep earlier pins feasible
            bounds[k] = (val - pad, val + pad)
        res = linprog(cost, A_eq=A_eq, b_eq=y, A_ub=A_ub, b_ub=[cap],
                      bounds=bounds, method="highs")
        if res.status == 3:
            _, _, vt = np.linalg.svd(X)
            raise LadSolveError(
                "optimal face is unbounded: regressors do not span; "
                f"null direction {vt[-1].tolist()}")
        if res.status != 0:
            raise LadSolveError(f"lexicographic tie-break LP failed: {res.message}")
        val = float(res.x[j])
        fixed.append(val)
    return np.array(fixed)


def resolve_row_uniqueness(X: np.ndarray, y: np.ndarray, row: LadRowResult,
                           tol: float = DEFAULT_LAD_TOL) -> LadRowResult:
    """Decide uniqueness of a solved LAD row exactly and tie-break in place.

    Runs the flat-direction LP on the active set; when a flat face is
    found, the coefficients are replaced by the lexicographically smallest
    vertex and ``non_unique`` is set.
    """
    signs = _residual_signs(X, y, row.coeffs)
    if _flat_direction_exists(X, signs, tol):
        row.coeffs = _lexmin_vertex(X, y, row.objective, tol)
        row.objective = float(np.abs(y - X @ row.coeffs).sum())
        row.non_unique = True
    else:
        row.non_unique = False
    return row


def fit_l1(traj: Trajectory, tol: float = DEFAULT_LAD_TOL,
           probe_uniqueness: Optional[bool] = None) -> EstimatorResult:
    """The l1-norm estimator: independent LAD solve per output coordinate.

    The objective is the exact sum of the row objectives. Uniqueness
    probing defaults to on for d <= 3 (where the sphere-net margin proof is
    cheap) and off otherwise; pass True/False to force it. Probed rows that
    the margin cannot settle get the exact flat-face LP, and detected flat
    faces are tie-broken lexicographically.
    """
    X, Y = _design(traj)
    T, d = X.shape
    if probe_uniqueness is None:
        probe_uniqueness = d <= 3
    rows = []
    for i in range(d):
        try:
            rows.append(lad_row(X, Y[:, i], tol=tol))
        except LadSolveError as exc:
            raise LadSolveError(f"row {i}: {exc}") from exc
    if probe_uniqueness:
        _probe_fit_uniqueness(X, Y, rows, tol)
    a_hat = np.vstack([row.coeffs for row in rows])
    flags = [row.non_unique for row in rows]
    if any(f is True for f in flags):
        non_unique: Optional[bool] = True
    elif all(f is False for f in flags):
        non_unique = False
    else:
        non_unique = None
    return EstimatorResult(
        a_hat=a_hat, objective=float(sum(row.objective for row in rows)),
        method=METHOD_L1NORM,
        iterations=int(sum(row.iterations for row in rows)),
        converged=True, tol=tol, non_unique=non_unique,
    )


def _probe_fit_uniqueness(X: np.ndarray, Y: np.ndarray, rows: list,
                          tol: float) -> None:
    """Mass uniqueness proof across rows via one shared sphere net.

    For d <= 3, per-row margins over a net settle most rows at the cost of
    a couple of matrix products; only rows with an inconclusive margin pay
    for the exact flat-face LP.
    """
    T, d = X.shape
    unresolved = list(range(d))
    if d <= 3:
        signs = np.column_stack(
            [_residual_signs(X, Y[:, i], rows[i].coeffs) for i in range(d)])
        lipschitz = float(np.linalg.norm(X, axis=1).sum())
        eps = 0.2
        rungs = iter(certificate.EPSILON_RUNGS)
        while True:
            mins = certificate.direction_mins(
                X, signs[:, unresolved], certificate.build_net(d, eps).points)
            margins = mins - eps * lipschitz
            proven = [r for r, m in zip(unresolved, margins) if m > 0.0]
            for r in proven:
                rows[r].non_unique = False
            # A refinement can only help rows whose net minimum is still
            # positive; finer nets shrink the minimum, never grow it.
            refinable = [m for m, mg in zip(mins, margins)
                         if mg <= 0.0 and m > 0.0]
            unresolved = [r for r, m in zip(unresolved, margins) if m <= 0.0]
            factor = next(rungs, None)
            if not unresolved or not refinable or factor is None:
                break
            new_eps = max(factor * min(refinable) / max(lipschitz, 1e-300),
                          certificate.min_feasible_epsilon(d))
            if new_eps >= eps:
                break
            eps = new_eps
    for i in unresolved:
        resolve_row_uniqueness(X, Y[:, i], rows[i], tol)

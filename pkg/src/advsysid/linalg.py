"""Dense matrix/vector primitives used across the package.

Everything here is pure: no hidden state, safe to call from parallel
workers. Matrices are plain float64 numpy arrays (row-major, dense); the
problems this package targets never exceed a few hundred rows, so no
sparse or randomized machinery is needed.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg


class DegenerateGramError(ValueError):
    """Raised when an SPD solve meets a singular or indefinite matrix.

    Carries ``min_pivot``, the smallest eigenvalue of the offending
    matrix, as the degeneracy diagnostic.
    """

    def __init__(self, message: str, min_pivot: float):
        super().__init__(f"{message} (min pivot {min_pivot:.3e})")
        self.min_pivot = min_pivot


def _check_finite(M: np.ndarray, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def spectral_norm(M: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Largest singular value of ``M`` by power iteration on the Gram matrix.

    Deterministic for a fixed input: the start vector comes from a fixed
    seed. Converges when the singular-value estimate changes by less than
    ``tol`` relative; matrices here are small and dense, so the fixed
    iteration cap of 10,000 is generous.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = _check_finite(M, "matrix")
    if M.ndim != 2:
        raise ValueError("expected a 2-d array")
    if M.size == 0:
        return 0.0
    # Iterate on the smaller Gram matrix; stop on the eigenpair residual of
    # the Rayleigh quotient, which bounds the eigenvalue error directly
    # (successive-change tests can stop early on slow spectra).
    B = M.T @ M if M.shape[1] <= M.shape[0] else M @ M.T
    n = B.shape[0]
    rng = np.random.default_rng(0x5EC7)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        u = B @ v
        lam = float(v @ u)
        if np.linalg.norm(u - lam * v) <= tol * max(lam, 1e-300):
            break
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        v = u / nu
    return float(np.sqrt(max(lam, 0.0)))


def frobenius_distance(A: np.ndarray, B: np.ndarray) -> float:
    """Frobenius norm of ``A - B``. Zero iff the matrices are identical."""
    A = _check_finite(A, "A")
    B = _check_finite(B, "B")
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.linalg.norm(A - B, ord="fro"))


def solve_spd(G: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Solve ``G @ X = C`` for symmetric positive definite ``G`` via Cholesky.

    Cholesky failure is the degeneracy signal: it raises
    :class:`DegenerateGramError` carrying the smallest eigenvalue of ``G``.
    The residual of a successful solve satisfies
    ``||G X - C||_F <= 1e-10 * (||G|| * ||X|| + ||C||)`` on well-scaled input.
    """
    G = _check_finite(G, "G")
    C = _check_finite(C, "C")
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("G must be square")
    try:
        cho = scipy.linalg.cho_factor(G, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        min_pivot = float(np.linalg.eigvalsh((G + G.T) / 2.0).min())
        raise DegenerateGramError("degenerate Gram matrix", min_pivot) from exc
    return scipy.linalg.cho_solve(cho, C, check_finite=False)


def min_eig_sym(S: np.ndarray, asym_tol: float = 1e-9) -> float:
    """Smallest eigenvalue of a symmetric matrix.

    Rejects inputs whose asymmetry exceeds ``asym_tol`` in max-abs entry
    difference; symmetrize upstream if the matrix was accumulated by a
    non-symmetric kernel.
    """
    S = _check_finite(S, "S")
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("S must be square")
    asym = float(np.abs(S - S.T).max()) if S.size else 0.0
    if asym > asym_tol:
        raise ValueError(f"matrix asymmetry {asym:.3e} exceeds {asym_tol:.1e}")
    return float(np.linalg.eigvalsh(S)[0])

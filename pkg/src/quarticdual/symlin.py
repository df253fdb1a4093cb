"""Dense symmetric linear algebra kernels.

Matrices are held as ordinary dense ``numpy`` arrays in memory; the packed
lower-triangular layout (:func:`pack_lower` / :func:`unpack_lower`) is used
for serialization only.
"""
from collections import namedtuple

import numpy as np
import scipy.linalg as sla

from .exceptions import DomainError, NumericalFailure

__all__ = [
    "EigenDecomposition",
    "pack_lower",
    "unpack_lower",
    "as_symmetric",
    "eig_sym",
    "min_eigenvalue",
    "pseudo_solve",
    "lyapunov_solve",
    "chol_pd_check",
    "max_step_to_boundary",
]

PINV_CUTOFF = 1e-12
TOL_PSD = 1e-10
TOL_RANGE = 1e-8

EigenDecomposition = namedtuple("EigenDecomposition", ["values", "vectors"])


def pack_lower(M):
    """Row-major lower triangle of ``M`` as a flat vector of n(n+1)/2 values."""
    M = np.asarray(M, dtype=float)
    rows, cols = np.tril_indices(M.shape[0])
    return M[rows, cols].copy()


def unpack_lower(packed, n=None):
    """Inverse of :func:`pack_lower`."""
    packed = np.asarray(packed, dtype=float).ravel()
    if n is None:
        n = int(round((np.sqrt(8 * packed.size + 1) - 1) / 2))
    if packed.size != n * (n + 1) // 2:
        raise ValueError(
            f"packed length {packed.size} does not match dimension {n}"
        )
    M = np.zeros((n, n))
    rows, cols = np.tril_indices(n)
    M[rows, cols] = packed
    M[cols, rows] = packed
    return M


def as_symmetric(M, tol=1e-10, name="matrix"):
    """Validate a square finite matrix and return its symmetric part.

    Raises ``ValueError`` if the asymmetry exceeds ``tol`` relative to the
    Frobenius norm.
    """
    M = np.array(M, dtype=float, ndmin=2)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    asym = np.linalg.norm(M - M.T)
    if asym > tol * (1.0 + np.linalg.norm(M)):
        raise ValueError(f"{name} is not symmetric (asymmetry {asym:.3e})")
    return 0.5 * (M + M.T)


def eig_sym(M):
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending."""
    M = np.asarray(M, dtype=float)
    try:
        values, vectors = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(
            "symmetric eigensolver did not converge", norm=np.linalg.norm(M)
        ) from exc
    return EigenDecomposition(values, vectors)


def min_eigenvalue(M):
    M = np.asarray(M, dtype=float)
    try:
        return float(sla.eigh(M, eigvals_only=True, subset_by_index=[0, 0])[0])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(
            "symmetric eigensolver did not converge", norm=np.linalg.norm(M)
        ) from exc


def pseudo_solve(M, v, tol_range=TOL_RANGE, cutoff=PINV_CUTOFF):
    """Minimum-norm solution ``M^+ v`` and a range-membership flag.

    Eigenvalues with ``|lam| <= cutoff * max|lam|`` are treated as zero.
    ``in_range`` is true when the part of ``v`` orthogonal to the numerical
    range of ``M`` has norm at most ``tol_range * ||v||``.
    """
    v = np.asarray(v, dtype=float)
    values, vectors = eig_sym(M)
    scale = np.max(np.abs(values)) if values.size else 0.0
    keep = np.abs(values) > cutoff * scale
    coeffs = vectors.T @ v
    solution = vectors[:, keep] @ (coeffs[keep] / values[keep])
    residual = np.linalg.norm(coeffs[~keep])
    in_range = bool(residual <= tol_range * np.linalg.norm(v))
    return solution, in_range


def lyapunov_solve(S, C):
    """Solve ``S X + X S = C`` for symmetric positive definite ``S``.

    Works in the eigenbasis of ``S`` where the equation decouples
    entrywise: ``X_ij = C_ij / (lam_i + lam_j)``.
    """
    values, vectors = eig_sym(S)
    if values[0] <= 0.0:
        raise DomainError(
            f"Lyapunov operator requires a positive definite matrix "
            f"(min eigenvalue {values[0]:.3e})"
        )
    C_hat = vectors.T @ C @ vectors
    X_hat = C_hat / (values[:, None] + values[None, :])
    X = vectors @ X_hat @ vectors.T
    return 0.5 * (X + X.T)


def chol_pd_check(M):
    """True iff a Cholesky factorization of ``M`` succeeds."""
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return False
    return True


def max_step_to_boundary(M, D):
    """Largest ``t`` with ``M + t D`` positive definite, for PD ``M``.

    Returns ``inf`` when every nonnegative step stays inside the cone.
    """
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise DomainError("current point is not positive definite") from exc
    Y = sla.solve_triangular(L, D, lower=True)
    G = sla.solve_triangular(L, Y.T, lower=True)
    lam = np.linalg.eigvalsh(0.5 * (G + G.T))[0]
    if lam >= 0.0:
        return np.inf
    return -1.0 / lam

"""Dense linear-algebra kernels the rest of the package builds on.

Thin, contract-checked wrappers around LAPACK (via numpy/scipy): truncated
pseudoinverse, symmetric eigendecomposition, Cholesky with shift, PSD test,
and the discrete Lyapunov solve. All functions treat inputs as immutable and
are safe to call concurrently.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_discrete_lyapunov
from scipy.linalg.lapack import dpotrf

from .errors import InvalidMatrix, NotPositiveDefinite, UnstableSystem

DEFAULT_RANK_TOL = 1e-10


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a finite 2-D float array."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise InvalidMatrix(f"{name} must be 2-D, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise InvalidMatrix(f"{name} contains non-finite entries")
    return m


def symmetrize(s) -> np.ndarray:
    """Return (S + S^T)/2; raises if S is not square."""
    m = as_matrix(s, "symmetric input")
    if m.shape[0] != m.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {m.shape}")
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class SymEig:
    """Symmetric eigendecomposition with eigenvalues sorted descending.

    ``vectors`` holds orthonormal eigenvectors as columns, matching the
    ordering of ``values``, so ``vectors @ diag(values) @ vectors.T``
    reconstructs the (symmetrized) input.
    """

    values: np.ndarray
    vectors: np.ndarray


def pinv(a, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse with relative rank truncation.

    Singular values below ``rank_tol * sigma_max`` are treated as exact
    zeros. ``rank_tol`` must lie in (0, 1); the default matches the
    package-wide numerical-rank tolerance.
    """
    m = as_matrix(a, "pinv input")
    if not 0.0 < rank_tol < 1.0:
        raise ValueError(f"rank_tol must be in (0, 1), got {rank_tol}")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((m.shape[1], m.shape[0]))
    inv = np.where(s > rank_tol * s[0], 1.0 / np.where(s > 0, s, 1.0), 0.0)
    return (vt.T * inv) @ u.T


def matrix_rank(a, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    """Numerical rank with the same relative threshold as :func:`pinv`."""
    m = as_matrix(a, "rank input")
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rank_tol * s[0]))


def sym_eig(s) -> SymEig:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""
    m = symmetrize(s)
    vals, vecs = np.linalg.eigh(m)
    order = np.argsort(vals)[::-1]
    return SymEig(values=vals[order], vectors=vecs[:, order])


def chol_psd(s, shift: float = 0.0) -> np.ndarray:
    """Lower Cholesky factor G of S + shift*I, raising on failure.

    On failure :class:`NotPositiveDefinite` carries the zero-based index of
    the first non-positive pivot LAPACK encountered.
    """
    if shift < 0.0:
        raise ValueError(f"shift must be nonnegative, got {shift}")
    m = symmetrize(s)
    target = m + shift * np.eye(m.shape[0]) if shift else m
    if target.shape[0] == 0:
        return target.copy()
    c, info = dpotrf(target, lower=1)
    if info != 0:
        raise NotPositiveDefinite(
            f"matrix (+ shift {shift:g}) is not positive definite; "
            f"pivot {info - 1} failed",
            pivot=int(info) - 1,
        )
    return np.tril(c)


def is_psd(s, tol: float = 1e-10) -> bool:
    """True iff lambda_min(S) >= -tol * max(1, |lambda_max(S)|)."""
    m = symmetrize(s)
    if m.shape[0] == 0:
        return True
    vals = np.linalg.eigvalsh(m)
    return bool(vals[0] >= -tol * max(1.0, abs(vals[-1])))


def spectral_radius(a) -> float:
    m = as_matrix(a, "spectral radius input")
    if m.shape[0] != m.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def lyap_discrete(a, qc) -> np.ndarray:
    """Solve S = A S A^T + Qc for the stationary covariance S.

    Requires a Schur-stable A (spectral radius < 1) and PSD Qc; solved by a
    direct vectorized linear solve.
    """
    am = as_matrix(a, "A")
    qm = symmetrize(qc)
    if am.shape[0] != am.shape[1] or am.shape[0] != qm.shape[0]:
        raise InvalidMatrix(
            f"A and Qc must be square with matching size, got {am.shape}, {qm.shape}"
        )
    rho = spectral_radius(am)
    if rho >= 1.0 - 1e-9:
        raise UnstableSystem(f"spectral radius {rho:.6g} >= 1; no stationary solution")
    sol = solve_discrete_lyapunov(am, qm)
    return 0.5 * (sol + sol.T)

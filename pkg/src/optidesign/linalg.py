"""Dense symmetric/PSD matrix substrate.

Thin, deterministic policy layer over LAPACK (via numpy/scipy): validated
symmetric wrappers, Cholesky factorization with an explicit near-singularity
threshold, PSD solves, extreme eigenvalues, log-determinants, and the
low-rank inverse update used by every incremental computation in the package.

All functions are pure; ``SymMatrix`` and ``CholFactor`` are immutable value
types safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite

__all__ = [
    "SymMatrix",
    "CholFactor",
    "sym",
    "cholesky",
    "solve_psd",
    "extreme_eigs",
    "woodbury_update",
    "logdet",
    "is_psd",
]

#: Relative asymmetry tolerated at construction time.
SYMMETRY_RTOL = 1e-12

#: Cholesky pivots at or below ``dim * PIVOT_RTOL * max(diag)`` are rejected.
PIVOT_RTOL = 1e-14

#: Eigenvalues >= -PSD_RTOL * max(1, lambda_max) count as nonnegative.
PSD_RTOL = 1e-8


@dataclass(frozen=True)
class SymMatrix:
    """A validated dense symmetric real matrix.

    The constructor checks near-symmetry (``max |S_ij - S_ji| <=
    1e-12 * max|S|``) and stores the exactly symmetrized ``(S + S^T)/2`` so
    accumulated round-off cannot leak into downstream factorizations.
    """

    mat: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.mat, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] < 1:
            raise DimensionMismatch("dim must be >= 1")
        scale = np.max(np.abs(a)) if a.size else 0.0
        if scale > 0 and np.max(np.abs(a - a.T)) > SYMMETRY_RTOL * scale:
            raise DimensionMismatch(
                "matrix is not symmetric within tolerance "
                f"(max asymmetry {np.max(np.abs(a - a.T)):.3e}, scale {scale:.3e})"
            )
        object.__setattr__(self, "mat", (a + a.T) / 2.0)
        self.mat.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


@dataclass(frozen=True)
class CholFactor:
    """Lower-triangular Cholesky factor L with S = L L^T and positive diagonal."""

    L: np.ndarray = field(repr=False)

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise DimensionMismatch(f"expected a square factor, got shape {L.shape}")
        if np.any(np.diag(L) <= 0):
            raise NotPositiveDefinite("Cholesky factor has a nonpositive diagonal entry")
        object.__setattr__(self, "L", L)
        self.L.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.L.shape[0]


def sym(a) -> SymMatrix:
    """Coerce an array-like (or SymMatrix) to a SymMatrix."""
    if isinstance(a, SymMatrix):
        return a
    return SymMatrix(np.asarray(a, dtype=float))


def cholesky(S: SymMatrix | np.ndarray) -> CholFactor:
    """Factor an SPD matrix as L L^T.

    Raises
    ------
    NotPositiveDefinite
        If LAPACK fails, or any pivot L_kk^2 is <= dim * 1e-14 * max(diag S).
        Both signal a singular information matrix or an invalid covariance.
    """
    S = sym(S)
    try:
        L = np.linalg.cholesky(S.mat)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"matrix is not positive definite: {exc}") from exc
    pivots = np.diag(L) ** 2
    threshold = S.dim * PIVOT_RTOL * max(np.max(np.diag(S.mat)), 0.0)
    if np.any(pivots <= threshold):
        raise NotPositiveDefinite(
            f"near-singular matrix: smallest pivot {pivots.min():.3e} "
            f"<= threshold {threshold:.3e}"
        )
    return CholFactor(L)


def solve_psd(F: CholFactor, B) -> np.ndarray:
    """Solve S X = B given F = cholesky(S). B may be a vector or matrix."""
    B = np.asarray(B, dtype=float)
    if B.shape[0] != F.dim:
        raise DimensionMismatch(
            f"factor dim {F.dim} does not match right-hand side rows {B.shape[0]}"
        )
    return cho_solve((F.L, True), B, check_finite=False)


def extreme_eigs(S: SymMatrix | np.ndarray) -> tuple[float, float]:
    """Return (lambda_min, lambda_max) of a symmetric matrix.

    Uses a full dense symmetric eigendecomposition; at the matrix sizes this
    package targets (p, m up to ~1000) that is both exact enough and fast
    enough, and it is deterministic.
    """
    w = np.linalg.eigvalsh(sym(S).mat)
    return float(w[0]), float(w[-1])


def woodbury_update(Y_inv: SymMatrix | np.ndarray, A_u, R_u) -> SymMatrix:
    """Return (Y + A_u^T R_u^{-1} A_u)^{-1} given Y^{-1}, via the inversion lemma.

    Parameters
    ----------
    Y_inv : p x p SPD, the inverse of the current information matrix.
    A_u : n_u x p observation matrix of the added experiment (1-D input is
        treated as a single row).
    R_u : n_u x n_u SPD noise covariance.

    Only the small n_u x n_u capacitance block ``R_u + A_u Y^{-1} A_u^T`` is
    factored; no p x p refactorization happens.

    Raises
    ------
    NotPositiveDefinite
        If the capacitance block is not SPD (signals an invalid R_u).
    """
    Yi = sym(Y_inv).mat
    A = np.atleast_2d(np.asarray(A_u, dtype=float))
    R = sym(R_u).mat
    if A.shape[1] != Yi.shape[0]:
        raise DimensionMismatch(
            f"A_u has {A.shape[1]} columns but Y_inv is {Yi.shape[0]} x {Yi.shape[0]}"
        )
    if R.shape[0] != A.shape[0]:
        raise DimensionMismatch(
            f"R_u is {R.shape[0]} x {R.shape[0]} but A_u has {A.shape[0]} rows"
        )
    Z = Yi @ A.T
    capacitance = R + A @ Z
    try:
        Lc = np.linalg.cholesky((capacitance + capacitance.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(
            f"capacitance block not positive definite (invalid R_u): {exc}"
        ) from exc
    W = Yi - Z @ cho_solve((Lc, True), Z.T, check_finite=False)
    return SymMatrix((W + W.T) / 2.0)


def logdet(F: CholFactor) -> float:
    """log det S from its Cholesky factor: 2 * sum(log diag L)."""
    return float(2.0 * np.sum(np.log(np.diag(F.L))))


def is_psd(S: SymMatrix | np.ndarray) -> bool:
    """True if all eigenvalues are >= -1e-8 * max(1, lambda_max)."""
    lo, hi = extreme_eigs(S)
    return lo >= -PSD_RTOL * max(1.0, hi)


def whiten_rows(R_factor: CholFactor, A: np.ndarray) -> np.ndarray:
    """Return B = L^{-1} A for R = L L^T, so that A^T R^{-1} A = B^T B."""
    return solve_triangular(R_factor.L, A, lower=True, check_finite=False)

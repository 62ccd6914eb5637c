"""Shared numerical helpers: rank decisions, spectral radius, definiteness checks."""

from __future__ import annotations

import numpy as np

EPS = float(np.finfo(np.float64).eps)

# Safety factor on top of the usual max(dim) * sigma_max * eps rank threshold.
RANK_SAFETY = 100.0


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a float64 2-D array, raising on anything else."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got ndim={A.ndim}")
    if A.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def frozen(A: np.ndarray) -> np.ndarray:
    """Return a read-only copy of ``A`` (immutability for shared values)."""
    out = np.array(A, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def rank_tolerance(shape: tuple[int, int], sigma_max: float) -> float:
    return max(shape) * sigma_max * EPS * RANK_SAFETY


def numerical_rank(M: np.ndarray, s: np.ndarray | None = None) -> int:
    """Numerical rank of ``M`` from its singular values.

    The threshold is ``max(dim) * sigma_max * eps * 100``; ``s`` may be
    passed to reuse an existing SVD.
    """
    M = np.asarray(M, dtype=float)
    if s is None:
        s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rank_tolerance(M.shape, s[0])))


def spectral_radius(M) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(M, dtype=float)))))


def check_symmetric(M: np.ndarray, name: str, tol: float = 1e-12) -> None:
    """Raise unless ``M`` is symmetric to ``tol`` relative to its magnitude."""
    scale = max(1.0, float(np.abs(M).max()))
    skew = float(np.abs(M - M.T).max())
    if skew > tol * scale:
        raise ValueError(f"{name} must be symmetric (asymmetry {skew:.3e})")


def check_positive_definite(M: np.ndarray, name: str) -> None:
    """Raise unless symmetric ``M`` has strictly positive eigenvalues."""
    check_symmetric(M, name, tol=1e-10)
    lam = np.linalg.eigvalsh(M)
    tol = rank_tolerance(M.shape, max(float(lam[-1]), 0.0))
    if lam[0] <= tol:
        raise ValueError(
            f"{name} must be positive definite (min eigenvalue {lam[0]:.3e})"
        )


def sym(M: np.ndarray) -> np.ndarray:
    """Symmetric part of a square matrix."""
    return 0.5 * (M + M.T)

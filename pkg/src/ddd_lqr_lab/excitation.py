"""Hankel matrices, persistency of excitation, and singular-value bounds.

Quantitative side of the data-richness story: depth-k Hankel construction
and PE rank checks, the full-row-rank check of the input-state fundamental
lemma, and the high-probability lower bounds on sigma_min for Gaussian
excitation (threshold Lambda, failure probability epsilon_T, the Hankel
bound, and the combined-matrix bound through the parameterization P2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._util import as_matrix, numerical_rank, rank_tolerance
from .lti import LtiSystem


@dataclass(frozen=True)
class PeReport:
    """Outcome of a persistency-of-excitation check at one depth."""

    order: int
    hankel_rank: int
    required_rank: int
    min_singular_value: float
    is_pe: bool
    note: str = ""


@dataclass(frozen=True)
class FundamentalRankReport:
    """Rank of [X0; V0] against 2n+m, with the PE precondition attached.

    Truthy exactly when the rank condition holds; ``conclusive`` is False
    when V0 was not PE of order n+1, in which case the fundamental lemma
    makes no prediction either way.
    """

    rank: int
    required_rank: int
    rank_ok: bool
    conclusive: bool
    pe: PeReport

    def __bool__(self) -> bool:
        return self.rank_ok


def hankel(F, k: int) -> np.ndarray:
    """Depth-k block Hankel matrix of a signal F (one column per sample).

    Block row i (0-based) holds columns f_i ... f_{i+T-k} of F, so the result
    is ks x (T-k+1).

    >>> hankel(np.array([[1., 2., 3., 4.]]), 2)
    array([[1., 2., 3.],
           [2., 3., 4.]])
    """
    F = as_matrix(F, "F")
    T = F.shape[1]
    if not 1 <= k <= T:
        raise ValueError(f"depth k must satisfy 1 <= k <= T={T}, got {k}")
    cols = T - k + 1
    return np.vstack([F[:, i : i + cols] for i in range(k)])


def pe_check(F, k: int) -> PeReport:
    """Check persistency of excitation of order k: full row rank of hankel(F, k)."""
    F = as_matrix(F, "F")
    s_dim, T = F.shape
    H = hankel(F, k)
    required = k * s_dim
    svals = np.linalg.svd(H, compute_uv=False)
    rank = numerical_rank(H, svals)
    note = ""
    if H.shape[1] < required:
        note = (
            f"Hankel has {H.shape[1]} columns < {required} rows; "
            f"PE of order {k} is impossible at T={T}"
        )
    return PeReport(
        order=k,
        hankel_rank=rank,
        required_rank=required,
        min_singular_value=float(svals[-1]) if svals.size else 0.0,
        is_pe=(rank == required),
        note=note,
    )


def fundamental_rank_check(X0, V0) -> FundamentalRankReport:
    """Input-state fundamental lemma check: rank [X0; V0] = 2n+m.

    V0 stacks the input and (noise-as-input) signals; the lemma needs V0
    persistently exciting of order n+1, which is verified first and reported
    via ``conclusive``.
    """
    X0 = as_matrix(X0, "X0")
    V0 = as_matrix(V0, "V0")
    if X0.shape[1] != V0.shape[1]:
        raise ValueError("X0 and V0 must have the same number of columns")
    n = X0.shape[0]
    pe = pe_check(V0, n + 1)
    stack = np.vstack([X0, V0])
    rank = numerical_rank(stack)
    required = n + V0.shape[0]
    return FundamentalRankReport(
        rank=rank,
        required_rank=required,
        rank_ok=(rank == required),
        conclusive=pe.is_pe,
        pe=pe,
    )


def _log(x: float, log_base: float | None) -> float:
    if log_base is None:
        return math.log(x)
    return math.log(x) / math.log(log_base)


def lambda_threshold(m: int, n: int, T: int, log_base: float | None = None) -> float:
    """Horizon threshold Lambda(m,n,T) = (n+1)(m+n) log^2(2(n+1)(m+n)) log^2(2T(m+n)).

    Logarithms are natural by default; pass ``log_base`` to override (the
    source convention is unstated).
    """
    if min(m, n, T) < 1:
        raise ValueError("m, n, T must all be >= 1")
    a = _log(2.0 * (n + 1) * (m + n), log_base)
    b = _log(2.0 * T * (m + n), log_base)
    return (n + 1) * (m + n) * a * a * b * b


def epsilon_T(m: int, n: int, T: int, log_base: float | None = None) -> float:
    """Failure probability (2T(m+n))^(-log^2(2(n+1)(m+n)) * log(2T(m+n))).

    Strictly inside (0,1) and decreasing in T; can underflow to 0.0 in
    float64 for very large arguments.
    """
    if min(m, n, T) < 1:
        raise ValueError("m, n, T must all be >= 1")
    a = _log(2.0 * (n + 1) * (m + n), log_base)
    b = _log(2.0 * T * (m + n), log_base)
    exponent = -(a * a) * b
    # evaluate as exp(exponent * ln(base_value)) to keep control of underflow
    return math.exp(exponent * math.log(2.0 * T * (m + n)))


def hankel_sv_bound(T: int, n: int, sigma_z: float) -> float:
    """High-probability lower bound sqrt(T-n) * sigma_z / sqrt(2) for the
    depth-(n+1) Hankel of an isotropic Gaussian signal."""
    if T <= n:
        raise ValueError(f"need T > n, got T={T}, n={n}")
    return math.sqrt(T - n) * sigma_z / math.sqrt(2.0)


def empirical_rho(X0, Z0, k: int | None = None) -> float:
    """Empirical ratio rho_hat = sigma_min([X0; Z0]) * sqrt(k) / sigma_min(H_k(Z0)).

    With k = n+1 (the default) this is the realized constant linking the
    state-input stack to the input Hankel; theory guarantees a T-independent
    positive lower bound exists, so rho_hat stays bounded away from zero
    across seeds and horizons.
    """
    X0 = as_matrix(X0, "X0")
    Z0 = as_matrix(Z0, "Z0")
    if X0.shape[1] != Z0.shape[1]:
        raise ValueError("X0 and Z0 must have the same number of columns")
    n = X0.shape[0]
    if k is None:
        k = n + 1
    H = hankel(Z0, k)
    s_H = np.linalg.svd(H, compute_uv=False)
    if s_H.size == 0 or s_H[-1] <= rank_tolerance(H.shape, float(s_H[0])):
        raise ValueError(
            f"degenerate depth-{k} Hankel (sigma_min = {s_H[-1] if s_H.size else 0.0:.3e})"
        )
    s_stack = np.linalg.svd(np.vstack([X0, Z0]), compute_uv=False)
    return float(s_stack[-1] * math.sqrt(k) / s_H[-1])


def p2_matrix(system: LtiSystem) -> np.ndarray:
    """The square parameterization [[I,0,0],[0,I,0],[A,B,(sigma_w/sigma_u) I]]
    mapping the isotropic stack [X0; U0; (sigma_u/sigma_w) W0] onto [X0; U0; X1]."""
    n, m = system.n, system.m
    P2 = np.zeros((2 * n + m, 2 * n + m))
    P2[:n, :n] = np.eye(n)
    P2[n : n + m, n : n + m] = np.eye(m)
    P2[n + m :, :n] = system.A
    P2[n + m :, n : n + m] = system.B
    P2[n + m :, n + m :] = (system.sigma_w / system.sigma_u) * np.eye(n)
    return P2


def combined_sv_bound(system: LtiSystem, T: int, rho: float) -> tuple[float, float]:
    """Lower bound on sigma_min of the combined data matrix [X0; U0; X1].

    Returns (bound, sigma_min(P2)) where the bound is
    sigma_min(P2) * sqrt(T-n) * rho * sigma_u / sqrt(2(n+1)).
    """
    if system.sigma_w <= 0:
        raise ValueError("the combined-matrix bound requires sigma_w > 0")
    if rho <= 0:
        raise ValueError("rho must be positive")
    n = system.n
    if T <= n:
        raise ValueError(f"need T > n, got T={T}, n={n}")
    smin_p2 = float(np.linalg.svd(p2_matrix(system), compute_uv=False)[-1])
    bound = smin_p2 * math.sqrt(T - n) * rho * system.sigma_u / math.sqrt(2.0 * (n + 1))
    return bound, smin_p2


@dataclass(frozen=True)
class BoundReport:
    """All Gaussian-excitation bound quantities for one (system, T, rho).

    ``threshold`` is c * Lambda(m,n,T); the horizon flag reports T >= c*Lambda
    without gating anything (the constant c in the source is unspecified and
    defaults to 1).
    """

    lambda_value: float
    epsilon_t: float
    hankel_bound: float
    combined_bound: float
    rho_used: float
    T: int
    c: float
    threshold: float
    horizon_admissible: bool


def bound_report(
    system: LtiSystem,
    T: int,
    rho: float,
    c: float = 1.0,
    log_base: float | None = None,
) -> BoundReport:
    """Assemble the bound quantities for a horizon-T record of ``system``."""
    n, m = system.n, system.m
    lam = lambda_threshold(m, n, T, log_base)
    eps = epsilon_T(m, n, T, log_base)
    combined, _ = combined_sv_bound(system, T, rho)
    return BoundReport(
        lambda_value=lam,
        epsilon_t=eps,
        hankel_bound=hankel_sv_bound(T, n, system.sigma_u),
        combined_bound=combined,
        rho_used=rho,
        T=T,
        c=c,
        threshold=c * lam,
        horizon_admissible=(T >= c * lam),
    )

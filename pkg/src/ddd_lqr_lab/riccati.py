"""Model-based LQR ground truth: Riccati fixed point, gain, stability, cost.

Conventions used everywhere in this package: the gain solves
K = (R + B'PB)^{-1} B'PA, the control law is u = -Kx, and the closed loop
is A - BK.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._util import frozen, spectral_radius
from .lti import LqrWeights, LtiSystem


@dataclass(frozen=True)
class DareSolution:
    """Fixed point P of the discrete algebraic Riccati equation plus its gain."""

    P: np.ndarray
    K: np.ndarray
    residual: float
    iterations: int

    def __post_init__(self):
        object.__setattr__(self, "P", frozen(self.P))
        object.__setattr__(self, "K", frozen(self.K))


def _dare_step(P, A, B, Q, R):
    """One Riccati iteration A'PA - A'PB (R+B'PB)^{-1} B'PA + Q."""
    BtP = B.T @ P
    S = R + BtP @ B
    # R > 0 makes S symmetric positive definite; a failed factorization is a bug.
    c, low = scipy.linalg.cho_factor(0.5 * (S + S.T))
    G = scipy.linalg.cho_solve((c, low), BtP @ A)
    return A.T @ P @ A - (BtP @ A).T @ G + Q, G


def solve_dare(
    system: LtiSystem,
    weights: LqrWeights,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> DareSolution:
    """Solve the DARE by fixed-point iteration from P_0 = Q.

    Iterates P <- A'PA - A'PB (R+B'PB)^{-1} B'PA + Q from P_0 = Q.  The
    Frobenius norm of one step equals the equation residual at the current
    iterate, so iteration stops once that residual is at most ``tol`` (or
    has hit the rounding floor of the iteration, whichever is looser).
    Converges for controllable (A, B) and Q, R > 0.

    Returns
    -------
    DareSolution with the stabilizing P, the gain K = (R+B'PB)^{-1} B'PA,
    the Frobenius residual at the returned P, and the iteration count.
    """
    A, B = system.A, system.B
    Q, R = weights.Q, weights.R
    if Q.shape[0] != system.n:
        raise ValueError(f"Q is {Q.shape[0]}x{Q.shape[0]} but the state dimension is {system.n}")
    if R.shape[0] != system.m:
        raise ValueError(f"R is {R.shape[0]}x{R.shape[0]} but the input dimension is {system.m}")

    P = Q.copy()
    for it in range(1, max_iter + 1):
        P_next, K = _dare_step(P, A, B, Q, R)
        residual = float(np.linalg.norm(P_next - P, "fro"))
        floor = 50.0 * np.finfo(float).eps * np.linalg.norm(P_next, "fro")
        if residual <= max(tol, floor):
            return DareSolution(P=P, K=K, residual=residual, iterations=it)
        P = 0.5 * (P_next + P_next.T)
    raise RuntimeError(
        f"DARE fixed-point iteration did not converge in {max_iter} iterations "
        f"(last residual {residual:.3e})"
    )


def closed_loop(system: LtiSystem, K: np.ndarray) -> np.ndarray:
    """Closed-loop matrix A - BK for the control law u = -Kx."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape != (system.m, system.n):
        raise ValueError(f"K must be {system.m}x{system.n}, got {K.shape}")
    return system.A - system.B @ K


def is_stabilizing(system: LtiSystem, K: np.ndarray) -> tuple[bool, float]:
    """Whether rho(A - BK) < 1, together with the spectral radius itself."""
    rho = spectral_radius(closed_loop(system, K))
    return rho < 1.0, rho


def average_cost(system: LtiSystem, weights: LqrWeights, K: np.ndarray) -> float:
    """Steady-state average LQR cost of u = -Kx, or +inf if destabilizing.

    For a stable closed loop the cost is sigma_w^2 * trace(P_cl) with
    P_cl = (A-BK)' P_cl (A-BK) + Q + K'RK.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    Acl = closed_loop(system, K)
    if spectral_radius(Acl) >= 1.0:
        return float("inf")
    Qbar = weights.Q + K.T @ weights.R @ K
    P_cl = scipy.linalg.solve_discrete_lyapunov(Acl.T, Qbar)
    return float(system.sigma_w**2 * np.trace(P_cl))

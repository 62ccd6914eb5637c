"""Closed-form optima, collapse predictions, and gain bounds.

Everything the data-driven programs can be checked against without trusting
the solver lives here: the minimum-norm optimizer of the certainty
equivalence program on overdetermined data, the prediction of which gain that
program returns (zero on generic noisy data, the model-based gain on
noiseless data), the noise-sensitivity matrix Psi behind the stabilization
guarantee, and the two-step chain bounding the regularized program's gain.

The Psi diagnostics need the recorded noise W0 and are therefore
simulation-only; nothing here should be wired into an interface that ingests
externally collected data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._util import as_matrix, numerical_rank
from .excitation import p2_matrix
from .lti import LqrWeights, LtiSystem, TrajectoryData, combined_matrix
from .riccati import solve_dare

__all__ = [
    "CePrediction",
    "OracleReport",
    "PsiMatrices",
    "StabilizationCondition",
    "ce_objective_reference",
    "ce_prediction",
    "ce_target",
    "min_norm_solution",
    "oracle_report",
    "psi_matrix",
    "rp_bound_theoretical",
    "rp_gain_bound",
    "stabilization_condition",
]


def ce_target(n: int, m: int) -> np.ndarray:
    """The stacked right-hand side E = [I_n; 0; 0] of D_T Y = E.

    On overdetermined data the certainty-equivalence optimum is exactly the
    solution set of D_T Y = E: X0 Y = I, U0 Y = 0, X1 Y = 0.
    """
    if n < 1 or m < 1:
        raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    return np.vstack([np.eye(n), np.zeros((m + n, n))])


def min_norm_solution(D: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Minimum Frobenius norm solution Y = D'(DD')^{-1} E of D Y = E.

    Requires D to have full row rank and raises ValueError naming the rank
    deficiency otherwise (for a rank-deficient stack the equation is
    unsolvable for a generic right-hand side).  Evaluated through the SVD of
    D rather than the normal equations, which squares the conditioning.
    """
    D = as_matrix(D, "D")
    E = as_matrix(E, "E")
    rows = D.shape[0]
    if E.shape[0] != rows:
        raise ValueError(f"row mismatch: D has {rows} rows, E has {E.shape[0]}")
    U, s, Vt = np.linalg.svd(D, full_matrices=False)
    r = numerical_rank(D, s)
    if r < rows:
        raise ValueError(
            f"D is rank-deficient (rank {r} of {rows} rows); "
            "D Y = E is unsolvable for a generic right-hand side"
        )
    return Vt.T @ ((U.T @ E) / s[:, None])


@dataclass(frozen=True)
class CePrediction:
    """Predicted certainty-equivalence gain and which argument produced it.

    ``path`` is "zero-gain" when the combined stack [X0; U0; X1] has full row
    rank (generic noisy data), else "model-based" with the identified plant
    attached.
    """

    K: np.ndarray
    path: str
    A_hat: np.ndarray | None = None
    B_hat: np.ndarray | None = None


def ce_prediction(data: TrajectoryData, weights: LqrWeights) -> CePrediction:
    """Predict the certainty-equivalence gain without solving the program.

    Full-row-rank combined stack (the almost-sure case under process noise
    once T >= (m+n)(n+1)+n): the program's optimal gain is exactly zero.
    Rank-deficient stack (noiseless data): the program reproduces the
    certainty-equivalent design, so identify (A, B) from [X0; U0] by least
    squares and return that plant's Riccati gain.
    """
    n, m = data.n, data.m
    D = combined_matrix(data)
    if numerical_rank(D) == 2 * n + m:
        return CePrediction(K=np.zeros((m, n)), path="zero-gain")

    G = np.vstack([data.X0, data.U0])
    U, s, Vt = np.linalg.svd(G, full_matrices=False)
    r = numerical_rank(G, s)
    if r < n + m:
        raise ValueError(
            f"[X0; U0] is rank-deficient (rank {r} of {n + m}); "
            "the least-squares plant is not identifiable"
        )
    ab = data.X1 @ ((Vt[:r].T / s[:r]) @ U[:, :r].T)
    A_hat, B_hat = ab[:, :n], ab[:, n:]
    plant = LtiSystem(A=A_hat, B=B_hat)
    K = solve_dare(plant, weights).K
    return CePrediction(K=K, path="model-based", A_hat=A_hat, B_hat=B_hat)


@dataclass(frozen=True)
class PsiMatrices:
    """M = Y (X0 Y)^{-1} Y' and the noise-sensitivity matrix built from it."""

    M: np.ndarray
    psi: np.ndarray


def psi_matrix(data: TrajectoryData, Y: np.ndarray) -> PsiMatrices:
    """Noise-sensitivity matrix Psi = W0 M W0' - X1 M W0' - W0 M X1'.

    ``Y`` should be an optimizer of the certainty-equivalence program (any
    feasible point with invertible X0 Y is accepted).  Needs the recorded
    noise W0, so this is a simulation-only diagnostic.  Raises ValueError if
    X0 Y is numerically singular.
    """
    Y = as_matrix(Y, "Y")
    n = data.n
    if Y.shape != (data.T, n):
        raise ValueError(f"Y must be {data.T}x{n}, got {Y.shape}")
    G = data.X0 @ Y
    if numerical_rank(G) < n:
        raise ValueError("X0 Y is numerically singular; Psi is undefined")
    M = Y @ scipy.linalg.solve(G, Y.T)
    MW = M @ data.W0.T
    psi = data.W0 @ MW - data.X1 @ MW - data.W0 @ (M @ data.X1.T)
    return PsiMatrices(M=M, psi=psi)


@dataclass(frozen=True)
class StabilizationCondition:
    """Whether some weight eta >= 1 makes Psi <= (1 - 1/eta) I hold."""

    lambda_max: float
    satisfiable: bool
    borderline: bool


def stabilization_condition(
    psi: np.ndarray, borderline_tol: float = 1e-9
) -> StabilizationCondition:
    """Test whether Psi <= (1 - 1/eta) I is satisfiable by any eta >= 1.

    The supremum of 1 - 1/eta over eta >= 1 is 1, so the condition holds for
    some eta exactly when lambda_max(Psi) < 1.  ``borderline`` flags a
    largest eigenvalue within ``borderline_tol`` of that limit, where the
    verdict is not numerically trustworthy either way.
    """
    psi = as_matrix(psi, "psi")
    if psi.shape[0] != psi.shape[1]:
        raise ValueError(f"psi must be square, got {psi.shape}")
    skew = np.abs(psi - psi.T).max()
    if skew > 1e-6 * max(1.0, np.abs(psi).max()):
        raise ValueError(f"psi must be symmetric; skew magnitude {skew:.3e}")
    lam = float(np.linalg.eigvalsh(0.5 * (psi + psi.T))[-1])
    return StabilizationCondition(
        lambda_max=lam,
        satisfiable=lam < 1.0,
        borderline=abs(lam - 1.0) <= borderline_tol,
    )


def rp_gain_bound(data: TrajectoryData, weights: LqrWeights, eta: float) -> float:
    """Data-realized upper bound on the squared spectral norm of the RP gain.

    With d = 2n+m and g = sigma_min(D_T D_T'), the chain bounding first
    sigma_max(U0 Y*) and then the gain itself gives

        ||K||_2^2 <= (eta d / (sigma_min(R) g))
                     * [trace(Q)/sigma_min(Q) + eta d / (sigma_min(Q) g)].

    This is a deterministic inequality at any optimizer, evaluated with the
    realized data's singular values.  Raises ValueError when the combined
    stack is rank-deficient (g = 0).
    """
    if not np.isfinite(eta) or eta <= 0:
        raise ValueError(f"eta must be a positive finite scalar, got {eta}")
    D = combined_matrix(data)
    rows = D.shape[0]
    s = np.linalg.svd(D, compute_uv=False)
    if numerical_rank(D, s) < rows:
        raise ValueError(
            f"combined stack is rank-deficient (rank {numerical_rank(D, s)} "
            f"of {rows}); the gain bound needs sigma_min(D_T D_T') > 0"
        )
    gram_min = float(s[-1]) ** 2
    q_min = float(np.linalg.eigvalsh(weights.Q)[0])
    r_min = float(np.linalg.eigvalsh(weights.R)[0])
    lead = eta * rows / (r_min * gram_min)
    return lead * (float(np.trace(weights.Q)) / q_min + eta * rows / (q_min * gram_min))


def rp_bound_theoretical(
    system: LtiSystem,
    weights: LqrWeights,
    T: int,
    eta: float,
    rho: float,
) -> tuple[float, float]:
    """Probabilistic gain bound (C/(T-n)) [trace(Q)/sigma_min(Q) + C/(T-n)].

    Returns ``(bound, C)`` with

        C = 2 (n+1) (2n+m) eta
            / (min(sigma_min(R), sigma_min(Q)) sigma_min(P2)^2 rho^2 sigma_u^2),

    the horizon-independent constant of the high-probability statement.
    ``rho`` is the Hankel conditioning ratio (see ``excitation.empirical_rho``).
    Needs T > n, rho > 0, and sigma_w > 0 (otherwise P2 is singular and the
    bound is vacuous).
    """
    n, m = system.n, system.m
    if T <= n:
        raise ValueError(f"need T > n = {n}, got T = {T}")
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    if not np.isfinite(eta) or eta <= 0:
        raise ValueError(f"eta must be a positive finite scalar, got {eta}")
    p2_min = float(np.linalg.svd(p2_matrix(system), compute_uv=False)[-1])
    if p2_min <= 0:
        raise ValueError("P2 is singular (sigma_w = 0); the bound is vacuous")
    q_min = float(np.linalg.eigvalsh(weights.Q)[0])
    r_min = float(np.linalg.eigvalsh(weights.R)[0])
    C = (
        2.0
        * (n + 1)
        * (2 * n + m)
        * eta
        / (min(q_min, r_min) * p2_min**2 * rho**2 * system.sigma_u**2)
    )
    lead = C / (T - n)
    return lead * (float(np.trace(weights.Q)) / q_min + lead), C


def ce_objective_reference(weights: LqrWeights) -> float:
    """Optimal certainty-equivalence objective on overdetermined data: trace(Q)."""
    return float(np.trace(weights.Q))


@dataclass(frozen=True)
class OracleReport:
    """Everything the closed-form analysis says about one data record.

    Fields that need an ingredient the caller did not supply (an optimizer Y
    for the Psi diagnostics, the true plant for ``psi_gap`` and the
    theoretical bound, full row rank for ``Y_n`` and ``rp_bound``) are None.
    """

    T: int
    eta: float
    rank_DT: int
    K_predicted: np.ndarray
    prediction_path: str
    Y_n: np.ndarray | None
    rp_bound: float | None
    psi: np.ndarray | None = None
    psi_gap: float | None = None
    psi_lambda_max: float | None = None
    rp_bound_theoretical: float | None = None
    rp_bound_constant: float | None = None

    def __post_init__(self):
        if self.rank_DT < 0 or self.rank_DT > self.T:
            raise ValueError(f"rank_DT={self.rank_DT} out of range for T={self.T}")
        if self.rp_bound is not None and not self.rp_bound >= 0:
            raise ValueError(f"rp_bound must be nonnegative, got {self.rp_bound}")

    def to_dict(self) -> dict:
        """JSON-ready dict; arrays become nested lists."""
        out = {}
        for key, value in self.__dict__.items():
            out[key] = value.tolist() if isinstance(value, np.ndarray) else value
        return out


def oracle_report(
    data: TrajectoryData,
    weights: LqrWeights,
    eta: float,
    Y: np.ndarray | None = None,
    system: LtiSystem | None = None,
    rho: float | None = None,
) -> OracleReport:
    """Assemble the closed-form report for one data record.

    Parameters
    ----------
    data, weights : the record and the cost being analyzed
    eta : regularization weight used by the gain bounds
    Y : optimizer of the certainty-equivalence program, if one was computed
        (enables the Psi diagnostics)
    system : the true plant, if known (enables ``psi_gap`` and, together
        with ``rho``, the theoretical bound)
    rho : Hankel conditioning ratio for the theoretical bound
    """
    n, m = data.n, data.m
    D = combined_matrix(data)
    rank_DT = numerical_rank(D)
    full = rank_DT == 2 * n + m
    pred = ce_prediction(data, weights)
    Y_n = min_norm_solution(D, ce_target(n, m)) if full else None
    rp_b = rp_gain_bound(data, weights, eta) if full and eta > 0 else None

    psi = psi_gap = lam = None
    if Y is not None:
        psi = psi_matrix(data, Y).psi
        lam = stabilization_condition(psi).lambda_max
        if system is not None:
            psi_gap = float(np.linalg.norm(psi - system.A @ system.A.T, "fro"))

    theo = const = None
    if (
        system is not None
        and rho is not None
        and eta > 0
        and system.sigma_w > 0
        and data.T > n
    ):
        theo, const = rp_bound_theoretical(system, weights, data.T, eta, rho)

    return OracleReport(
        T=data.T,
        eta=float(eta),
        rank_DT=rank_DT,
        K_predicted=pred.K,
        prediction_path=pred.path,
        Y_n=Y_n,
        rp_bound=rp_b,
        psi=psi,
        psi_gap=psi_gap,
        psi_lambda_max=lam,
        rp_bound_theoretical=theo,
        rp_bound_constant=const,
    )

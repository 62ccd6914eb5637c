"""Data-driven LQR design programs built from raw trajectory matrices.

Both designs optimize over a decision matrix Y (horizon x state) that
parameterizes the closed loop directly through the data:

* the certainty-equivalence program minimizes

      trace(Q X0 Y) + trace(X)

  subject to two PSD blocks coupling X0 Y, X1 Y and U0 Y, where X is an
  epigraph variable for the input cost; the state-feedback gain is then
  K = -U0 Y (X0 Y)^{-1};

* the regularized program adds eta * trace(Y (X0 Y)^{-1} Y') through a
  slack block, penalizing the size of Y itself, which is what keeps the
  gain from collapsing when the data carry process noise.

The slack can be carried either as one (T+n) x (T+n) block with a full
T x T matrix variable ("full" form) or as T small (n+1) x (n+1) blocks
with scalar epigraph variables ("epigraph" form).  Both encode the same
row-wise quadratic form; the epigraph form is the one that scales, and the
full form is kept as a cross-check at small horizons.

The blocks constrain products such as X0 Y that are symmetric at any
feasible point but not for arbitrary Y, so each builder attaches the
explicit skew-symmetry equalities on X0 Y rather than silently relaxing
them; see :mod:`ddd_lqr_lab.lmi` for the carrier's view of this.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Any

import numpy as np

from ._util import as_matrix
from .ipm import SolverSettings, solve
from .lmi import LmiProblem, LmiBlock, SolveStatus
from .lti import LqrWeights, TrajectoryData


def sym_sqrt(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Symmetric square root of an SPD matrix via eigendecomposition."""
    M = as_matrix(M, name)
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    floor = np.finfo(float).eps * max(1.0, float(vals[-1])) * M.shape[0]
    if vals[0] <= floor:
        raise ValueError(f"{name} is not positive definite (min eig {vals[0]:.3e})")
    return (vecs * np.sqrt(vals)) @ vecs.T


def _tril_pairs(dim: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(dim) for j in range(i + 1)]


def _skew_equalities(X0: np.ndarray, T: int, p: int) -> tuple[np.ndarray, np.ndarray] | tuple[None, None]:
    """Rows forcing (X0 Y)[i,j] == (X0 Y)[j,i]; none needed for n == 1."""
    n = X0.shape[0]
    if n < 2:
        return None, None
    rows = []
    for i in range(n):
        for j in range(i + 1, n):
            row = np.zeros(p)
            for t in range(T):
                row[t * n + j] += X0[i, t]
                row[t * n + i] -= X0[j, t]
            rows.append(row)
    return np.array(rows), np.zeros(len(rows))


def _data_blocks(data: TrajectoryData, weights: LqrWeights, p: int):
    """The two blocks shared by both designs, with columns over p variables."""
    n, m, T = data.n, data.m, data.T
    X0, U0, X1 = data.X0, data.U0, data.X1
    RU = sym_sqrt(weights.R, "R") @ U0

    # [[X0 Y - I, X1 Y], [(X1 Y)', X0 Y]] >= 0
    f0_a = np.zeros((2 * n, 2 * n))
    f0_a[:n, :n] = -np.eye(n)
    coeff_a: dict[int, np.ndarray] = {}
    # [[X, sqrt(R) U0 Y], [(sqrt(R) U0 Y)', X0 Y]] >= 0
    f0_b = np.zeros((m + n, m + n))
    coeff_b: dict[int, np.ndarray] = {}
    for t in range(T):
        for b in range(n):
            Ca = np.zeros((2 * n, 2 * n))
            Ca[:n, b] += X0[:, t]
            Ca[:n, n + b] += X1[:, t]
            Ca[n + b, :n] += X1[:, t]
            Ca[n:, n + b] += X0[:, t]
            coeff_a[t * n + b] = 0.5 * (Ca + Ca.T)
            Cb = np.zeros((m + n, m + n))
            Cb[:m, m + b] += RU[:, t]
            Cb[m + b, :m] += RU[:, t]
            Cb[m:, m + b] += X0[:, t]
            coeff_b[t * n + b] = 0.5 * (Cb + Cb.T)
    for k, (i, j) in enumerate(_tril_pairs(m)):
        C = np.zeros((m + n, m + n))
        C[i, j] = C[j, i] = 1.0
        coeff_b[T * n + k] = C
    return LmiBlock(2 * n, f0_a, coeff_a), LmiBlock(m + n, f0_b, coeff_b)


def _objective_head(data: TrajectoryData, weights: LqrWeights, p: int) -> np.ndarray:
    """Coefficients of trace(Q X0 Y) + trace(X) over the first T n + m(m+1)/2 slots."""
    n, m, T = data.n, data.m, data.T
    c = np.zeros(p)
    c[: T * n] = (weights.Q @ data.X0).T.reshape(-1)
    for k, (i, j) in enumerate(_tril_pairs(m)):
        if i == j:
            c[T * n + k] = 1.0
    return c


def _warn_if_underdetermined(data: TrajectoryData) -> None:
    need = 2 * data.n + data.m
    if data.T < need:
        warnings.warn(
            f"horizon T={data.T} is below {need} samples; the program is "
            "underdetermined and the recovered gain is not meaningful",
            stacklevel=3,
        )


def build_ce(data: TrajectoryData, weights: LqrWeights) -> LmiProblem:
    """Certainty-equivalence design as an LMI problem.

    Variables are the T*n entries of Y (row-major) followed by the
    m(m+1)/2 lower-triangle entries of the input-cost epigraph matrix X.
    """
    _check_dims(data, weights)
    _warn_if_underdetermined(data)
    n, m, T = data.n, data.m, data.T
    p = T * n + m * (m + 1) // 2
    block_a, block_b = _data_blocks(data, weights, p)
    eq, rhs = _skew_equalities(data.X0, T, p)
    return LmiProblem(
        num_vars=p,
        c=_objective_head(data, weights, p),
        blocks=(block_a, block_b),
        eq_matrix=eq,
        eq_rhs=rhs,
    )


def build_rp(
    data: TrajectoryData,
    weights: LqrWeights,
    eta: float,
    form: str = "epigraph",
) -> LmiProblem:
    """Regularized design: the CE program plus eta * trace(Y (X0 Y)^{-1} Y').

    ``form="full"`` carries the regularizer through one (T+n) x (T+n)
    block with a T x T slack matrix; ``form="epigraph"`` uses T blocks of
    size (n+1) with scalar slacks.  The two are equivalent reformulations.
    """
    _check_dims(data, weights)
    _warn_if_underdetermined(data)
    if not (np.isfinite(eta) and eta > 0):
        raise ValueError(f"eta must be positive and finite, got {eta}")
    if form not in ("full", "epigraph"):
        raise ValueError(f"form must be 'full' or 'epigraph', got {form!r}")
    n, m, T = data.n, data.m, data.T
    X0 = data.X0
    head = T * n + m * (m + 1) // 2
    if form == "full":
        p = head + T * (T + 1) // 2
        block_a, block_b = _data_blocks(data, weights, p)
        c = _objective_head(data, weights, p)
        f0 = np.zeros((T + n, T + n))
        coeff: dict[int, np.ndarray] = {}
        for t in range(T):
            for b in range(n):
                C = np.zeros((T + n, T + n))
                C[t, T + b] += 1.0
                C[T + b, t] += 1.0
                C[T:, T + b] += X0[:, t]
                coeff[t * n + b] = 0.5 * (C + C.T)
        for k, (i, j) in enumerate(_tril_pairs(T)):
            C = np.zeros((T + n, T + n))
            C[i, j] = C[j, i] = 1.0
            coeff[head + k] = C
            if i == j:
                c[head + k] = eta
        slack_blocks: tuple[LmiBlock, ...] = (LmiBlock(T + n, f0, coeff),)
    else:
        p = head + T
        block_a, block_b = _data_blocks(data, weights, p)
        c = _objective_head(data, weights, p)
        c[head:] = eta
        blocks = []
        for i in range(T):
            f0 = np.zeros((n + 1, n + 1))
            coeff = {}
            for t in range(T):
                for b in range(n):
                    C = np.zeros((n + 1, n + 1))
                    C[1:, 1 + b] += X0[:, t]
                    if t == i:
                        C[0, 1 + b] += 1.0
                        C[1 + b, 0] += 1.0
                    coeff[t * n + b] = 0.5 * (C + C.T)
            Ct = np.zeros((n + 1, n + 1))
            Ct[0, 0] = 1.0
            coeff[head + i] = Ct
            blocks.append(LmiBlock(n + 1, f0, coeff))
        slack_blocks = tuple(blocks)
    eq, rhs = _skew_equalities(X0, T, p)
    return LmiProblem(
        num_vars=p,
        c=c,
        blocks=(block_a, block_b) + slack_blocks,
        eq_matrix=eq,
        eq_rhs=rhs,
    )


def _check_dims(data: TrajectoryData, weights: LqrWeights) -> None:
    if weights.Q.shape[0] != data.n or weights.R.shape[0] != data.m:
        raise ValueError(
            f"weights sized for n={weights.Q.shape[0]}, m={weights.R.shape[0]} "
            f"do not match data with n={data.n}, m={data.m}"
        )


# ---------------------------------------------------------------------------
# solution extraction
# ---------------------------------------------------------------------------


def recover_gain(
    U0: np.ndarray,
    X0: np.ndarray,
    Y: np.ndarray,
    cond_tol: float | None = None,
) -> np.ndarray:
    """K = -U0 Y (X0 Y)^{-1}, guarded against a near-singular X0 Y."""
    U0 = as_matrix(U0, "U0")
    X0 = as_matrix(X0, "X0")
    Y = as_matrix(Y, "Y")
    G = X0 @ Y
    sv = np.linalg.svd(G, compute_uv=False)
    tol = cond_tol if cond_tol is not None else 1e-8 * sv[0]
    if sv[-1] <= tol:
        raise ValueError(
            f"X0 Y is numerically singular (smallest singular value "
            f"{sv[-1]:.3e} <= {tol:.3e}); no gain can be recovered"
        )
    return -np.linalg.solve(G.T, (U0 @ Y).T).T


def reduced_objective_ce(data: TrajectoryData, weights: LqrWeights, Y: np.ndarray) -> float:
    """CE objective with the epigraph variable eliminated at its optimum.

    Equals trace(Q X0 Y) + trace((sqrt(R) U0 Y)(X0 Y)^{-1}(sqrt(R) U0 Y)');
    requires X0 Y to be invertible.
    """
    Y = as_matrix(Y, "Y")
    G = data.X0 @ Y
    B = sym_sqrt(weights.R, "R") @ data.U0 @ Y
    quad = B @ np.linalg.solve(G, B.T)
    return float(np.trace(weights.Q @ G) + np.trace(quad))


def reduced_objective_rp(
    data: TrajectoryData, weights: LqrWeights, eta: float, Y: np.ndarray
) -> float:
    """RP objective with all slack variables eliminated at their optimum."""
    Y = as_matrix(Y, "Y")
    G = data.X0 @ Y
    return reduced_objective_ce(data, weights, Y) + eta * float(
        np.trace(Y @ np.linalg.solve(G, Y.T))
    )


def verify_feasibility(
    data: TrajectoryData,
    weights: LqrWeights,
    Y: np.ndarray,
    X: np.ndarray | None = None,
) -> float:
    """Smallest eigenvalue over the CE blocks at Y, built from fresh products.

    When ``X`` is omitted the input-cost block is evaluated at the smallest
    admissible epigraph matrix, so the result is the margin of Y itself.
    """
    Y = as_matrix(Y, "Y")
    n, m = data.n, data.m
    G = data.X0 @ Y
    H1 = data.X1 @ Y
    B = sym_sqrt(weights.R, "R") @ data.U0 @ Y
    top = np.block([[0.5 * (G + G.T) - np.eye(n), H1], [H1.T, 0.5 * (G + G.T)]])
    margin = float(np.linalg.eigvalsh(top)[0])
    if X is None:
        sv = np.linalg.svd(G, compute_uv=False)
        if sv[-1] <= 1e-12 * max(1.0, sv[0]):
            # no finite epigraph matrix closes the second block
            return -float("inf")
        X = B @ np.linalg.solve(0.5 * (G + G.T), B.T)
    X = as_matrix(X, "X")
    bottom = np.block([[0.5 * (X + X.T), B], [B.T, 0.5 * (G + G.T)]])
    margin = min(margin, float(np.linalg.eigvalsh(bottom)[0]))
    skew = 0.5 * (G - G.T)
    if n > 1 and np.abs(skew).max() > 0:
        margin = min(margin, -float(np.abs(skew).max()))
    return margin


@dataclass(frozen=True)
class DddSolution:
    """Everything extracted from one design solve.

    ``slack`` is the regularizer's variable (the T x T matrix for the full
    form, the length-T epigraph vector otherwise) and None for CE.  The
    diagnostics dict always carries the identity-tracking norms
    ``norm_X0Y_minus_I``, ``norm_U0Y``, ``norm_X1Y``, ``sigma_min_X0Y``
    plus solver telemetry.
    """

    Y: np.ndarray
    X: np.ndarray
    slack: np.ndarray | None
    K: np.ndarray | None
    objective: float
    solver_status: SolveStatus
    diagnostics: dict[str, Any]


def _unpack_sym(z: np.ndarray, dim: int, offset: int) -> np.ndarray:
    M = np.zeros((dim, dim))
    for k, (i, j) in enumerate(_tril_pairs(dim)):
        M[i, j] = M[j, i] = z[offset + k]
    return M


def _extract(
    data: TrajectoryData,
    weights: LqrWeights,
    problem: LmiProblem,
    result,
    slack_kind: str,
) -> DddSolution:
    n, m, T = data.n, data.m, data.T
    z = result.z
    Y = z[: T * n].reshape(T, n)
    head = T * n + m * (m + 1) // 2
    X = _unpack_sym(z, m, T * n)
    if slack_kind == "none":
        slack = None
    elif slack_kind == "full":
        slack = _unpack_sym(z, T, head)
    else:
        slack = z[head:].copy()
    G = data.X0 @ Y
    diagnostics: dict[str, Any] = {
        "norm_X0Y": float(np.linalg.norm(G, 2)),
        "norm_X0Y_minus_I": float(np.linalg.norm(G - np.eye(n), 2)),
        "norm_U0Y": float(np.linalg.norm(data.U0 @ Y, 2)),
        "norm_X1Y": float(np.linalg.norm(data.X1 @ Y, 2)),
        "sigma_min_X0Y": float(np.linalg.svd(G, compute_uv=False)[-1]),
        "gap": result.gap,
        "feas": result.feas,
        "iterations": result.iterations,
        "message": result.message,
    }
    K = None
    if result.status == SolveStatus.OPTIMAL:
        try:
            K = recover_gain(data.U0, data.X0, Y)
        except ValueError as exc:
            diagnostics["gain_recovery_error"] = str(exc)
    return DddSolution(
        Y=Y,
        X=X,
        slack=slack,
        K=K,
        objective=result.objective_value,
        solver_status=result.status,
        diagnostics=diagnostics,
    )


def solve_ce(
    data: TrajectoryData,
    weights: LqrWeights,
    settings: SolverSettings | None = None,
) -> DddSolution:
    """Build and solve the certainty-equivalence design."""
    problem = build_ce(data, weights)
    result = solve(problem, settings or SolverSettings(gap_tol=1e-9, feas_tol=1e-9))
    return _extract(data, weights, problem, result, "none")


def solve_rp(
    data: TrajectoryData,
    weights: LqrWeights,
    eta: float,
    form: str = "epigraph",
    settings: SolverSettings | None = None,
) -> DddSolution:
    """Build and solve the regularized design."""
    problem = build_rp(data, weights, eta, form=form)
    result = solve(problem, settings or SolverSettings(gap_tol=1e-9, feas_tol=1e-9))
    return _extract(data, weights, problem, result, form)

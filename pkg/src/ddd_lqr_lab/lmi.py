"""Problem carrier for linear-objective LMI problems.

A problem is: minimize c'z subject to, for every block j,

    F0_j + sum_i z_i F_{j,i}  is positive semidefinite,

optionally intersected with linear equalities A_eq z = b_eq.  The equality
part exists because a PSD requirement on a matrix whose diagonal blocks are
non-symmetric affine expressions (such as X0 Y in the data-driven programs)
implicitly constrains those expressions to be symmetric, and symmetric
coefficient blocks alone cannot express that.

Problems round-trip through a small JSON schema for debugging and
cross-solver comparison:

    {
      "num_vars": p,
      "c": [...],
      "blocks": [{"size": d, "entries": [[var_index, row, col, value], ...]}],
      "equalities": {"num_rows": e, "entries": [[row, col, value], ...],
                     "rhs": [...]}          # optional
    }

Block entries carry the lower triangle only (row >= col) and use
var_index -1 for the constant term F0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ._util import frozen

SYM_TOL = 1e-12


def _check_block_matrix(M: np.ndarray, size: int, what: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.shape != (size, size):
        raise ValueError(f"{what} must be {size}x{size}, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{what} contains non-finite entries")
    scale = max(1.0, float(np.abs(M).max()))
    if float(np.abs(M - M.T).max()) > SYM_TOL * scale:
        raise ValueError(f"{what} is not symmetric to {SYM_TOL}")
    return frozen(M)


@dataclass(frozen=True)
class LmiBlock:
    """One PSD block: constant term plus a variable-index -> coefficient map."""

    size: int
    f0: np.ndarray
    coeff: dict[int, np.ndarray]

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"block size must be >= 1, got {self.size}")
        object.__setattr__(self, "f0", _check_block_matrix(self.f0, self.size, "F0"))
        checked = {}
        for i, F in self.coeff.items():
            if i < 0:
                raise ValueError(f"negative variable index {i} in block")
            checked[int(i)] = _check_block_matrix(F, self.size, f"F[{i}]")
        object.__setattr__(self, "coeff", checked)

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        """F0 + sum_i z_i F_i at the point z."""
        M = self.f0.copy()
        for i, F in self.coeff.items():
            M += z[i] * F
        return M


@dataclass(frozen=True)
class LmiProblem:
    """Minimize c'z over the intersection of PSD blocks (and equalities)."""

    num_vars: int
    c: np.ndarray
    blocks: tuple[LmiBlock, ...]
    eq_matrix: np.ndarray | None = None
    eq_rhs: np.ndarray | None = None

    def __post_init__(self):
        p = self.num_vars
        if p < 1:
            raise ValueError("num_vars must be >= 1")
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if c.shape != (p,):
            raise ValueError(f"objective must have length {p}, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("objective contains non-finite entries")
        object.__setattr__(self, "c", frozen(c))
        blocks = tuple(self.blocks)
        if not blocks:
            raise ValueError("problem must have at least one block")
        for b in blocks:
            bad = [i for i in b.coeff if i >= p]
            if bad:
                raise ValueError(f"block refers to variable indices {bad} >= num_vars={p}")
        object.__setattr__(self, "blocks", blocks)
        if (self.eq_matrix is None) != (self.eq_rhs is None):
            raise ValueError("eq_matrix and eq_rhs must be given together")
        if self.eq_matrix is not None:
            A = np.asarray(self.eq_matrix, dtype=float)
            b = np.asarray(self.eq_rhs, dtype=float).reshape(-1)
            if A.ndim != 2 or A.shape[1] != p:
                raise ValueError(f"eq_matrix must have {p} columns, got shape {A.shape}")
            if b.shape != (A.shape[0],):
                raise ValueError("eq_rhs length must match eq_matrix rows")
            if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
                raise ValueError("equalities contain non-finite entries")
            object.__setattr__(self, "eq_matrix", frozen(A))
            object.__setattr__(self, "eq_rhs", frozen(b))

    @property
    def num_equalities(self) -> int:
        return 0 if self.eq_matrix is None else self.eq_matrix.shape[0]


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    NUMERICAL_TROUBLE = "NumericalTrouble"
    ITER_LIMIT = "IterLimit"


@dataclass(frozen=True)
class SolveResult:
    """Solver outcome: point, certified objective, status, and residuals.

    ``gap`` is the relative duality gap and ``feas`` the worst block minimum
    eigenvalue at z (negative values are violations).  Statuses other than
    Optimal leave z at the final iterate for diagnosis.
    """

    z: np.ndarray
    objective_value: float
    status: SolveStatus
    gap: float
    feas: float
    iterations: int
    message: str = ""


def block_min_eigs(problem: LmiProblem, z: np.ndarray) -> list[float]:
    """Fresh minimum eigenvalue of every block at z (independent of any solver)."""
    z = np.asarray(z, dtype=float).reshape(-1)
    out = []
    for b in problem.blocks:
        M = b.evaluate(z)
        out.append(float(np.linalg.eigvalsh(0.5 * (M + M.T))[0]))
    return out


def equality_violation(problem: LmiProblem, z: np.ndarray) -> float:
    if problem.eq_matrix is None:
        return 0.0
    return float(np.abs(problem.eq_matrix @ z - problem.eq_rhs).max())


# ---------------------------------------------------------------------------
# JSON round-trip
# ---------------------------------------------------------------------------


def problem_to_json(problem: LmiProblem) -> str:
    """Serialize to the documented schema (lower-triangular entries only)."""
    blocks = []
    for b in problem.blocks:
        entries = []
        items = [(-1, b.f0)] + sorted(b.coeff.items())
        for i, F in items:
            for r in range(b.size):
                for col in range(r + 1):
                    v = F[r, col]
                    if v != 0.0:
                        entries.append([i, r, col, v])
        blocks.append({"size": b.size, "entries": entries})
    doc = {
        "num_vars": problem.num_vars,
        "c": problem.c.tolist(),
        "blocks": blocks,
    }
    if problem.eq_matrix is not None:
        entries = []
        A = problem.eq_matrix
        for r in range(A.shape[0]):
            for col in range(A.shape[1]):
                if A[r, col] != 0.0:
                    entries.append([r, col, A[r, col]])
        doc["equalities"] = {
            "num_rows": A.shape[0],
            "entries": entries,
            "rhs": problem.eq_rhs.tolist(),
        }
    return json.dumps(doc)


def problem_from_json(text: str) -> LmiProblem:
    doc = json.loads(text)
    p = int(doc["num_vars"])
    blocks = []
    for bdoc in doc["blocks"]:
        d = int(bdoc["size"])
        f0 = np.zeros((d, d))
        coeff: dict[int, np.ndarray] = {}
        for i, r, col, v in bdoc["entries"]:
            i, r, col = int(i), int(r), int(col)
            if r < col:
                raise ValueError("block entries must be lower-triangular (row >= col)")
            M = f0 if i == -1 else coeff.setdefault(i, np.zeros((d, d)))
            M[r, col] = v
            M[col, r] = v
        blocks.append(LmiBlock(size=d, f0=f0, coeff=coeff))
    eq_matrix = eq_rhs = None
    if "equalities" in doc:
        edoc = doc["equalities"]
        e = int(edoc["num_rows"])
        eq_matrix = np.zeros((e, p))
        for r, col, v in edoc["entries"]:
            eq_matrix[int(r), int(col)] = v
        eq_rhs = np.asarray(edoc["rhs"], dtype=float)
    return LmiProblem(
        num_vars=p,
        c=np.asarray(doc["c"], dtype=float),
        blocks=tuple(blocks),
        eq_matrix=eq_matrix,
        eq_rhs=eq_rhs,
    )


def dump_problem(problem: LmiProblem, path) -> None:
    Path(path).write_text(problem_to_json(problem), encoding="utf-8")


def load_problem(path) -> LmiProblem:
    return problem_from_json(Path(path).read_text(encoding="utf-8"))

"""Plant definition, seeded trajectory generation, and the raw data matrices.

The plant is the discrete-time LTI system

    x_{t+1} = A x_t + B u_t + w_t,

driven offline by i.i.d. Gaussian inputs u_t ~ N(0, sigma_u^2 I).  A length-T
record of it is held as the four matrices

    X0 = [x_0 ... x_{T-1}],  U0 = [u_0 ... u_{T-1}],
    X1 = [x_1 ... x_T],      W0 = [w_0 ... w_{T-1}],

which is everything the downstream programs consume.  A measurement-noise
variant replaces the exact states by x_t + delta_t and keeps the dynamics
noise-free.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import as_matrix, check_positive_definite, frozen, numerical_rank

NOISE_MODES = ("process", "measurement")


@dataclass(frozen=True)
class LtiSystem:
    """Ground-truth plant matrices plus excitation / noise scales.

    ``sigma_u`` scales the random input, ``sigma_w`` the process noise,
    ``sigma_x0`` the random initial state (0 pins x_0 = 0), and
    ``sigma_delta`` the measurement noise used only in measurement mode.
    """

    A: np.ndarray
    B: np.ndarray
    sigma_u: float = 1.0
    sigma_w: float = 0.0
    sigma_x0: float = 0.0
    sigma_delta: float = 0.0

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(
                f"B must have {A.shape[0]} rows to match A, got {B.shape[0]}"
            )
        if not self.sigma_u > 0:
            raise ValueError("sigma_u must be strictly positive")
        for name in ("sigma_w", "sigma_x0", "sigma_delta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        object.__setattr__(self, "A", frozen(A))
        object.__setattr__(self, "B", frozen(B))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def replace(self, **changes) -> "LtiSystem":
        """Copy with some scale fields changed (matrices are shared)."""
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class LqrWeights:
    """Positive definite LQR cost weights for states (Q) and inputs (R)."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = as_matrix(self.Q, "Q")
        R = as_matrix(self.R, "R")
        for name, M in (("Q", Q), ("R", R)):
            if M.shape[0] != M.shape[1]:
                raise ValueError(f"{name} must be square, got shape {M.shape}")
            check_positive_definite(M, name)
        object.__setattr__(self, "Q", frozen(Q))
        object.__setattr__(self, "R", frozen(R))


@dataclass(frozen=True)
class TrajectoryData:
    """One simulated record: state/input/shifted-state/noise matrices.

    ``sigma_u`` and ``sigma_w`` record the generation scales; the isotropic
    stack needs their ratio and it is not recoverable from the matrices.
    """

    X0: np.ndarray
    U0: np.ndarray
    X1: np.ndarray
    W0: np.ndarray
    T: int
    noise_mode: str
    seed: int
    sigma_u: float = 1.0
    sigma_w: float = 0.0

    def __post_init__(self):
        X0 = as_matrix(self.X0, "X0")
        U0 = as_matrix(self.U0, "U0")
        X1 = as_matrix(self.X1, "X1")
        W0 = as_matrix(self.W0, "W0")
        n, T = X0.shape
        if U0.shape[1] != T or X1.shape != (n, T) or W0.shape != (n, T):
            raise ValueError("X0, U0, X1, W0 must share the horizon T")
        if T != self.T:
            raise ValueError(f"declared T={self.T} but matrices have {T} columns")
        if self.noise_mode not in NOISE_MODES:
            raise ValueError(f"noise_mode must be one of {NOISE_MODES}")
        if not self.sigma_u > 0:
            raise ValueError("sigma_u must be strictly positive")
        if self.sigma_w < 0:
            raise ValueError("sigma_w must be nonnegative")
        for name, M in (("X0", X0), ("U0", U0), ("X1", X1), ("W0", W0)):
            object.__setattr__(self, name, frozen(M))

    @property
    def n(self) -> int:
        return self.X0.shape[0]

    @property
    def m(self) -> int:
        return self.U0.shape[0]


def simulate(
    system: LtiSystem, T: int, seed: int, mode: str = "process"
) -> TrajectoryData:
    """Drive the plant with random inputs for ``T`` steps and record data.

    Randomness comes from ``numpy.random.default_rng(seed)`` (PCG64) and its
    ``standard_normal`` transform, so identical arguments give bit-identical
    output on any platform running the same numpy version.  Draw order is
    fixed: inputs U (m x T), then in process mode noise W (n x T) and the
    initial state (n), or in measurement mode the initial state (n) followed
    by measurement offsets delta (n x (T+1)).  Scales of exactly zero still
    consume their draws, so e.g. U0 is identical across noise levels for a
    fixed seed.

    Parameters
    ----------
    system : LtiSystem
    T : trajectory length (>= 1)
    seed : RNG seed for this record
    mode : "process" (default) or "measurement" (Gaussian offsets on the
        recorded states, dynamics noise-free, W0 = 0)
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if mode not in NOISE_MODES:
        raise ValueError(f"mode must be one of {NOISE_MODES}, got {mode!r}")
    n, m = system.n, system.m
    rng = np.random.default_rng(seed)
    U = system.sigma_u * rng.standard_normal((m, T))
    if mode == "process":
        W = system.sigma_w * rng.standard_normal((n, T))
        x0 = system.sigma_x0 * rng.standard_normal(n)
    else:
        W = np.zeros((n, T))
        x0 = system.sigma_x0 * rng.standard_normal(n)
        delta = system.sigma_delta * rng.standard_normal((n, T + 1))

    X = np.empty((n, T + 1))
    X[:, 0] = x0
    A, B = system.A, system.B
    for t in range(T):
        X[:, t + 1] = A @ X[:, t] + B @ U[:, t] + W[:, t]
    if mode == "measurement":
        X = X + delta
    return TrajectoryData(
        X0=X[:, :T],
        U0=U,
        X1=X[:, 1:],
        W0=W,
        T=T,
        noise_mode=mode,
        seed=seed,
        sigma_u=system.sigma_u,
        sigma_w=system.sigma_w if mode == "process" else 0.0,
    )


def combined_matrix(data: TrajectoryData) -> np.ndarray:
    """The (2n+m) x T stack D_T = [X0; U0; X1] whose rank decides CE collapse."""
    return np.vstack([data.X0, data.U0, data.X1])


def stacked_input(data: TrajectoryData, scaling: str = "plain") -> np.ndarray:
    """Input-and-noise stack, treating process noise as an extra input.

    ``plain`` returns V0 = [U0; W0]; ``isotropic`` returns
    Z0 = [U0; (sigma_u/sigma_w) W0], whose columns are i.i.d.
    N(0, sigma_u^2 I) so the Gaussian Hankel bounds apply directly.
    """
    if data.noise_mode != "process":
        raise ValueError("stacked input is defined for process-noise data only")
    if scaling == "plain":
        return np.vstack([data.U0, data.W0])
    if scaling == "isotropic":
        if data.sigma_w == 0.0:
            raise ValueError("isotropic scaling requires sigma_w > 0")
        return np.vstack([data.U0, (data.sigma_u / data.sigma_w) * data.W0])
    raise ValueError(f"scaling must be 'plain' or 'isotropic', got {scaling!r}")


def hankel_depth_threshold(n: int, m: int) -> int:
    """Smallest horizon (m+n)(n+1)+n at which depth-(n+1) PE is possible."""
    return (m + n) * (n + 1) + n


BENCHMARK_A = ((0.8878, 0.2232), (0.3491, 0.3726))
BENCHMARK_B = ((-0.6808,), (0.3726,))


def benchmark_system(
    sigma_u: float = 1.0,
    sigma_w: float = 1.0,
    sigma_x0: float = 0.0,
    sigma_delta: float = 0.0,
) -> LtiSystem:
    """The benchmark two-state, one-input, open-loop-unstable plant."""
    return LtiSystem(
        A=np.array(BENCHMARK_A),
        B=np.array(BENCHMARK_B),
        sigma_u=sigma_u,
        sigma_w=sigma_w,
        sigma_x0=sigma_x0,
        sigma_delta=sigma_delta,
    )


def identity_weights(n: int = 2, m: int = 1) -> LqrWeights:
    """Identity state weight and identity input weight (Q = I_n, R = I_m)."""
    return LqrWeights(Q=np.eye(n), R=np.eye(m))


def controllability_check(system: LtiSystem) -> bool:
    """True iff rank [B, AB, ..., A^{n-1}B] = n (singular-value tolerance)."""
    n = system.n
    blocks = []
    P = system.B.copy()
    for _ in range(n):
        blocks.append(P)
        P = system.A @ P
    return numerical_rank(np.hstack(blocks)) == n


# ---------------------------------------------------------------------------
# config loading and CSV import/export
# ---------------------------------------------------------------------------

SYSTEM_KEYS = ("A", "B", "sigma_u", "sigma_w", "sigma_x0", "sigma_delta")


def system_from_spec(spec) -> LtiSystem:
    """Build a system from ``"benchmark"`` or a mapping with keys A, B, sigma_*."""
    if isinstance(spec, str):
        if spec == "benchmark":
            return benchmark_system()
        raise ValueError(f"unknown system preset {spec!r} (expected 'benchmark')")
    if not isinstance(spec, dict):
        raise ValueError("system spec must be a preset name or a mapping")
    unknown = set(spec) - set(SYSTEM_KEYS)
    if unknown:
        raise ValueError(f"unknown system keys: {sorted(unknown)}")
    if "A" not in spec or "B" not in spec:
        raise ValueError("system spec must provide both 'A' and 'B'")
    kwargs = {k: float(spec[k]) for k in SYSTEM_KEYS[2:] if k in spec}
    return LtiSystem(A=np.array(spec["A"], dtype=float),
                     B=np.array(spec["B"], dtype=float), **kwargs)


def weights_from_spec(spec, n: int, m: int) -> LqrWeights:
    """Build weights from ``"identity"`` or a mapping with keys Q, R."""
    if isinstance(spec, str):
        if spec == "identity":
            return identity_weights(n, m)
        raise ValueError(f"unknown weights preset {spec!r} (expected 'identity')")
    if not isinstance(spec, dict):
        raise ValueError("weights spec must be a preset name or a mapping")
    unknown = set(spec) - {"Q", "R"}
    if unknown:
        raise ValueError(f"unknown weights keys: {sorted(unknown)}")
    if "Q" not in spec or "R" not in spec:
        raise ValueError("weights spec must provide both 'Q' and 'R'")
    return LqrWeights(Q=np.array(spec["Q"], dtype=float),
                      R=np.array(spec["R"], dtype=float))


def load_plant_config(path) -> tuple[LtiSystem, LqrWeights]:
    """Read a YAML/JSON config holding a system spec and optional weights."""
    import yaml

    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"config {path} must be a mapping")
    system_spec = raw.get("system", "benchmark")
    system = system_from_spec(system_spec)
    weights = weights_from_spec(raw.get("weights", "identity"), system.n, system.m)
    return system, weights


def trajectory_to_csv(data: TrajectoryData, path) -> None:
    """Write one row per time step with columns t, x_1..x_n, u_1..u_m, w_1..w_n."""
    n, m = data.n, data.m
    header = (
        ["t"]
        + [f"x_{i + 1}" for i in range(n)]
        + [f"u_{j + 1}" for j in range(m)]
        + [f"w_{i + 1}" for i in range(n)]
    )
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(data.T):
            row = (
                [t]
                + [repr(float(v)) for v in data.X0[:, t]]
                + [repr(float(v)) for v in data.U0[:, t]]
                + [repr(float(v)) for v in data.W0[:, t]]
            )
            writer.writerow(row)


def trajectory_from_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a trajectory CSV back into (X, U, W) arrays of shape (dim, T)."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    n = sum(1 for c in header if c.startswith("x_"))
    m = sum(1 for c in header if c.startswith("u_"))
    nw = sum(1 for c in header if c.startswith("w_"))
    if header[:1] != ["t"] or n == 0 or m == 0 or nw != n:
        raise ValueError(f"{path} is not a trajectory CSV (header {header})")
    body = np.array([[float(v) for v in row[1:]] for row in rows])
    X = body[:, :n].T
    U = body[:, n : n + m].T
    W = body[:, n + m :].T
    return X, U, W

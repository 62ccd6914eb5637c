"""Seeded Monte Carlo harness: configs, sweeps, CSV/SVG/JSON emission.

The harness runs grid cells (horizon T x run index) through the data-driven
programs, one independent RNG stream per cell, optionally on a process pool.
Records land in ``records.csv`` with one column per ``ExperimentRecord``
field; per-horizon aggregates land in ``summary.csv``; closed-form
diagnostics for the first run of each cell group land in
``oracle-reports.json``; wall-clock times and the config echo land in
``run-manifest.json``.

Determinism contract: a cell's trajectory depends only on (base_seed, T,
run index), records are sorted before emission, and floats are serialized
with ``repr`` (shortest round-trip form), so re-running an experiment with
the same config produces a byte-identical ``records.csv``.  The one
measurement that cannot be deterministic, wall time, is kept out of the CSV
(its column stays empty) and reported in the manifest instead.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._util import spectral_radius
from .excitation import empirical_rho
from .ipm import SolverSettings
from .lti import (
    LqrWeights,
    LtiSystem,
    combined_matrix,
    simulate,
    stacked_input,
    system_from_spec,
    weights_from_spec,
)
from .oracle import ce_prediction, oracle_report, rp_gain_bound
from .programs import solve_ce, solve_rp
from .riccati import closed_loop, solve_dare

__all__ = [
    "CeCaseOutcome",
    "EtaPolicy",
    "ExperimentConfig",
    "ExperimentRecord",
    "SummaryRow",
    "cell_seed",
    "emit_csv",
    "emit_plots",
    "parse_config",
    "run_ce_experiment",
    "run_rp_sweep",
    "summarize",
    "write_outputs",
]

#: solver tolerances used when a config does not override them
DEFAULT_SOLVER = SolverSettings(gap_tol=1e-9, feas_tol=1e-9)

CE_LOW_NOISE_SIGMA = float(np.sqrt(1e-5))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EtaPolicy:
    """Regularization schedule: eta(T) = value (fixed) or value * T (linear)."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("fixed", "linear"):
            raise ValueError(f"eta policy kind must be 'fixed' or 'linear', got {self.kind!r}")
        if not np.isfinite(self.value) or self.value <= 0:
            raise ValueError(f"eta policy value must be positive, got {self.value}")

    def eta_for(self, T: int) -> float:
        return self.value if self.kind == "fixed" else self.value * T


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: plant, cost, grid, noise level, seeds, solver knobs.

    ``sigma_w`` is the process-noise scale the sweep simulates with; it
    overrides whatever scale the system spec carried.
    """

    system: LtiSystem
    weights: LqrWeights
    T_grid: tuple[int, ...]
    eta_policy: EtaPolicy
    sigma_w: float
    n_runs: int = 10
    base_seed: int = 0
    solver: SolverSettings = field(default_factory=lambda: DEFAULT_SOLVER)
    out_dir: Path | None = None
    allow_failures: bool = False

    def __post_init__(self):
        grid = tuple(int(T) for T in self.T_grid)
        if not grid:
            raise ValueError("T_grid must not be empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError(f"T_grid must be strictly increasing, got {list(grid)}")
        if grid[0] < 1:
            raise ValueError(f"horizons must be >= 1, got {grid[0]}")
        if self.n_runs < 1:
            raise ValueError(f"n_runs must be >= 1, got {self.n_runs}")
        if self.sigma_w < 0:
            raise ValueError(f"sigma_w must be nonnegative, got {self.sigma_w}")
        object.__setattr__(self, "T_grid", grid)
        object.__setattr__(
            self, "system", self.system.replace(sigma_w=float(self.sigma_w))
        )
        if self.out_dir is not None:
            object.__setattr__(self, "out_dir", Path(self.out_dir))

    def to_dict(self) -> dict:
        """JSON-ready echo of every knob, matrices as nested lists."""
        sysd = {
            "A": self.system.A.tolist(),
            "B": self.system.B.tolist(),
            "sigma_u": self.system.sigma_u,
            "sigma_w": self.system.sigma_w,
            "sigma_x0": self.system.sigma_x0,
            "sigma_delta": self.system.sigma_delta,
        }
        return {
            "system": sysd,
            "weights": {"Q": self.weights.Q.tolist(), "R": self.weights.R.tolist()},
            "T_grid": list(self.T_grid),
            "eta": {self.eta_policy.kind: self.eta_policy.value},
            "sigma_w": self.sigma_w,
            "n_runs": self.n_runs,
            "base_seed": self.base_seed,
            "solver": {
                "gap_tol": self.solver.gap_tol,
                "feas_tol": self.solver.feas_tol,
                "max_iter": self.solver.max_iter,
            },
            "out_dir": str(self.out_dir) if self.out_dir is not None else None,
            "allow_failures": self.allow_failures,
        }


CONFIG_KEYS = frozenset(
    {
        "preset",
        "system",
        "weights",
        "T_grid",
        "eta",
        "sigma_w",
        "n_runs",
        "base_seed",
        "solver",
        "out_dir",
        "allow_failures",
    }
)
SOLVER_KEYS = frozenset({"gap_tol", "feas_tol", "max_iter"})


def _eta_from_spec(spec) -> EtaPolicy:
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return EtaPolicy(kind="fixed", value=float(spec))
    if isinstance(spec, dict):
        unknown = set(spec) - {"fixed", "linear"}
        if unknown:
            raise ValueError(
                f"unknown eta keys: {sorted(unknown)} (expected 'fixed' or 'linear')"
            )
        if len(spec) != 1:
            raise ValueError(f"eta must set exactly one of 'fixed'/'linear', got {spec}")
        kind, value = next(iter(spec.items()))
        return EtaPolicy(kind=kind, value=float(value))
    raise ValueError(f"eta must be a number or a {{fixed|linear: value}} mapping, got {spec!r}")


def _solver_from_spec(spec) -> SolverSettings:
    if spec is None:
        return DEFAULT_SOLVER
    if not isinstance(spec, dict):
        raise ValueError(f"solver must be a mapping, got {spec!r}")
    unknown = set(spec) - SOLVER_KEYS
    if unknown:
        raise ValueError(
            f"unknown solver keys: {sorted(unknown)} (expected {sorted(SOLVER_KEYS)})"
        )
    kwargs = {
        "gap_tol": DEFAULT_SOLVER.gap_tol,
        "feas_tol": DEFAULT_SOLVER.feas_tol,
        "max_iter": DEFAULT_SOLVER.max_iter,
    }
    for key in spec:
        kwargs[key] = int(spec[key]) if key == "max_iter" else float(spec[key])
    return SolverSettings(**kwargs)


def parse_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read and validate a YAML experiment config.

    ``preset: benchmark`` expands to the benchmark plant with identity state
    cost and unit input cost; ``system:``/``weights:`` override either half.
    Unknown keys anywhere are rejected, naming the offending keys.
    ``overrides`` (e.g. from command-line flags) replace top-level values
    before validation.
    """
    import yaml

    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ValueError(f"{path}: not valid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a mapping")
    if overrides:
        raw = {**raw, **{k: v for k, v in overrides.items() if v is not None}}

    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise ValueError(
            f"{path}: unknown config keys: {sorted(unknown)} "
            f"(expected a subset of {sorted(CONFIG_KEYS)})"
        )

    preset = raw.get("preset")
    if preset is not None and preset != "benchmark":
        raise ValueError(f"{path}: unknown preset {preset!r} (expected 'benchmark')")
    system_spec = raw.get("system", "benchmark" if preset else None)
    if system_spec is None:
        raise ValueError(f"{path}: provide 'preset: benchmark' or a 'system:' mapping")
    system = system_from_spec(system_spec)
    weights = weights_from_spec(
        raw.get("weights", "identity"), system.n, system.m
    )

    if "T_grid" not in raw:
        raise ValueError(f"{path}: missing required key 'T_grid'")
    if "eta" not in raw:
        raise ValueError(f"{path}: missing required key 'eta'")
    sigma_w = float(raw.get("sigma_w", system.sigma_w))

    try:
        return ExperimentConfig(
            system=system,
            weights=weights,
            T_grid=tuple(raw["T_grid"]),
            eta_policy=_eta_from_spec(raw["eta"]),
            sigma_w=sigma_w,
            n_runs=int(raw.get("n_runs", 10)),
            base_seed=int(raw.get("base_seed", 0)),
            solver=_solver_from_spec(raw.get("solver")),
            out_dir=raw.get("out_dir"),
            allow_failures=bool(raw.get("allow_failures", False)),
        )
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def cell_seed(base_seed: int, T: int, run_idx: int) -> int:
    """Derived RNG seed for one grid cell, stable across platforms and pool order."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(T, run_idx))
    return int(ss.generate_state(1)[0])


# ---------------------------------------------------------------------------
# records and summaries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentRecord:
    """One solved cell.  Norms are spectral; ``K_entries`` is K row-major.

    ``wall_time`` is measured but excluded from CSV serialization so that
    re-runs are byte-identical; see the module docstring.
    """

    experiment_id: str
    seed: int
    T: int
    eta: float
    sigma_w: float
    solver_status: str
    norm_K: float | None
    K_entries: tuple[float, ...] | None
    norm_X0Y: float
    norm_X0Y_minus_I: float
    norm_U0Y: float
    norm_X1Y: float
    objective: float
    rp_bound: float | None
    sigma_min_DT: float
    wall_time: float

    def __post_init__(self):
        for name in ("norm_K", "norm_X0Y", "norm_X0Y_minus_I", "norm_U0Y", "norm_X1Y"):
            value = getattr(self, name)
            if value is not None and not value >= 0:
                raise ValueError(f"{name} must be nonnegative, got {value}")


CSV_COLUMNS = tuple(f.name for f in dataclasses.fields(ExperimentRecord))


@dataclass(frozen=True)
class SummaryRow:
    """Aggregates over the Optimal records of one (experiment, horizon) group."""

    experiment_id: str
    T: int
    runs: int
    optimal_runs: int
    mean_norm_K: float | None
    var_norm_K: float | None
    mean_norm_X0Y: float | None
    mean_norm_X0Y_minus_I: float | None
    mean_norm_U0Y: float | None
    mean_norm_X1Y: float | None
    mean_objective: float | None


SUMMARY_COLUMNS = tuple(f.name for f in dataclasses.fields(SummaryRow))


def summarize(records: list[ExperimentRecord]) -> list[SummaryRow]:
    """Per-(experiment_id, T) means over Optimal records, in sorted order.

    Non-Optimal cells count toward ``runs`` but not toward the statistics.
    Variance is the unbiased sample variance (0.0 for a single run).
    """
    groups: dict[tuple[str, int], list[ExperimentRecord]] = {}
    for rec in records:
        groups.setdefault((rec.experiment_id, rec.T), []).append(rec)

    rows = []
    for (exp_id, T), cell in sorted(groups.items()):
        good = [r for r in cell if r.solver_status == "Optimal"]
        if good:
            def mean(attr):
                return float(np.mean([getattr(r, attr) for r in good]))

            norm_k = np.array([r.norm_K for r in good], dtype=float)
            row = SummaryRow(
                experiment_id=exp_id,
                T=T,
                runs=len(cell),
                optimal_runs=len(good),
                mean_norm_K=float(norm_k.mean()),
                var_norm_K=float(norm_k.var(ddof=1)) if len(good) > 1 else 0.0,
                mean_norm_X0Y=mean("norm_X0Y"),
                mean_norm_X0Y_minus_I=mean("norm_X0Y_minus_I"),
                mean_norm_U0Y=mean("norm_U0Y"),
                mean_norm_X1Y=mean("norm_X1Y"),
                mean_objective=mean("objective"),
            )
        else:
            row = SummaryRow(exp_id, T, len(cell), 0, None, None, None, None, None, None, None)
        rows.append(row)
    return rows


def _csv_cell(name: str, value) -> str:
    if name == "wall_time" or value is None:
        return ""
    if name == "K_entries":
        return ";".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(records: list[ExperimentRecord], path) -> Path:
    """Write ``records`` to ``path`` with one column per record field.

    Raises ValueError on an empty record list (no file is created).
    """
    if not records:
        raise ValueError("no records to write")
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(
                [_csv_cell(name, getattr(rec, name)) for name in CSV_COLUMNS]
            )
    return path


def emit_summary_csv(rows: list[SummaryRow], path) -> Path:
    if not rows:
        raise ValueError("no summary rows to write")
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([_csv_cell(name, getattr(row, name)) for name in SUMMARY_COLUMNS])
    return path


def emit_plots(summary: list[SummaryRow], out_dir) -> list[Path]:
    """Render gain-vs-horizon and variable-norms-vs-horizon SVG charts."""
    if not summary:
        raise ValueError("no summary rows to plot")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "ddd-lqr-lab"
    out_dir = Path(out_dir)
    paths = []

    by_id: dict[str, list[SummaryRow]] = {}
    for row in summary:
        by_id.setdefault(row.experiment_id, []).append(row)

    fig, ax = plt.subplots(figsize=(6, 4))
    for exp_id, rows in sorted(by_id.items()):
        rows = [r for r in rows if r.mean_norm_K is not None]
        if not rows:
            continue
        Ts = [r.T for r in rows]
        means = np.array([r.mean_norm_K for r in rows])
        stds = np.sqrt([r.var_norm_K for r in rows])
        ax.errorbar(Ts, means, yerr=stds, marker="o", capsize=3, label=exp_id)
    ax.set_xlabel("trajectory length T")
    ax.set_ylabel("spectral norm of K")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    gain_path = out_dir / "gain-vs-T.svg"
    fig.savefig(gain_path, metadata={"Date": None})
    plt.close(fig)
    paths.append(gain_path)

    fig, ax = plt.subplots(figsize=(6, 4))
    for exp_id, rows in sorted(by_id.items()):
        rows = [r for r in rows if r.mean_norm_K is not None]
        if not rows:
            continue
        Ts = [r.T for r in rows]
        suffix = f" [{exp_id}]" if len(by_id) > 1 else ""
        ax.plot(Ts, [r.mean_norm_U0Y for r in rows], marker="o", label="|U0 Y|" + suffix)
        ax.plot(Ts, [r.mean_norm_X0Y for r in rows], marker="s", label="|X0 Y|" + suffix)
        ax.plot(Ts, [r.mean_norm_X1Y for r in rows], marker="^", label="|X1 Y|" + suffix)
        ax.plot(Ts, [r.mean_norm_K for r in rows], marker="d", label="|K|" + suffix)
    ax.set_xlabel("trajectory length T")
    ax.set_ylabel("mean spectral norm")
    ax.set_xscale("log")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    var_path = out_dir / "variables-vs-T.svg"
    fig.savefig(var_path, metadata={"Date": None})
    plt.close(fig)
    paths.append(var_path)
    return paths


# ---------------------------------------------------------------------------
# cell execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _CellTask:
    experiment_id: str
    program: str  # "ce" or "rp"
    system: LtiSystem
    weights: LqrWeights
    T: int
    run_idx: int
    seed: int
    eta: float
    solver: SolverSettings
    want_report: bool


def _record_from_solution(task: _CellTask, data, sol, wall: float) -> ExperimentRecord:
    Y = sol.Y
    X0Y = data.X0 @ Y
    eye = np.eye(data.n)
    K_entries = None
    norm_K = None
    if sol.K is not None:
        K_entries = tuple(float(v) for v in sol.K.ravel())
        norm_K = float(np.linalg.norm(sol.K, 2))
    try:
        bound = rp_gain_bound(data, task.weights, task.eta) if task.program == "rp" else None
    except ValueError:
        bound = None
    sigma_min_DT = float(np.linalg.svd(combined_matrix(data), compute_uv=False)[-1])
    return ExperimentRecord(
        experiment_id=task.experiment_id,
        seed=task.seed,
        T=task.T,
        eta=task.eta,
        sigma_w=data.sigma_w,
        solver_status=sol.solver_status.value,
        norm_K=norm_K,
        K_entries=K_entries,
        norm_X0Y=float(np.linalg.norm(X0Y, 2)),
        norm_X0Y_minus_I=float(np.linalg.norm(X0Y - eye, 2)),
        norm_U0Y=float(np.linalg.norm(data.U0 @ Y, 2)),
        norm_X1Y=float(np.linalg.norm(data.X1 @ Y, 2)),
        objective=float(sol.objective),
        rp_bound=bound,
        sigma_min_DT=sigma_min_DT,
        wall_time=wall,
    )


def _run_cell(task: _CellTask) -> tuple[ExperimentRecord, dict | None]:
    """Simulate and solve one cell; optionally attach the closed-form report."""
    data = simulate(task.system, task.T, task.seed)
    start = time.perf_counter()
    if task.program == "ce":
        sol = solve_ce(data, task.weights, settings=task.solver)
    else:
        sol = solve_rp(data, task.weights, task.eta, settings=task.solver)
    wall = time.perf_counter() - start
    record = _record_from_solution(task, data, sol, wall)

    report = None
    if task.want_report:
        rho = None
        if task.system.sigma_w > 0:
            try:
                rho = empirical_rho(data.X0, stacked_input(data, "isotropic"))
            except ValueError:
                rho = None
        report = oracle_report(
            data,
            task.weights,
            eta=task.eta,
            Y=sol.Y if sol.solver_status.value == "Optimal" else None,
            system=task.system,
            rho=rho,
        ).to_dict()
        report["experiment_id"] = task.experiment_id
        report["seed"] = task.seed
    return record, report


def _execute(tasks: list[_CellTask], jobs: int):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = [_run_cell(task) for task in tasks]
    records = [rec for rec, _ in results]
    reports = [rep for _, rep in results if rep is not None]
    order = sorted(
        range(len(records)),
        key=lambda i: (records[i].experiment_id, records[i].T, records[i].seed),
    )
    return [records[i] for i in order], reports


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def run_rp_sweep(
    config: ExperimentConfig, jobs: int = 1, experiment_id: str | None = None
) -> tuple[list[ExperimentRecord], list[SummaryRow], list[dict]]:
    """Solve the regularized program over the full (T_grid x n_runs) grid.

    Returns (records, summary rows, closed-form reports for run 0 of each T).
    Solver failures are recorded with their status and skipped by the
    summary; they do not abort the sweep.
    """
    if experiment_id is None:
        experiment_id = (
            "rp-fixed" if config.eta_policy.kind == "fixed" else "rp-growing"
        )
    tasks = [
        _CellTask(
            experiment_id=experiment_id,
            program="rp",
            system=config.system,
            weights=config.weights,
            T=T,
            run_idx=run_idx,
            seed=cell_seed(config.base_seed, T, run_idx),
            eta=config.eta_policy.eta_for(T),
            solver=config.solver,
            want_report=run_idx == 0,
        )
        for T in config.T_grid
        for run_idx in range(config.n_runs)
    ]
    records, reports = _execute(tasks, jobs)
    return records, summarize(records), reports


@dataclass(frozen=True)
class CeCaseOutcome:
    """Comparison of one certainty-equivalence case against the closed forms.

    ``max_err_vs_lqr`` and ``max_err_vs_prediction`` are worst-case entrywise
    gain errors over the Optimal runs; radii are of the true closed loop
    A - B K with the recovered gain.
    """

    case: str
    T: int
    sigma_w: float
    n_runs: int
    optimal_runs: int
    all_full_rank: bool
    max_err_vs_lqr: float
    max_err_vs_prediction: float
    max_norm_K: float
    max_norm_X0Y_minus_I: float
    max_norm_U0Y: float
    max_norm_X1Y: float
    max_objective_gap: float
    min_closed_loop_radius: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def run_ce_experiment(
    config: ExperimentConfig, jobs: int = 1
) -> tuple[list[ExperimentRecord], list[SummaryRow], list[dict], list[CeCaseOutcome]]:
    """Run the noise sensitivity demonstration on the configured plant.

    Two cases per horizon in the grid: exactly noise-free data, and process
    noise of variance 1e-5.  Each solved gain is compared against the true
    LQR gain and against the closed-form prediction (zero gain on
    full-row-rank data, the identified-plant gain otherwise).  The
    configured ``sigma_w`` is not used; the cases pin their own noise.
    """
    K_lqr = solve_dare(config.system, config.weights).K
    trace_q = float(np.trace(config.weights.Q))
    cases = [("ce-noiseless", 0.0), ("ce-low-noise", CE_LOW_NOISE_SIGMA)]

    tasks = []
    for case_id, sigma in cases:
        plant = config.system.replace(sigma_w=sigma)
        for T in config.T_grid:
            for run_idx in range(config.n_runs):
                tasks.append(
                    _CellTask(
                        experiment_id=case_id,
                        program="ce",
                        system=plant,
                        weights=config.weights,
                        T=T,
                        run_idx=run_idx,
                        seed=cell_seed(config.base_seed, T, run_idx),
                        eta=0.0,
                        solver=config.solver,
                        want_report=run_idx == 0,
                    )
                )
    records, reports = _execute(tasks, jobs)

    outcomes = []
    for case_id, sigma in cases:
        plant = config.system.replace(sigma_w=sigma)
        for T in config.T_grid:
            cell = [r for r in records if r.experiment_id == case_id and r.T == T]
            good = [r for r in cell if r.solver_status == "Optimal" and r.K_entries]
            err_lqr = err_pred = norm_k = 0.0
            radius = float("inf")
            full_rank = True
            n, m = plant.n, plant.m
            for rec in good:
                K = np.array(rec.K_entries).reshape(m, n)
                data = simulate(plant, T, rec.seed)
                pred = ce_prediction(data, config.weights)
                full_rank &= pred.path == "zero-gain"
                err_lqr = max(err_lqr, float(np.abs(K - K_lqr).max()))
                err_pred = max(err_pred, float(np.abs(K - pred.K).max()))
                norm_k = max(norm_k, rec.norm_K)
                radius = min(radius, spectral_radius(closed_loop(plant, K)))
            outcomes.append(
                CeCaseOutcome(
                    case=case_id,
                    T=T,
                    sigma_w=sigma,
                    n_runs=len(cell),
                    optimal_runs=len(good),
                    all_full_rank=full_rank,
                    max_err_vs_lqr=err_lqr,
                    max_err_vs_prediction=err_pred,
                    max_norm_K=norm_k,
                    max_norm_X0Y_minus_I=max((r.norm_X0Y_minus_I for r in good), default=0.0),
                    max_norm_U0Y=max((r.norm_U0Y for r in good), default=0.0),
                    max_norm_X1Y=max((r.norm_X1Y for r in good), default=0.0),
                    max_objective_gap=max(
                        (abs(r.objective - trace_q) for r in good), default=0.0
                    ),
                    min_closed_loop_radius=radius,
                )
            )
    return records, summarize(records), reports, outcomes


def write_outputs(
    out_dir,
    config: ExperimentConfig,
    experiment: str,
    records: list[ExperimentRecord],
    summary: list[SummaryRow],
    reports: list[dict],
    outcomes: list[CeCaseOutcome] | None = None,
    jobs: int = 1,
) -> dict:
    """Emit records.csv, summary.csv, SVG charts, reports, and the manifest.

    Returns the manifest dict (also written to ``run-manifest.json``).
    """
    import scipy

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    emit_csv(records, out_dir / "records.csv")
    emit_summary_csv(summary, out_dir / "summary.csv")
    emit_plots(summary, out_dir)
    with open(out_dir / "oracle-reports.json", "w", encoding="utf-8") as fh:
        json.dump(reports, fh, indent=2)
    if outcomes is not None:
        with open(out_dir / "ce-comparison.json", "w", encoding="utf-8") as fh:
            json.dump([o.to_dict() for o in outcomes], fh, indent=2)

    manifest = {
        "experiment": experiment,
        "config": config.to_dict(),
        "versions": {
            "ddd-lqr-lab": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "jobs": jobs,
        "records": len(records),
        "total_wall_time": float(sum(r.wall_time for r in records)),
        "cell_wall_times": [
            {
                "experiment_id": r.experiment_id,
                "T": r.T,
                "seed": r.seed,
                "status": r.solver_status,
                "wall_time": r.wall_time,
            }
            for r in records
        ],
    }
    with open(out_dir / "run-manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


def all_cells_ok(records: list[ExperimentRecord]) -> bool:
    """True when every cell reports Optimal (the CLI's exit-code criterion)."""
    return all(r.solver_status == "Optimal" for r in records)

import json

import numpy as np
import pytest

from ddd_lqr_lab.experiments import (
    CSV_COLUMNS,
    DEFAULT_SOLVER,
    EtaPolicy,
    ExperimentConfig,
    ExperimentRecord,
    all_cells_ok,
    cell_seed,
    emit_csv,
    emit_plots,
    parse_config,
    run_ce_experiment,
    run_rp_sweep,
    summarize,
    write_outputs,
)
from ddd_lqr_lab.lti import benchmark_system


def _rec(**kw):
    base = dict(
        experiment_id="rp-fixed",
        seed=1,
        T=25,
        eta=1.0,
        sigma_w=1.0,
        solver_status="Optimal",
        norm_K=0.02,
        K_entries=(0.01, -0.02),
        norm_X0Y=1.0,
        norm_X0Y_minus_I=0.001,
        norm_U0Y=0.02,
        norm_X1Y=0.01,
        objective=2.5,
        rp_bound=100.0,
        sigma_min_DT=3.0,
        wall_time=0.5,
    )
    base.update(kw)
    return ExperimentRecord(**base)


def _tiny_config(plant, weights, **kw):
    base = dict(
        system=plant,
        weights=weights,
        T_grid=(10, 16),
        eta_policy=EtaPolicy("fixed", 1.0),
        sigma_w=1.0,
        n_runs=2,
        base_seed=3,
    )
    base.update(kw)
    return ExperimentConfig(**base)


# ---------------------------------------------------------------------------
# policies, configs, seeds
# ---------------------------------------------------------------------------


def test_eta_policy():
    assert EtaPolicy("fixed", 2.0).eta_for(100) == 2.0
    assert EtaPolicy("linear", 10.0).eta_for(25) == 250.0
    with pytest.raises(ValueError, match="kind must be"):
        EtaPolicy("quadratic", 1.0)
    with pytest.raises(ValueError, match="must be positive"):
        EtaPolicy("fixed", 0.0)


def test_config_validation(plant, weights):
    with pytest.raises(ValueError, match="strictly increasing"):
        _tiny_config(plant, weights, T_grid=(50, 25))
    with pytest.raises(ValueError, match="must not be empty"):
        _tiny_config(plant, weights, T_grid=())
    with pytest.raises(ValueError, match="n_runs"):
        _tiny_config(plant, weights, n_runs=0)
    with pytest.raises(ValueError, match="nonnegative"):
        _tiny_config(plant, weights, sigma_w=-1.0)


def test_config_pins_the_noise_scale(plant, weights):
    config = _tiny_config(plant.replace(sigma_w=0.3), weights, sigma_w=0.7)
    assert config.system.sigma_w == 0.7
    doc = config.to_dict()
    assert doc["sigma_w"] == 0.7
    assert doc["eta"] == {"fixed": 1.0}
    assert doc["T_grid"] == [10, 16]
    json.dumps(doc)


def test_cell_seed_is_stable_and_spread():
    assert cell_seed(0, 25, 0) == cell_seed(0, 25, 0)
    seeds = {cell_seed(0, T, i) for T in (25, 50) for i in range(10)}
    assert len(seeds) == 20
    assert cell_seed(1, 25, 0) != cell_seed(0, 25, 0)


def test_record_rejects_negative_norms():
    with pytest.raises(ValueError, match="norm_U0Y"):
        _rec(norm_U0Y=-0.5)


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------


def _write(tmp_path, text, name="exp.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_config_preset(tmp_path):
    path = _write(
        tmp_path,
        "preset: benchmark\nT_grid: [25, 50]\neta: 1.0\n",
    )
    config = parse_config(path)
    assert np.array_equal(config.system.A, benchmark_system().A)
    assert np.array_equal(config.weights.Q, np.eye(2))
    assert config.T_grid == (25, 50)
    assert config.eta_policy == EtaPolicy("fixed", 1.0)
    assert config.sigma_w == 1.0  # inherited from the preset plant
    assert config.n_runs == 10 and config.base_seed == 0
    assert config.solver == DEFAULT_SOLVER


def test_parse_config_full(tmp_path):
    path = _write(
        tmp_path,
        "system:\n  A: [[0.5]]\n  B: [[1.0]]\n"
        "weights:\n  Q: [[2.0]]\n  R: [[1.0]]\n"
        "T_grid: [10]\neta: {linear: 10.0}\nsigma_w: 0.5\n"
        "n_runs: 3\nbase_seed: 7\nsolver: {gap_tol: 1.0e-7}\n"
        "out_dir: results\nallow_failures: true\n",
    )
    config = parse_config(path)
    assert config.system.A[0, 0] == 0.5 and config.sigma_w == 0.5
    assert config.weights.Q[0, 0] == 2.0
    assert config.eta_policy == EtaPolicy("linear", 10.0)
    assert config.solver.gap_tol == 1e-7
    assert config.solver.feas_tol == DEFAULT_SOLVER.feas_tol
    assert str(config.out_dir) == "results"
    assert config.allow_failures


def test_parse_config_overrides(tmp_path):
    path = _write(tmp_path, "preset: benchmark\nT_grid: [10]\neta: 1.0\n")
    config = parse_config(path, overrides={"base_seed": 9, "out_dir": None})
    assert config.base_seed == 9
    assert config.out_dir is None  # None overrides are skipped, key was absent


def test_parse_config_errors(tmp_path):
    bad = [
        ("T_grid: [10]\neta: 1.0\n", "provide 'preset"),
        ("preset: sandbox9\nT_grid: [10]\neta: 1.0\n", "unknown preset"),
        ("preset: benchmark\neta: 1.0\n", "missing required key 'T_grid'"),
        ("preset: benchmark\nT_grid: [10]\n", "missing required key 'eta'"),
        ("preset: benchmark\nT_grid: [10]\neta: 1.0\nfrobnicate: 1\n", "unknown config keys"),
        ("preset: benchmark\nT_grid: [50, 25]\neta: 1.0\n", "strictly increasing"),
        ("preset: benchmark\nT_grid: [10]\neta: {fixed: 1, linear: 2}\n", "exactly one"),
        ("preset: benchmark\nT_grid: [10]\neta: 1.0\nsolver: {warp: 9}\n", "unknown solver keys"),
    ]
    for text, match in bad:
        with pytest.raises(ValueError, match=match):
            parse_config(_write(tmp_path, text))
    # every error names the offending file
    with pytest.raises(ValueError, match="other.yaml"):
        parse_config(_write(tmp_path, bad[-1][0], name="other.yaml"))


# ---------------------------------------------------------------------------
# records, summaries, emission
# ---------------------------------------------------------------------------


def test_summarize():
    records = [
        _rec(seed=1, norm_K=0.02),
        _rec(seed=2, norm_K=0.04),
        _rec(seed=3, solver_status="IterLimit", norm_K=None, K_entries=None),
        _rec(seed=1, T=50, norm_K=0.01),
        _rec(seed=1, T=100, solver_status="NumericalTrouble", norm_K=None, K_entries=None),
    ]
    rows = summarize(records)
    assert [(r.T, r.runs, r.optimal_runs) for r in rows] == [
        (25, 3, 2), (50, 1, 1), (100, 1, 0),
    ]
    assert rows[0].mean_norm_K == pytest.approx(0.03)
    assert rows[0].var_norm_K == pytest.approx(np.var([0.02, 0.04], ddof=1))
    assert rows[1].var_norm_K == 0.0  # single run
    assert rows[2].mean_norm_K is None


def test_emit_csv(tmp_path):
    path = tmp_path / "records.csv"
    with pytest.raises(ValueError, match="no records"):
        emit_csv([], path)
    assert not path.exists()

    emit_csv([_rec(seed=1), _rec(seed=2, rp_bound=None)], path)
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    assert lines[0] == ",".join(CSV_COLUMNS)
    cells = lines[1].split(",")
    by_name = dict(zip(CSV_COLUMNS, cells))
    assert by_name["wall_time"] == ""  # timing never lands in the CSV
    assert by_name["K_entries"] == "0.01;-0.02"
    assert by_name["norm_K"] == "0.02"
    assert lines[2].split(",")[CSV_COLUMNS.index("rp_bound")] == ""


def test_emit_plots(tmp_path):
    rows = summarize([_rec(seed=1), _rec(seed=2, T=50, norm_K=0.01)])
    paths = emit_plots(rows, tmp_path)
    assert [p.name for p in paths] == ["gain-vs-T.svg", "variables-vs-T.svg"]
    for p in paths:
        assert p.stat().st_size > 1000


def test_all_cells_ok():
    assert all_cells_ok([_rec(), _rec(seed=2)])
    assert not all_cells_ok([_rec(), _rec(seed=2, solver_status="IterLimit")])


# ---------------------------------------------------------------------------
# running experiments
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def tiny_sweep(plant, weights):
    config = _tiny_config(plant, weights)
    return config, run_rp_sweep(config, jobs=1)


def test_rp_sweep_structure(tiny_sweep):
    config, (records, summary, reports) = tiny_sweep
    assert len(records) == 4
    assert all(r.experiment_id == "rp-fixed" for r in records)
    assert [r.T for r in records] == [10, 10, 16, 16]
    assert {r.seed for r in records} == {
        cell_seed(3, T, i) for T in (10, 16) for i in range(2)
    }
    assert all(r.eta == 1.0 for r in records)
    assert len(summary) == 2 and summary[0].T == 10
    assert len(reports) == 2  # one closed-form report per horizon
    assert all(rep["seed"] == cell_seed(3, rep["T"], 0) for rep in reports)


def _equal_except_wall(a, b):
    import dataclasses

    for f in dataclasses.fields(a):
        if f.name == "wall_time":
            continue
        if getattr(a, f.name) != getattr(b, f.name):
            return False
    return True


def test_rp_sweep_is_deterministic_and_pool_invariant(tiny_sweep):
    config, (records, _, _) = tiny_sweep
    again, _, _ = run_rp_sweep(config, jobs=1)
    pooled, _, _ = run_rp_sweep(config, jobs=2)
    # wall times differ; everything that lands in the CSV must not
    for a, b in zip(records, again):
        assert _equal_except_wall(a, b)
    for a, b in zip(records, pooled):
        assert _equal_except_wall(a, b)


def test_write_outputs_round_trip(tmp_path, tiny_sweep):
    config, (records, summary, reports) = tiny_sweep
    manifest = write_outputs(tmp_path, config, "rp-fixed", records, summary, reports)
    for name in (
        "records.csv", "summary.csv", "gain-vs-T.svg",
        "variables-vs-T.svg", "oracle-reports.json", "run-manifest.json",
    ):
        assert (tmp_path / name).exists(), name
    loaded = json.loads((tmp_path / "run-manifest.json").read_text())
    assert loaded["experiment"] == "rp-fixed"
    assert loaded["records"] == len(records)
    assert loaded["config"]["T_grid"] == [10, 16]
    assert manifest["jobs"] == 1
    assert len(json.loads((tmp_path / "oracle-reports.json").read_text())) == 2


def test_records_csv_is_byte_identical_across_runs(tmp_path, tiny_sweep):
    config, (records, _, _) = tiny_sweep
    again, _, _ = run_rp_sweep(config, jobs=2)
    emit_csv(records, tmp_path / "a.csv")
    emit_csv(again, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_run_ce_experiment(plant, weights):
    config = _tiny_config(plant, weights, T_grid=(50,), n_runs=3)
    records, summary, reports, outcomes = run_ce_experiment(config)
    assert len(records) == 6  # two cases x three runs
    assert {r.experiment_id for r in records} == {"ce-noiseless", "ce-low-noise"}
    assert all(r.eta == 0.0 for r in records)
    assert all_cells_ok(records)

    by_case = {o.case: o for o in outcomes}
    noiseless = by_case["ce-noiseless"]
    assert noiseless.optimal_runs == 3
    assert not noiseless.all_full_rank  # noise-free data is rank-deficient
    assert noiseless.max_err_vs_lqr < 1e-3
    assert noiseless.max_err_vs_prediction < 1e-3
    assert noiseless.min_closed_loop_radius < 1.0

    low = by_case["ce-low-noise"]
    assert low.sigma_w == pytest.approx(np.sqrt(1e-5))
    assert low.all_full_rank
    assert low.max_norm_K < 1e-4
    assert low.max_err_vs_prediction < 1e-4  # prediction is the zero gain
    assert low.max_norm_X0Y_minus_I < 1e-6
    assert low.max_norm_U0Y < 1e-6
    assert low.max_objective_gap < 1e-6
    assert low.min_closed_loop_radius > 1.005  # tiny gains cannot stabilize


def test_ce_outcomes_serialize(plant, weights):
    config = _tiny_config(plant, weights, T_grid=(12,), n_runs=1)
    *_, outcomes = run_ce_experiment(config)
    json.dumps([o.to_dict() for o in outcomes])

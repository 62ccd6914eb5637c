import time

import numpy as np
import pytest

from ddd_lqr_lab.experiments import EtaPolicy, ExperimentConfig, run_rp_sweep
from ddd_lqr_lab.lti import benchmark_system, identity_weights
from ddd_lqr_lab.riccati import solve_dare


@pytest.fixture(scope="session")
def seed():
    return 12345


@pytest.fixture
def rng(seed):
    return np.random.default_rng(seed)


@pytest.fixture(scope="session")
def plant():
    # the benchmark two-state plant with unit excitation and unit process noise
    return benchmark_system(sigma_u=1.0, sigma_w=1.0)


@pytest.fixture(scope="session")
def weights():
    return identity_weights()


@pytest.fixture(scope="session")
def lqr(plant, weights):
    return solve_dare(plant, weights)


@pytest.fixture(scope="session")
def rp_sweep_fixed(plant, weights):
    """The eta=1 Monte Carlo sweep, run once per session on four workers.

    Shared by the acceptance criteria (gain decay, variable norms, per-run
    bound) and by the theoretical-bound consistency test.
    """
    config = ExperimentConfig(
        system=plant,
        weights=weights,
        T_grid=(25, 50, 100, 200),
        eta_policy=EtaPolicy("fixed", 1.0),
        sigma_w=1.0,
        n_runs=10,
        base_seed=0,
    )
    start = time.perf_counter()
    records, summary, reports = run_rp_sweep(config, jobs=4, experiment_id="rp-fixed")
    elapsed = time.perf_counter() - start
    return {
        "config": config,
        "records": records,
        "summary": summary,
        "reports": reports,
        "elapsed": elapsed,
    }

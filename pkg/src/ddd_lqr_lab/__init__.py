"""Direct data-driven LQR lab.

Solves the certainty-equivalent and robustness-promoting SDPs for LQR design
from raw state-input trajectories, checks them against closed-form
characterizations, and stress-tests their noise sensitivity with seeded
Monte Carlo sweeps.
"""

__version__ = "0.1.0"

from .excitation import (
    BoundReport,
    FundamentalRankReport,
    PeReport,
    bound_report,
    empirical_rho,
    fundamental_rank_check,
    hankel,
    pe_check,
)
from .experiments import (
    ExperimentConfig,
    ExperimentRecord,
    parse_config,
    run_ce_experiment,
    run_rp_sweep,
)
from .ipm import SolverSettings
from .lmi import LmiBlock, LmiProblem, SolveResult, SolveStatus
from .lti import (
    LqrWeights,
    LtiSystem,
    TrajectoryData,
    benchmark_system,
    combined_matrix,
    controllability_check,
    identity_weights,
    simulate,
    stacked_input,
)
from .oracle import (
    OracleReport,
    ce_prediction,
    min_norm_solution,
    oracle_report,
    psi_matrix,
    rp_bound_theoretical,
    rp_gain_bound,
    stabilization_condition,
)
from .programs import (
    DddSolution,
    build_ce,
    build_rp,
    recover_gain,
    solve_ce,
    solve_rp,
    verify_feasibility,
)
from .riccati import DareSolution, average_cost, closed_loop, is_stabilizing, solve_dare

import numpy as np
import pytest

from ddd_lqr_lab.lmi import SolveStatus
from ddd_lqr_lab.lti import LqrWeights, LtiSystem, TrajectoryData, simulate
from ddd_lqr_lab.programs import (
    build_ce,
    build_rp,
    recover_gain,
    reduced_objective_ce,
    reduced_objective_rp,
    solve_ce,
    solve_rp,
    sym_sqrt,
    verify_feasibility,
)


def _sym(M):
    return 0.5 * (M + M.T)


def _unpack(data, z):
    n, m, T = data.n, data.m, data.T
    Y = np.asarray(z)[: T * n].reshape(T, n)
    pairs = [(i, j) for i in range(m) for j in range(i + 1)]
    X = np.zeros((m, m))
    for k, (i, j) in enumerate(pairs):
        X[i, j] = X[j, i] = z[T * n + k]
    return Y, X


@pytest.fixture(scope="module")
def noisy_data(plant):
    return simulate(plant, T=8, seed=2)


def test_sym_sqrt():
    M = np.array([[4.0, 0.0], [0.0, 9.0]])
    S = sym_sqrt(M)
    assert np.abs(S @ S - M).max() < 1e-12
    with pytest.raises(ValueError, match="positive definite"):
        sym_sqrt(np.diag([1.0, 0.0]))


def test_build_ce_bookkeeping():
    scalar = LtiSystem(A=np.array([[0.5]]), B=np.array([[1.0]]), sigma_w=1.0)
    system_data = simulate(scalar, T=3, seed=0)
    problem = build_ce(system_data, LqrWeights(Q=np.eye(1), R=np.eye(1)))
    assert problem.num_vars == 4  # 3 entries of Y plus scalar X
    assert tuple(b.size for b in problem.blocks) == (2, 2)
    assert problem.eq_matrix is None  # n = 1 needs no symmetry rows


def test_ce_objective_encodes_the_trace(noisy_data, weights, rng):
    problem = build_ce(noisy_data, weights)
    z = rng.standard_normal(problem.num_vars)
    Y, X = _unpack(noisy_data, z)
    expected = np.trace(weights.Q @ noisy_data.X0 @ Y) + np.trace(X)
    assert float(problem.c @ z) == pytest.approx(expected, rel=1e-12)


def test_ce_blocks_evaluate_to_the_data_products(noisy_data, weights, rng):
    problem = build_ce(noisy_data, weights)
    z = rng.standard_normal(problem.num_vars)
    Y, X = _unpack(noisy_data, z)
    G = noisy_data.X0 @ Y
    H = noisy_data.X1 @ Y
    RU = sym_sqrt(weights.R) @ noisy_data.U0 @ Y
    block_a = np.block([[_sym(G) - np.eye(2), H], [H.T, _sym(G)]])
    block_b = np.block([[X, RU], [RU.T, _sym(G)]])
    assert np.abs(problem.blocks[0].evaluate(z) - block_a).max() < 1e-12
    assert np.abs(problem.blocks[1].evaluate(z) - block_b).max() < 1e-12


def test_ce_equalities_encode_skew_part(noisy_data, weights, rng):
    problem = build_ce(noisy_data, weights)
    assert problem.num_equalities == 1  # n = 2: one off-diagonal pair
    z = rng.standard_normal(problem.num_vars)
    Y, _ = _unpack(noisy_data, z)
    G = noisy_data.X0 @ Y
    assert float((problem.eq_matrix @ z)[0]) == pytest.approx(
        G[0, 1] - G[1, 0], rel=1e-12
    )
    assert np.array_equal(problem.eq_rhs, [0.0])


def test_build_rp_shapes(noisy_data, weights):
    T, n, m = noisy_data.T, noisy_data.n, noisy_data.m
    head = T * n + m * (m + 1) // 2
    full = build_rp(noisy_data, weights, eta=1.0, form="full")
    assert full.num_vars == head + T * (T + 1) // 2
    assert tuple(b.size for b in full.blocks) == (2 * n, m + n, T + n)
    epi = build_rp(noisy_data, weights, eta=1.0, form="epigraph")
    assert epi.num_vars == head + T
    assert tuple(b.size for b in epi.blocks) == (2 * n, m + n) + (n + 1,) * T


def test_rp_slack_blocks_evaluate(noisy_data, weights, rng):
    T, n, m = noisy_data.T, noisy_data.n, noisy_data.m
    head = T * n + m * (m + 1) // 2
    full = build_rp(noisy_data, weights, eta=1.0, form="full")
    z = rng.standard_normal(full.num_vars)
    Y, _ = _unpack(noisy_data, z)
    pairs = [(i, j) for i in range(T) for j in range(i + 1)]
    S = np.zeros((T, T))
    for k, (i, j) in enumerate(pairs):
        S[i, j] = S[j, i] = z[head + k]
    G = _sym(noisy_data.X0 @ Y)
    expected = np.block([[S, Y], [Y.T, G]])
    assert np.abs(full.blocks[2].evaluate(z) - expected).max() < 1e-12

    epi = build_rp(noisy_data, weights, eta=1.0, form="epigraph")
    z = rng.standard_normal(epi.num_vars)
    Y, _ = _unpack(noisy_data, z)
    G = _sym(noisy_data.X0 @ Y)
    for i in (0, T - 1):
        got = epi.blocks[2 + i].evaluate(z)
        expected = np.zeros((n + 1, n + 1))
        expected[0, 0] = z[head + i]
        expected[0, 1:] = Y[i]
        expected[1:, 0] = Y[i]
        expected[1:, 1:] = G
        assert np.abs(got - expected).max() < 1e-12


def test_rp_objective_tail(noisy_data, weights):
    epi = build_rp(noisy_data, weights, eta=2.5, form="epigraph")
    head = noisy_data.T * noisy_data.n + 1
    assert np.array_equal(epi.c[head:], np.full(noisy_data.T, 2.5))


def test_build_rp_rejects_bad_arguments(noisy_data, weights):
    with pytest.raises(ValueError, match="eta must be positive"):
        build_rp(noisy_data, weights, eta=0.0)
    with pytest.raises(ValueError, match="eta must be positive"):
        build_rp(noisy_data, weights, eta=float("nan"))
    with pytest.raises(ValueError, match="form must be"):
        build_rp(noisy_data, weights, eta=1.0, form="banana")


def test_weights_dimension_mismatch(noisy_data):
    with pytest.raises(ValueError, match="do not match data"):
        build_ce(noisy_data, LqrWeights(Q=np.eye(3), R=np.eye(1)))


def test_short_horizon_warns(plant, weights):
    data = simulate(plant, T=4, seed=0)  # below 2n+m = 5
    with pytest.warns(UserWarning, match="underdetermined"):
        build_ce(data, weights)


def test_recover_gain_identities():
    X0 = np.eye(2)
    U0 = np.array([[3.0, 5.0]])
    assert np.array_equal(recover_gain(np.zeros((1, 2)), X0, np.eye(2)), np.zeros((1, 2)))
    K = recover_gain(U0, 2.0 * np.eye(2), np.eye(2))
    assert np.abs(K - (-U0 / 2.0)).max() < 1e-14
    with pytest.raises(ValueError, match="numerically singular"):
        recover_gain(U0, np.diag([1.0, 0.0]), np.eye(2))


def test_reduced_objective_at_the_collapse_point():
    # X0 Y = I and U0 Y = 0 make the CE objective exactly trace(Q)
    data = TrajectoryData(
        X0=np.eye(2), U0=np.zeros((1, 2)), X1=np.ones((2, 2)),
        W0=np.zeros((2, 2)), T=2, noise_mode="process", seed=0,
    )
    weights = LqrWeights(Q=np.diag([2.0, 3.0]), R=np.eye(1))
    assert reduced_objective_ce(data, weights, np.eye(2)) == pytest.approx(5.0)


def test_rp_objective_is_ce_plus_regularizer(noisy_data, weights, rng):
    Y = rng.standard_normal((noisy_data.T, 2))
    G = noisy_data.X0 @ Y
    expected_gap = 2.5 * np.trace(Y @ np.linalg.solve(G, Y.T))
    gap = reduced_objective_rp(noisy_data, weights, 2.5, Y) - reduced_objective_ce(
        noisy_data, weights, Y
    )
    assert gap == pytest.approx(expected_gap, rel=1e-9)


def test_verify_feasibility_rejects_zero():
    data = TrajectoryData(
        X0=np.eye(2), U0=np.zeros((1, 2)), X1=np.zeros((2, 2)),
        W0=np.zeros((2, 2)), T=2, noise_mode="process", seed=0,
    )
    weights = LqrWeights(Q=np.eye(2), R=np.eye(1))
    assert verify_feasibility(data, weights, np.zeros((2, 2))) == -np.inf


@pytest.fixture(scope="module")
def ce_noiseless(plant, weights):
    data = simulate(plant.replace(sigma_w=0.0), T=50, seed=0)
    return data, solve_ce(data, weights)


@pytest.fixture(scope="module")
def ce_noisy(plant, weights):
    data = simulate(plant, T=50, seed=0)
    return data, solve_ce(data, weights)


def test_solve_ce_noiseless_recovers_lqr(ce_noiseless, lqr):
    data, sol = ce_noiseless
    assert sol.solver_status == SolveStatus.OPTIMAL
    assert np.abs(sol.K - lqr.K).max() < 1e-3
    # the recovered gain satisfies its defining identity
    resid = sol.K @ (data.X0 @ sol.Y) + data.U0 @ sol.Y
    assert np.abs(resid).max() < 1e-8


def test_solve_ce_noiseless_objective_consistency(ce_noiseless, weights):
    data, sol = ce_noiseless
    assert reduced_objective_ce(data, weights, sol.Y) == pytest.approx(
        sol.objective, abs=1e-6
    )
    # trace of the epigraph matrix equals the eliminated input-cost term
    G = data.X0 @ sol.Y
    B = sym_sqrt(weights.R) @ data.U0 @ sol.Y
    assert np.trace(sol.X) == pytest.approx(
        float(np.trace(B @ np.linalg.solve(G, B.T))), abs=1e-6
    )


def test_solve_ce_noisy_collapses(ce_noisy, weights):
    data, sol = ce_noisy
    assert sol.solver_status == SolveStatus.OPTIMAL
    assert np.abs(sol.K).max() < 1e-6
    assert sol.diagnostics["norm_X0Y_minus_I"] < 1e-6
    assert sol.diagnostics["norm_U0Y"] < 1e-6
    assert sol.objective == pytest.approx(np.trace(weights.Q), abs=1e-6)
    assert verify_feasibility(data, weights, sol.Y, sol.X) > -1e-8


def test_solution_diagnostics_keys(ce_noisy):
    _, sol = ce_noisy
    expected = {
        "norm_X0Y", "norm_X0Y_minus_I", "norm_U0Y", "norm_X1Y",
        "sigma_min_X0Y", "gap", "feas", "iterations", "message",
    }
    assert expected <= set(sol.diagnostics)
    assert sol.slack is None


def test_solve_rp_forms_agree(plant, weights):
    data = simulate(plant, T=20, seed=0)
    full = solve_rp(data, weights, eta=1.0, form="full")
    epi = solve_rp(data, weights, eta=1.0, form="epigraph")
    assert full.solver_status == epi.solver_status == SolveStatus.OPTIMAL
    assert abs(full.objective - epi.objective) < 1e-6
    assert np.abs(full.K - epi.K).max() < 1e-4
    assert full.slack.shape == (20, 20)
    assert epi.slack.shape == (20,)
    # slack epigraph variables dominate the realized quadratic forms
    G = _sym(data.X0 @ epi.Y)
    rowq = np.einsum("ij,jk,ik->i", epi.Y, np.linalg.inv(G), epi.Y)
    assert np.all(epi.slack >= rowq - 1e-7)


def test_rp_regularizer_is_nonnegative_at_the_optimum(plant, weights):
    data = simulate(plant, T=15, seed=4)
    sol = solve_rp(data, weights, eta=1.0)
    assert sol.solver_status == SolveStatus.OPTIMAL
    gap = reduced_objective_rp(data, weights, 1.0, sol.Y) - reduced_objective_ce(
        data, weights, sol.Y
    )
    assert gap >= -1e-10
    assert verify_feasibility(data, weights, sol.Y) > -1e-8

import numpy as np
import pytest

from ocland.dp import (check_assumptions, dp_param_certify, dp_tabular,
                       riccati_solve)
from ocland.expect import QuadratureEngine
from ocland.feasible import Box
from ocland.model import (ControlProblem, PolicyParams, rollout,
                          tabular_value)
from ocland.registry import registry_lookup
from ocland.smooth import ExprMap


def _scalar_lq_problem(n=3, a=0.9, b=0.5, q=1.0, r=0.2):
    dyn = ExprMap([f"{a}*x0 + {b}*u0"], [("x", 1), ("u", 1)])
    cost = ExprMap(f"{q}*x0^2 + {r}*u0^2", [("x", 1), ("u", 1)], scalar=True)
    term = ExprMap(f"{q}*x0^2", [("x", 1)], scalar=True)
    return ControlProblem(
        name="lq-scalar", n=n, state_dim=1, action_dim=1,
        dynamics=[dyn] * n, stage_costs=[cost] * n, terminal_cost=term,
        action_set=Box([-50.0], [50.0]), x0=np.array([2.0]),
        eval_box=Box([-5.0], [5.0]))


def test_riccati_residual_below_1e10_on_random_instances():
    rng = np.random.default_rng(3)
    for _ in range(5):
        n, N, M = 12, 4, 2
        A = rng.normal(size=(n, N, N)) / np.sqrt(N)
        B = rng.normal(size=(n, N, M))
        V = rng.normal(size=(N, N))
        Q = V @ V.T
        R = np.eye(M) + 0.1 * np.diag(rng.uniform(size=M))
        sol = riccati_solve(A, B, Q, R, Q)
        assert sol.residual(A, B, R) <= 1e-10
        # value matrices stay symmetric PSD
        for P in sol.values:
            assert np.allclose(P, P.T)
            assert np.linalg.eigvalsh(P)[0] >= -1e-9


def test_riccati_gains_are_optimal_for_the_rolled_out_cost():
    rng = np.random.default_rng(1)
    n, N, M = 6, 3, 2
    A = rng.normal(size=(n, N, N)) / np.sqrt(N)
    B = rng.normal(size=(n, N, M))
    Q = np.eye(N)
    R = 0.5 * np.eye(M)
    sol = riccati_solve(A, B, Q, R, Q)

    def cost(gains, x0):
        x, total = x0, 0.0
        for k in range(n):
            u = gains[k] @ x
            total += x @ Q @ x + u @ R @ u
            x = A[k] @ x + B[k] @ u
        return total + x @ Q @ x

    x0 = rng.normal(size=N)
    base = cost(sol.gains, x0)
    assert base == pytest.approx(x0 @ sol.values[0] @ x0, rel=1e-10)
    for _ in range(20):
        perturbed = [K + 1e-3 * rng.normal(size=K.shape) for K in sol.gains]
        assert cost(perturbed, x0) >= base - 1e-12


def test_dp_tabular_matches_riccati_on_scalar_lq():
    prob = _scalar_lq_problem()
    a, b, q, r = 0.9, 0.5, 1.0, 0.2
    ric = riccati_solve(np.full((3, 1, 1), a), np.full((3, 1, 1), b),
                        np.array([[q]]), np.array([[r]]), np.array([[q]]))
    run = dp_tabular(prob, num_nodes=401)
    grid = run.policies[0].grid
    # interpolating the next-stage value piecewise-linearly snaps the stage
    # minimizer to within one value-grid kink, i.e. spacing/|b| in the action
    spacing = grid[1] - grid[0]
    for k in range(3):
        gain = float(ric.gains[k][0, 0])
        err = np.abs(run.policies[k].actions[:, 0] - gain * grid)
        assert np.max(err) <= 2.0 * spacing / b
    # induced open-loop inputs agree with the closed-loop Riccati rollout
    (seq,) = run.induced_inputs()
    x = prob.x0.copy()
    for k in range(3):
        u_star = float(ric.gains[k][0, 0]) * x[0]
        assert seq[k] == pytest.approx(u_star, abs=2.0 * spacing / b)
        x = a * x + b * np.array([seq[k]])
    # the induced total cost is near the Riccati optimum
    total = float(rollout(prob, seq).total_cost)
    best = float(prob.x0 @ ric.values[0] @ prob.x0)
    assert total <= best * (1.0 + 1e-3)


def test_tabular_value_interpolates_cost_to_go():
    prob = _scalar_lq_problem()
    run = dp_tabular(prob, num_nodes=401)
    x = np.array([[1.3], [-2.1]])
    v0 = tabular_value(prob, run.policies, 0, x)
    # evaluate by rolling the tabular policies forward from the same states
    for xi, vi in zip(x, v0):
        state, total = xi.copy(), 0.0
        for k in range(prob.n):
            u = run.policies[k].action(state[None, :])[0]
            total += float(prob.stage_costs[k](state, u))
            state = np.asarray(prob.dynamics[k](state, u), dtype=float)
        total += float(prob.terminal_cost(state))
        assert vi == pytest.approx(total, rel=1e-6)


def test_certify_verdicts_on_stochastic_candidates():
    prob, truth = registry_lookup("stochastic-counterexample")
    engine = QuadratureEngine(order=8)
    reports = {z: dp_param_certify(prob, PolicyParams.from_flat(prob, np.array(z)),
                                   engine)
               for z in [(0.0, 0.0, 1.0), (0.0, 0.0, -1.0),
                         (0.0, 0.0, 0.0), (0.0, 1.0, 0.0)]}
    assert reports[(0.0, 0.0, 1.0)].verdict == "local-min"
    assert reports[(0.0, 0.0, -1.0)].verdict == "local-min"
    assert reports[(0.0, 0.0, 0.0)].verdict == "stationary"
    assert reports[(0.0, 1.0, 0.0)].verdict == "neither"
    assert reports[(0.0, 0.0, 1.0)].accepted
    assert not reports[(0.0, 0.0, 0.0)].accepted


def test_assumption_checks_on_registered_stochastic_problem():
    from dataclasses import replace

    from ocland.model import PolicyBasis

    prob, _ = registry_lookup("stochastic-counterexample")
    params = PolicyParams.from_flat(prob, np.array([0.0, 0.0, 1.0]))
    traj = rollout(prob, params, noise=np.zeros((2, 1)))
    report = check_assumptions(prob, traj.states)
    assert all(report.rank_ok)
    # the parameter boxes [-2, 2] cannot reproduce actions sampled from the
    # wider action box, so coverage is (correctly) refuted
    assert not any(report.coverage_ok)
    # with parameter boxes as wide as the action box, coverage holds
    wide = replace(prob, policy_bases=[
        PolicyBasis(b.functions, b.action_dim,
                    Box([-50.0] * b.m, [50.0] * b.m))
        for b in prob.policy_bases])
    report = check_assumptions(wide, traj.states)
    assert all(report.rank_ok)
    assert all(report.coverage_ok)

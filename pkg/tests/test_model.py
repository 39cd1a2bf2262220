import numpy as np
import pytest

from ocland.model import (PolicyParams, TabularPolicy, j_function, q_function,
                          rollout, rollout_batch, tabular_value)
from ocland.registry import registry_lookup


def test_rollout_matches_hand_rolled_loop():
    prob, _ = registry_lookup("example1")
    u = np.array([0.4, -0.7])
    traj = rollout(prob, u)
    x = np.asarray(prob.x0, dtype=float)
    total = 0.0
    for k in range(prob.n):
        uk = u[k:k + 1]
        total += float(np.asarray(prob.stage_costs[k](x, uk)))
        x = prob.dynamics[k](x, uk)
    total += float(np.asarray(prob.terminal_cost(x)))
    assert traj.total_cost == pytest.approx(total, rel=1e-12)
    assert np.allclose(traj.states[-1], x)


def test_rollout_batch_agrees_with_scalar_rollout():
    prob, _ = registry_lookup("example2")
    rng = np.random.default_rng(0)
    us = rng.uniform(-2, 2, size=(16, 2))
    batched = np.asarray(rollout_batch(prob, us)["total"], dtype=float)
    singles = np.array([rollout(prob, u).total_cost for u in us])
    assert np.allclose(batched, singles, rtol=1e-12)


def test_q_function_consistent_with_cost_to_go():
    prob, _ = registry_lookup("example1")
    u = np.array([0.938, 3.938])
    # Q_0(x0, u0) with tail u1 equals the full objective
    q0 = float(np.asarray(q_function(prob, 0, np.asarray(prob.x0, float),
                                     u[:1], tail=u[1:])))
    assert q0 == pytest.approx(rollout(prob, u).total_cost, rel=1e-12)


def test_parameterized_rollout_uses_policy_bases():
    prob, _ = registry_lookup("detparam-counterexample")
    params = PolicyParams.from_flat(prob, np.array([1.0, -1.0]))
    res = rollout_batch(prob, params)
    # u0 = theta_a * x0 + theta_b with x0 = 1 gives u0 = 0
    assert np.allclose(np.asarray(res["inputs"][0]).ravel(), 0.0)


def test_tabular_policy_interpolates_linearly():
    grid = np.linspace(-1.0, 1.0, 21)
    pol = TabularPolicy(stage=0, grid=grid, actions=(2.0 * grid)[:, None],
                        values=grid ** 2)
    x = np.array([[0.35], [-0.72]])
    assert np.allclose(pol.action(x)[:, 0], 2.0 * x[:, 0], atol=1e-12)


def test_tabular_value_reevaluates_through_dynamics():
    prob, _ = registry_lookup("example1")
    grid = np.linspace(-13.0, 10.0, 201)
    pols = [TabularPolicy(stage=k, grid=grid, actions=(grid + off)[:, None],
                          values=np.zeros_like(grid))
            for k, off in ((0, 0.0), (1, 3.0))]
    x = np.array([[0.0], [1.0]])
    got = np.asarray(tabular_value(prob, pols, 0, x), dtype=float)
    want = []
    for xi in x[:, 0]:
        u = np.array([xi, 2 * xi + 3.0])  # pi0(x)=x, x1=2x, pi1(x1)=x1+3
        want.append(rollout(prob, u, x0=np.array([xi])).total_cost)
    assert np.allclose(got, want, rtol=1e-9)
    j0 = np.asarray(j_function(prob, 0, x, pols), dtype=float)
    assert np.allclose(j0, got, rtol=1e-12)

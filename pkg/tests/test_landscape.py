import numpy as np
import pytest

from ocland.feasible import Box
from ocland.landscape import (classify_point, enumerate_stationary,
                              generate_lqr, lqr_cost, lqr_gradient,
                              lqr_stationarity_residual, match_records)
from ocland.model import ControlProblem
from ocland.registry import registry_lookup
from ocland.smooth import ExprMap


def _convex_problem():
    # J(u0, u1) = (u0 - 1)^2 + (u1 + 2)^2 with trivial dynamics
    dyn = ExprMap(["x0"], [("x", 1), ("u", 1)])
    c0 = ExprMap("(u0 - 1)^2", [("x", 1), ("u", 1)], scalar=True)
    c1 = ExprMap("(u0 + 2)^2", [("x", 1), ("u", 1)], scalar=True)
    term = ExprMap("0", [("x", 1)], scalar=True)
    return ControlProblem(
        name="convex", n=2, state_dim=1, action_dim=1,
        dynamics=[dyn, dyn], stage_costs=[c0, c1], terminal_cost=term,
        action_set=Box([-5.0], [5.0]), x0=np.array([0.0]),
        eval_box=Box([-5.0], [5.0]))


def test_census_on_convex_objective_finds_single_strict_minimum():
    records = enumerate_stationary(_convex_problem(), random_starts=40)
    assert len(records) == 1
    rec = records[0]
    assert rec.kind == "strict-min"
    assert np.allclose(rec.point, [1.0, -2.0], atol=1e-6)
    assert rec.pg_norm <= 1e-6
    assert not rec.spurious


def test_classify_point_kinds():
    box = Box([-3.0, -3.0], [3.0, 3.0])
    z = np.zeros(2)
    kind, eig = classify_point(lambda p: np.sum(np.atleast_2d(p) ** 2, -1), z, box)
    assert kind == "strict-min" and eig.min() > 0
    kind, _ = classify_point(lambda p: -np.sum(np.atleast_2d(p) ** 2, -1), z, box)
    assert kind == "local-max"
    kind, _ = classify_point(
        lambda p: np.atleast_2d(p)[:, 0] ** 2 - np.atleast_2d(p)[:, 1] ** 2, z, box)
    assert kind == "saddle"
    # quartic-degenerate saddle: the Hessian vanishes at the origin
    kind, _ = classify_point(
        lambda p: np.atleast_2d(p)[:, 0] ** 4 - np.atleast_2d(p)[:, 1] ** 4, z, box)
    assert kind == "saddle"


def test_match_records_pairs_expected_points_and_reports_extras():
    records = enumerate_stationary(_convex_problem(), random_starts=40)
    matched, extras = match_records(records, [(1.0, -2.0), (0.0, 0.0)], tol=1e-3)
    assert matched[0] == 0
    assert matched[1] is None
    assert extras == []


def test_generate_lqr_instance_shapes_and_definiteness():
    inst = generate_lqr(seed=0, scenario="unconstrained", n=30, N=3, M=4)
    assert inst.A.shape == (30, 3, 3) and inst.B.shape == (30, 3, 4)
    assert np.linalg.eigvalsh(inst.R)[0] >= 100.0 - 1e-9
    assert np.linalg.eigvalsh(inst.Q)[0] >= -1e-9
    assert np.allclose(inst.Sigma0, inst.Sigma0.T)
    assert inst.floor is None and inst.constrained_stage is None
    con = generate_lqr(seed=0, scenario="constrained")
    assert con.floor == 100.0 and con.constrained_stage == con.n - 1
    with pytest.raises(ValueError):
        generate_lqr(seed=0, scenario="bogus")


def test_lqr_cost_matches_monte_carlo_rollouts():
    inst = generate_lqr(seed=2, n=4, N=3, M=2)
    rng = np.random.default_rng(0)
    Ks = 1e-2 * rng.normal(size=(inst.n, inst.M, inst.N))
    exact = lqr_cost(inst, Ks)
    # sample initial states with the instance's second moment
    mean = 20.0 * np.ones(inst.N)
    cov = inst.Sigma0 - np.outer(mean, mean)
    xs = rng.multivariate_normal(mean, cov, size=200_000)
    total = np.zeros(xs.shape[0])
    x = xs
    for k in range(inst.n):
        u = x @ Ks[k].T
        total += np.einsum("bi,ij,bj->b", x, inst.Q, x)
        total += np.einsum("bi,ij,bj->b", u, inst.R, u)
        x = x @ inst.A[k].T + u @ inst.B[k].T
    total += np.einsum("bi,ij,bj->b", x, inst.Qn, x)
    assert np.mean(total) == pytest.approx(exact, rel=5e-3)


def test_lqr_gradient_matches_finite_differences():
    inst = generate_lqr(seed=5, n=3, N=2, M=2)
    rng = np.random.default_rng(1)
    Ks = 1e-2 * rng.normal(size=(inst.n, inst.M, inst.N))
    g = lqr_gradient(inst, Ks)
    h = 1e-6
    for _ in range(10):
        D = rng.normal(size=Ks.shape)
        D /= np.linalg.norm(D)
        fd = (lqr_cost(inst, Ks + h * D) - lqr_cost(inst, Ks - h * D)) / (2 * h)
        assert fd == pytest.approx(float(np.sum(g * D)), rel=1e-5)


def test_lqr_stationarity_residual_vanishes_at_riccati_gains():
    from ocland.dp import riccati_solve

    inst = generate_lqr(seed=7, n=6, N=3, M=4)
    sol = riccati_solve(inst.A, inst.B, inst.Q, inst.R, inst.Qn)
    Ks = np.asarray(sol.gains)
    res = lqr_stationarity_residual(inst, Ks)
    # the residual is absolute; the cost is of order 1e8, so compare
    # against the residual at a nearby non-stationary point
    away = lqr_stationarity_residual(inst, 0.9 * Ks)
    assert res <= 1e-12 * away


def test_census_flags_spurious_minima():
    # detparam: two strict minima at the same (global) value, none spurious
    prob, _ = registry_lookup("detparam-counterexample")
    records = enumerate_stationary(prob)
    minima = [r for r in records if r.kind == "strict-min"]
    pts = sorted(tuple(np.round(r.point, 3)) for r in minima)
    assert pts == [(1.0, -1.0), (1.0, 1.0)]
    assert all(abs(r.value) <= 1e-12 and not r.spurious for r in minima)
    # example1: one of the four minima is strictly best, the rest spurious
    prob, _ = registry_lookup("example1")
    records = enumerate_stationary(prob)
    minima = [r for r in records if r.is_local_min]
    best = min(minima, key=lambda r: r.value)
    assert np.allclose(best.point, [0.938, 3.938], atol=1e-3)
    assert not best.spurious
    assert all(r.spurious for r in minima if r is not best)

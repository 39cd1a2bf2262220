"""Dynamic-programming route: tabular grid DP for low-dimensional state
spaces, certification and per-stage solves for parameterized policy classes,
Riccati recursion, and structural assumption checks.

Tabular DP stores *all* distinct local minimizers per grid node so that
different continuous policy branches can be extracted afterwards, either
globally (per-node argmin) or by continuation from an anchor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import smooth
from .diff import HESSIAN_EIGEN_FLOOR, PG_PROBE_STEP, TOL_STAT
from .feasible import Box
from .model import PolicyParams, TabularPolicy, tabular_value

DEDUP_TOL = 1e-4
DEFAULT_GRID_NODES = 2001
PROBE_RADIUS = 1e-3
CERTIFY_PROBES = 200
CERTIFY_SAMPLES = 101


# ---------------------------------------------------------------------------
# small vectorized per-node descent used by the grid DP


def _masked_descent(objective, x, u0, box, tol=TOL_STAT, max_iter=400,
                    armijo_c=1e-4, eta=PG_PROBE_STEP):
    """Minimize ``objective(x, u)`` over ``u`` rowwise; ``x`` (B, N) is
    frozen per row, ``u0`` (B, M) are the starts.  Returns (u, value, pg)."""
    u = box.project(np.asarray(u0, dtype=float).copy())
    f = np.asarray(objective(x, u), dtype=float)
    active = np.isfinite(f)

    def grad(ua, xa):
        h = smooth.FD_GRAD_STEP * np.maximum(1.0, np.abs(ua))
        cols = []
        for j in range(ua.shape[-1]):
            du = np.zeros_like(ua)
            du[:, j] = h[:, j]
            cols.append((np.asarray(objective(xa, ua + du), dtype=float)
                         - np.asarray(objective(xa, ua - du), dtype=float))
                        / (2.0 * h[:, j]))
        return np.stack(cols, axis=-1)

    for _ in range(max_iter):
        if not np.any(active):
            break
        ia = np.nonzero(active)[0]
        g = grad(u[ia], x[ia])
        finite = np.all(np.isfinite(g), axis=-1)
        pg = np.full(ia.size, np.inf)
        pg[finite] = np.linalg.norm(
            box.project(u[ia][finite] - eta * g[finite]) - u[ia][finite],
            axis=-1) / eta
        done = (pg <= tol) | ~finite
        active[ia[done]] = False
        ia = ia[~done]
        if not ia.size:
            break
        g = g[~done]
        t = np.ones(ia.size)
        pending = np.ones(ia.size, dtype=bool)
        while np.any(pending):
            rows = ia[pending]
            trial = box.project(u[rows] - t[pending, None] * g[pending])
            ft = np.asarray(objective(x[rows], trial), dtype=float)
            decr = np.einsum("bd,bd->b", g[pending], trial - u[rows])
            ok = np.isfinite(ft) & (ft <= f[rows] + armijo_c * decr)
            pi = np.nonzero(pending)[0]
            u[rows[ok]] = trial[ok]
            f[rows[ok]] = ft[ok]
            pending[pi[ok]] = False
            t[pi[~ok]] *= 0.5
            stall = pending & (t < 1e-18)
            if np.any(stall):
                active[ia[np.nonzero(stall)[0]]] = False
                pending &= ~stall
    g = grad(u, x)
    with np.errstate(invalid="ignore"):
        pg = np.linalg.norm(box.project(u - eta * np.nan_to_num(g)) - u, axis=-1) / eta
        pg = np.where(np.all(np.isfinite(g), axis=-1), pg, np.inf)
    return u, np.asarray(objective(x, u), dtype=float), pg


@dataclass
class DpRun:
    problem: object
    policies: list                 # TabularPolicy per stage
    branch: str
    anchors: dict | None
    grid: np.ndarray

    def induced_inputs(self, x0=None, tol_stat=TOL_STAT):
        """All open-loop input sequences induced by the stored stage-0
        minimizer branches followed through the selected later-stage
        policies; each action is re-polished on the policy-reevaluated Q."""
        problem = self.problem
        if x0 is None:
            x0 = problem.x0
        x0 = np.asarray(x0, dtype=float)
        node = int(np.argmin(np.abs(self.grid - x0[0])))
        seeds = self.policies[0].minimizer_sets[node]
        sequences = []
        for u00 in np.atleast_2d(seeds):
            xs = x0
            inputs = []
            for k in range(problem.n):
                if k == 0:
                    u = u00
                else:
                    u = self.policies[k].action(xs)
                u = _polish_action(problem, self.policies, k, xs, u)
                inputs.append(u)
                xs = problem.dynamics[k](xs, u)
            sequences.append(np.concatenate(inputs))
        return sequences


def _polish_action(problem, policies, k, x, u, iters=200):
    """1-D/low-dim refine of a stage action against the smooth
    policy-reevaluated Q (interpolated-policy tail)."""
    def obj(xb, ub):
        c = problem.stage_costs[k](xb, ub)
        xn = problem.dynamics[k](xb, ub)
        if k + 1 == problem.n:
            return c + problem.terminal_cost(xn)
        return c + tabular_value(problem, policies, k + 1, xn)

    xb = np.atleast_2d(x)
    ub = np.atleast_2d(u)
    out, _, _ = _masked_descent(obj, xb, ub, problem.action_set, max_iter=iters)
    return out[0]


def _dedup_rows(points, values, tol=DEDUP_TOL):
    """Greedy dedup by sup-norm distance, keeping lowest value first."""
    order = np.lexsort((points[:, 0], values))
    kept = []
    for i in order:
        p = points[i]
        if all(np.max(np.abs(p - points[j])) >= tol for j in kept):
            kept.append(i)
    kept.sort()
    return kept


def dp_tabular(problem, num_nodes=DEFAULT_GRID_NODES, branch="global",
               anchors=None, starts_per_node=15, tol_stat=TOL_STAT):
    """Grid DP over a 1-D state space.

    Per node and stage, a multistart descent minimizes
    ``c_k(x, u) + J_{k+1}(f_k(x, u))`` with piecewise-linear interpolation of
    the next-stage value, keeping every distinct local minimizer.  Additive
    action-free stage-cost terms are held out of the search objective (they
    shift the value but not the minimizers), which keeps nodes meaningful
    even where such terms overflow.

    branch: 'global' takes the per-node argmin; 'continuation' follows the
    minimizer nearest the previous node outward from an anchor
    ``anchors={stage: (x, u)}``.
    """
    if problem.state_dim != 1:
        raise ValueError("tabular DP supports 1-D state spaces")
    if problem.stochastic:
        raise ValueError("tabular DP supports deterministic problems")
    lo, hi = problem.eval_box.bounding_box()
    grid = np.linspace(lo[0], hi[0], num_nodes)
    G = grid.size
    M = problem.action_dim
    alo, ahi = problem.action_set.bounding_box()

    policies = []
    j_next_vals = None
    for k in reversed(range(problem.n)):
        cost = problem.stage_costs[k]
        split = getattr(cost, "split_action_terms", None)
        if split is not None:
            dep_cost, free_cost = split()
        else:
            dep_cost, free_cost = cost, None

        def stage_obj(xb, ub, k=k, dep_cost=dep_cost, jv=j_next_vals):
            val = dep_cost(xb, ub)
            xn = problem.dynamics[k](xb, ub)
            if k + 1 == problem.n:
                return val + problem.terminal_cost(xn)
            return val + np.interp(xn[..., 0], grid, jv)

        # starts: per node, the discrete local minima of the stage objective
        # over a dense action scan (catches narrow basins a start lattice
        # can jump across), padded to a fixed count per node
        if M == 1:
            dense = np.linspace(alo[0], ahi[0], 8 * starts_per_node + 1)
            with np.errstate(over="ignore", invalid="ignore"):
                scan = np.asarray(stage_obj(
                    np.repeat(grid[:, None], dense.size, axis=0),
                    np.tile(dense[:, None], (G, 1))), dtype=float)
            scan = scan.reshape(G, dense.size)
            pad = np.pad(scan, ((0, 0), (1, 1)), constant_values=np.inf)
            is_min = (scan <= pad[:, :-2]) & (scan <= pad[:, 2:]) & np.isfinite(scan)
            owner_list, start_list = [], []
            for i in range(G):
                js = np.where(is_min[i])[0]
                if js.size == 0:
                    js = np.array([np.nanargmin(np.where(np.isfinite(scan[i]),
                                                         scan[i], np.inf))])
                js = js[np.argsort(scan[i][js])][:starts_per_node]
                owner_list.append(np.full(js.size, i))
                start_list.append(dense[js])
            owner = np.concatenate(owner_list)
            xb = grid[owner][:, None]
            ub = np.concatenate(start_list)[:, None]
        else:
            ustarts = np.linspace(alo, ahi, starts_per_node)  # (S, M)
            owner = np.repeat(np.arange(G), starts_per_node)
            xb = np.repeat(grid[:, None], starts_per_node, axis=0)  # (G*S, 1)
            ub = np.tile(ustarts, (G, 1))
        u, val, pg = _masked_descent(stage_obj, xb, ub, problem.action_set,
                                     tol=tol_stat)
        # the interpolated value function is piecewise linear, so minimizers
        # sit at kinks where a gradient test cannot pass; accept a candidate
        # if no small feasible coordinate step improves on it
        delta = 1e-3
        better = np.zeros(len(val), dtype=bool)
        for m in range(M):
            for sgn in (1.0, -1.0):
                probe = u.copy()
                probe[:, m] += sgn * delta
                probe = problem.action_set.project(probe)
                with np.errstate(over="ignore", invalid="ignore"):
                    pv = np.asarray(stage_obj(xb, probe), dtype=float)
                moved = np.abs(probe[:, m] - u[:, m]) > 1e-12
                better |= moved & (pv < val - 1e-9 * (1.0 + np.abs(val)))
        ok = np.isfinite(val) & ((pg <= max(tol_stat, 1e-6)) | ~better)

        minsets, minvals = [], []
        for i in range(G):
            sel = (owner == i) & ok
            if not np.any(sel):
                minsets.append(np.zeros((0, M)))
                minvals.append(np.zeros(0))
                continue
            pts, vs = u[sel], val[sel]
            keep = _dedup_rows(pts, vs)
            minsets.append(pts[keep])
            minvals.append(vs[keep])

        actions, values = _select_branch(grid, minsets, minvals, branch,
                                         None if anchors is None else anchors.get(k))
        if free_cost is not None:
            with np.errstate(over="ignore", invalid="ignore"):
                values = values + np.asarray(
                    free_cost(grid[:, None], np.zeros((G, M))), dtype=float)
        policies.insert(0, TabularPolicy(stage=k, grid=grid, actions=actions,
                                         values=values, minimizer_sets=minsets))
        j_next_vals = values
    return DpRun(problem=problem, policies=policies, branch=branch,
                 anchors=anchors, grid=grid)


def _select_branch(grid, minsets, minvals, branch, anchor):
    G = grid.size
    M = minsets[0].shape[1] if minsets[0].size else (minsets[G // 2].shape[1] if minsets[G // 2].size else 1)
    actions = np.full((G, M), np.nan)
    values = np.full(G, np.inf)
    if branch == "global" or anchor is None:
        for i in range(G):
            if minvals[i].size:
                j = int(np.argmin(minvals[i]))
                actions[i] = minsets[i][j]
                values[i] = minvals[i][j]
        return actions, values
    if branch != "continuation":
        raise ValueError(f"unknown branch strategy {branch!r}")
    xa, ua = anchor
    i0 = int(np.argmin(np.abs(grid - xa)))
    ua = np.atleast_1d(np.asarray(ua, dtype=float))

    def pick(i, ref):
        if not minvals[i].size:
            return None
        j = int(np.argmin(np.linalg.norm(minsets[i] - ref, axis=-1)))
        actions[i] = minsets[i][j]
        values[i] = minvals[i][j]
        return minsets[i][j]

    ref = pick(i0, ua)
    prev = ref if ref is not None else ua
    for i in range(i0 + 1, G):
        nxt = pick(i, prev)
        prev = nxt if nxt is not None else prev
    prev = ref if ref is not None else ua
    for i in range(i0 - 1, -1, -1):
        nxt = pick(i, prev)
        prev = nxt if nxt is not None else prev
    return actions, values


# ---------------------------------------------------------------------------
# parameterized DP: certification and per-stage solve


@dataclass
class StageCertificate:
    stage: int
    verdict: str                   # 'local-min' | 'stationary' | 'neither'
    worst_pg: float
    failing_state: np.ndarray | None
    detail: str = ""


@dataclass
class CertifyReport:
    stages: list
    verdict: str

    @property
    def accepted(self):
        return self.verdict == "local-min"


def _certify_states(problem, params, engine, n_samples, seed=0):
    lo, hi = problem.eval_box.bounding_box()
    if problem.state_dim == 1:
        states = np.linspace(lo[0], hi[0], n_samples)[:, None]
    else:
        rng = np.random.default_rng(seed)
        states = rng.uniform(lo, hi, size=(n_samples, problem.state_dim))
    return states


def _stage_q_of_theta(problem, params, engine, k, x):
    """theta_k -> E[Q_k(x, mu_theta(x))] with the stage tail from params."""
    basis = problem.policy_bases[k]

    def phi(thetas):
        thetas = np.asarray(thetas, dtype=float)
        u = basis.action(np.asarray(x, dtype=float), thetas)
        return np.asarray(engine.expected_q(problem, k, x, u, params), dtype=float)

    return phi


def dp_param_certify(problem, params, engine, n_samples=CERTIFY_SAMPLES,
                     tol_stat=TOL_STAT, eigen_floor=HESSIAN_EIGEN_FLOOR,
                     probe_radius=PROBE_RADIUS, probes=CERTIFY_PROBES, seed=0):
    """Check per-stage parameter stationarity / local minimality of the
    policy at sampled states; one failing sample refutes a stage."""
    states = _certify_states(problem, params, engine, n_samples, seed)
    rng = np.random.default_rng(seed)
    stage_reports = []
    for k in range(problem.n):
        basis = problem.policy_bases[k]
        theta = np.asarray(params.thetas[k], dtype=float)
        pset = basis.param_set
        verdict = "local-min"
        worst_pg = 0.0
        failing = None
        detail = ""
        for x in states:
            phi = _stage_q_of_theta(problem, params, engine, k, x)
            g = smooth.fd_gradient(lambda th: phi(th), theta[None, :])[0]
            pg = float(pset.pg_residual(theta[None, :], g[None, :])[0])
            worst_pg = max(worst_pg, pg)
            if pg > tol_stat:
                verdict = "neither"
                failing = x
                detail = f"non-stationary sample, pg={pg:.3e}"
                break
            is_min = _local_min_by_hessian_or_probes(
                phi, theta, pset, rng, eigen_floor, probe_radius, probes)
            if not is_min and verdict == "local-min":
                verdict = "stationary"
                failing = x
                detail = "sample refutes local minimality"
        stage_reports.append(StageCertificate(stage=k, verdict=verdict,
                                              worst_pg=worst_pg,
                                              failing_state=failing,
                                              detail=detail))
    order = {"neither": 0, "stationary": 1, "local-min": 2}
    overall = min((r.verdict for r in stage_reports), key=order.get, default="local-min")
    return CertifyReport(stages=stage_reports, verdict=overall)


def _local_min_by_hessian_or_probes(phi, theta, pset, rng, eigen_floor,
                                    probe_radius, probes):
    f0 = float(phi(theta))
    refute_tol = 1e-12 * max(1.0, abs(f0))
    on_bd = bool(np.asarray(pset.on_boundary(theta[None, :]))[0])
    if not on_bd:
        H = smooth.fd_hessian(lambda th: float(phi(th)), theta)
        eig = np.linalg.eigvalsh(0.5 * (H + H.T))
        if np.all(eig > eigen_floor):
            return True
        if np.any(eig < -eigen_floor):
            return False
    # degenerate or boundary: neighborhood sampling, feasible probes only
    d = theta.size
    dirs = rng.normal(size=(probes, d))
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    cand = pset.project(theta + probe_radius * dirs)
    vals = np.asarray(phi(cand), dtype=float)
    moved = np.linalg.norm(cand - theta, axis=-1) > 1e-12
    return not np.any(vals[moved] < f0 - refute_tol)


def dp_param_solve(problem, params0, engine, sweeps=6, tol=1e-9,
                   tol_stat=TOL_STAT, max_iter=2000):
    """Backward per-stage local search holding future-stage parameters
    fixed, sweeping until the stacked parameters stop moving.  The stage-k
    subproblem minimizes the average of Q_k over the stage-k states induced
    by the current policy (quadrature/CRN nodes through the dynamics)."""
    from .model import rollout_batch
    from .solvers import newton_polish, projected_descent

    params = PolicyParams([np.asarray(t, dtype=float).copy() for t in params0.thetas])
    for _ in range(sweeps):
        prev = params.flat.copy()
        w, _weights = engine.bank(problem)
        res = rollout_batch(problem, params, w=w)
        for k in reversed(range(problem.n)):
            basis = problem.policy_bases[k]
            xk = np.atleast_2d(np.asarray(res["states"][k], dtype=float))
            xk = xk.reshape(-1, problem.state_dim)
            # collapse duplicates for speed
            xk = np.unique(np.round(xk, 12), axis=0)

            def obj(thetas, k=k, xk=xk):
                th = np.asarray(thetas, dtype=float)
                u = basis.action(xk, th[..., None, :])
                q = engine.expected_q(problem, k, xk,
                                      u, params)
                return np.mean(np.asarray(q, dtype=float), axis=-1)

            def grad(thetas, k=k):
                return smooth.fd_gradient(obj, np.asarray(thetas, dtype=float))

            sol = projected_descent(obj, grad, params.thetas[k][None, :],
                                    basis.param_set, tol_stat=tol_stat,
                                    max_iter=max_iter)
            # descent alone leaves flat (higher-order) directions loose
            params.thetas[k] = newton_polish(obj, grad, sol.point[0],
                                             basis.param_set)
        if np.max(np.abs(params.flat - prev)) < tol:
            break
    return params


# ---------------------------------------------------------------------------
# Riccati


@dataclass
class RiccatiSolution:
    gains: list        # K_k, (M, N)
    values: list       # P_k, (N, N), k = 0..n

    def residual(self, A, B, R):
        """Relative self-consistency residual of the gain formula."""
        worst = 0.0
        for k, K in enumerate(self.gains):
            P = self.values[k + 1]
            lhs = (R + B[k].T @ P @ B[k]) @ K + B[k].T @ P @ A[k]
            scale = max(np.linalg.norm(B[k].T @ P @ A[k]), 1.0)
            worst = max(worst, np.linalg.norm(lhs) / scale)
        return worst


def riccati_solve(A, B, Q, R, Qn):
    """Finite-horizon discrete Riccati recursion.

    ``A``/``B`` are per-stage arrays (n, N, N) / (n, N, M); ``Q``/``R`` may
    be single matrices or per-stage arrays; ``Qn`` is the terminal weight.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    Qs = [np.asarray(Q, dtype=float)] * n if np.asarray(Q).ndim == 2 else list(Q)
    Rs = [np.asarray(R, dtype=float)] * n if np.asarray(R).ndim == 2 else list(R)
    P = np.asarray(Qn, dtype=float)
    values = [P]
    gains = [None] * n
    for k in reversed(range(n)):
        G = Rs[k] + B[k].T @ P @ B[k]
        K = -np.linalg.solve(G, B[k].T @ P @ A[k])
        Acl = A[k] + B[k] @ K
        P = Qs[k] + K.T @ Rs[k] @ K + Acl.T @ P @ Acl
        P = 0.5 * (P + P.T)
        gains[k] = K
        values.insert(0, P)
    return RiccatiSolution(gains=gains, values=values)


# ---------------------------------------------------------------------------
# basis / assumption checks


@dataclass
class AssumptionReport:
    independent: bool | None = None
    gram_eigs: tuple | None = None
    warnings: list = field(default_factory=list)
    rank_ok: list | None = None
    coverage_ok: list | None = None
    details: dict = field(default_factory=dict)


def check_basis_independence(basis, states):
    """Linear independence of basis functions via the sampled Gram matrix
    of stacked basis columns."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    mats = basis.matrix(states)     # (S, M, m)
    gram = np.einsum("smi,smj->ij", mats, mats) / states.shape[0]
    eig = np.linalg.eigvalsh(gram)
    report = AssumptionReport(gram_eigs=tuple(eig))
    distinct = np.unique(np.round(states, 12), axis=0).shape[0]
    if distinct < 10 * basis.m:
        report.warnings.append(
            "sample may be measure-zero: fewer than 10*m distinct states")
    report.independent = bool(eig[-1] > 0 and eig[0] > 1e-8 * eig[-1])
    return report


def check_assumptions(problem, traj_states, n_action_samples=200, seed=0,
                      coverage_iters=100):
    """Assumption checks at the stage states of a candidate trajectory:
    full row rank of the stacked basis matrix, and feasibility of
    reproducing sampled actions with feasible parameters."""
    rng = np.random.default_rng(seed)
    rank_ok, coverage_ok = [], []
    for k in range(problem.n):
        basis = problem.policy_bases[k]
        x = np.asarray(traj_states[k], dtype=float)
        F = basis.matrix(x)        # (M, m)
        s = np.linalg.svd(F, compute_uv=False)
        rank_ok.append(bool(s[0] > 0 and s[-1] > 1e-8 * s[0]
                            and F.shape[0] <= F.shape[1]))
        actions = problem.action_set.sample(rng, n_action_samples)
        good = 0
        for a in actions:
            theta, *_ = np.linalg.lstsq(F, a, rcond=None)
            for _ in range(coverage_iters):
                proj = basis.param_set.project(theta)
                # re-impose F theta = a on the feasible iterate
                corr, *_ = np.linalg.lstsq(F, a - F @ proj, rcond=None)
                theta = proj + corr
                if np.linalg.norm(F @ theta - a) <= 1e-8 * (1 + np.linalg.norm(a)) \
                        and bool(np.asarray(basis.param_set.contains(theta[None, :], tol=1e-7))[0]):
                    good += 1
                    break
        coverage_ok.append(good == len(actions))
    return AssumptionReport(rank_ok=rank_ok, coverage_ok=coverage_ok,
                            details={"n_action_samples": n_action_samples})

"""Gradients of the one-shot objective: backward adjoint recursion with a
finite-difference cross-check, plus stationarity testing.

The adjoint recursion runs per noise realization and broadcasts over both
decision batches and quadrature/Monte-Carlo banks, so expected gradients are
one vectorized sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import smooth
from .model import PolicyParams

TOL_STAT = 1e-7
TOL_FEAS = 1e-9
PG_PROBE_STEP = 1e-3
HESSIAN_EIGEN_FLOOR = 1e-6


@dataclass
class GradientReport:
    gradient: np.ndarray          # (d,) expected gradient
    per_stage: list               # per-stage blocks
    method: str
    fd_rel_err: float | None = None


@dataclass
class StationarityVerdict:
    point: np.ndarray
    projected_gradient_norm: float
    feasible: bool
    is_stationary: bool
    feasibility_violation: float


def adjoint_blocks(problem, decision, w=None, x0=None):
    """Per-realization gradient of the total cost with respect to the flat
    decision, via the costate recursion.  Shapes broadcast: ``decision``
    batches and ``w`` banks combine like in ``rollout_batch``; the result is
    (..., d)."""
    params = decision if isinstance(decision, PolicyParams) else None
    inputs = None if params is not None else problem.split_inputs(decision)
    if x0 is None:
        x0 = problem.x0
    x = np.asarray(x0, dtype=float)
    xs, us, ws = [], [], []
    for k in range(problem.n):
        if params is not None:
            u = problem.policy_bases[k].action(x, params.thetas[k])
        else:
            u = np.broadcast_to(inputs[..., k, :],
                                np.broadcast_shapes(inputs[..., k, :].shape,
                                                    x.shape[:-1] + (problem.action_dim,)))
        wk = None
        if problem.noise_dim:
            wk = (np.zeros(problem.noise_dim) if w is None else w[..., k, :])
        xs.append(x)
        us.append(u)
        ws.append(wk)
        x = problem.dynamics[k](x, u) if wk is None else problem.dynamics[k](x, u, wk)
    lam = problem.terminal_cost.jac(0, x)
    blocks = [None] * problem.n
    for k in reversed(range(problem.n)):
        xk, uk, wk = xs[k], us[k], ws[k]
        dyn_args = (xk, uk) if wk is None else (xk, uk, wk)
        gx = problem.stage_costs[k].jac(0, xk, uk)
        gu = problem.stage_costs[k].jac(1, xk, uk)
        Dx = problem.dynamics[k].jac(0, *dyn_args)
        Du = problem.dynamics[k].jac(1, *dyn_args)
        a = gu + np.einsum("...nm,...n->...m", Du, lam)
        if params is not None:
            B = problem.policy_bases[k].matrix(xk)
            blocks[k] = np.einsum("...mi,...m->...i", B, a)
            Dmu = problem.policy_bases[k].jac_x(xk, params.thetas[k])
            lam = gx + np.einsum("...nj,...n->...j", Dx, lam) \
                + np.einsum("...mj,...m->...j", Dmu, a)
        else:
            blocks[k] = a
            lam = gx + np.einsum("...nj,...n->...j", Dx, lam)
    shape = np.broadcast_shapes(*(b.shape[:-1] for b in blocks))
    blocks = [np.broadcast_to(b, shape + (b.shape[-1],)) for b in blocks]
    return np.concatenate(blocks, axis=-1)


def make_objective(problem, parameterized=None, engine=None):
    """Return batched callables (objective, gradient) over flat decisions."""
    if parameterized is None:
        parameterized = problem.parameterized

    def decode(z):
        return PolicyParams.from_flat(problem, z) if parameterized else z

    if engine is not None and problem.stochastic:
        def objective(z):
            return engine.expected_objective(problem, decode(z))

        def gradient(z):
            w, weights = engine.bank(problem)
            if w is None:
                return adjoint_blocks(problem, decode(z))
            dec = engine._expand(decode(z))
            per_node = adjoint_blocks(problem, dec, w=w)
            return np.einsum("...bd,b->...d", per_node, weights)
    else:
        from .model import rollout_batch

        def objective(z):
            return np.asarray(rollout_batch(problem, decode(z))["total"], dtype=float)

        def gradient(z):
            return adjoint_blocks(problem, decode(z))

    return objective, gradient


def oneshot_gradient(problem, decision, engine=None, method="adjoint",
                     fd_check=False):
    """Gradient of the (expected) total cost at a single flat decision."""
    flat = decision.flat if isinstance(decision, PolicyParams) else np.asarray(decision, dtype=float)
    parameterized = isinstance(decision, PolicyParams) or problem.parameterized
    objective, gradient = make_objective(problem, parameterized, engine)
    if method == "adjoint":
        g = np.asarray(gradient(flat), dtype=float)
    elif method == "fd":
        g = smooth.fd_gradient(objective, flat)
    else:
        raise ValueError(f"unknown gradient method {method!r}")
    rel = None
    if fd_check:
        fd = smooth.fd_gradient(objective, flat)
        denom = max(np.linalg.norm(fd), np.linalg.norm(g), 1e-12)
        rel = float(np.linalg.norm(fd - g) / denom)
    if parameterized:
        sizes = [b.m for b in problem.policy_bases]
    else:
        sizes = [problem.action_dim] * problem.n
    offs = np.cumsum([0] + sizes)
    per_stage = [g[offs[i]:offs[i + 1]] for i in range(len(sizes))]
    return GradientReport(gradient=g, per_stage=per_stage, method=method,
                          fd_rel_err=rel)


def fd_hessian(objective, point, step=smooth.FD_HESS_STEP):
    """Symmetric finite-difference Hessian and its eigenvalues."""
    H = smooth.fd_hessian(objective, np.asarray(point, dtype=float), step=step)
    return H, np.linalg.eigvalsh(0.5 * (H + H.T))


def stationarity_test(point, gradient, feasible, tol_stat=TOL_STAT,
                      tol_feas=TOL_FEAS, eta=PG_PROBE_STEP):
    """Projected-gradient stationarity check at a feasible point."""
    point = np.asarray(point, dtype=float)
    gradient = np.asarray(gradient, dtype=float)
    viol = float(np.linalg.norm(feasible.project(point) - point))
    pg = float(np.asarray(feasible.pg_residual(point, gradient, eta=eta)))
    return StationarityVerdict(point=point,
                               projected_gradient_norm=pg,
                               feasible=viol <= tol_feas,
                               is_stationary=(pg <= tol_stat and viol <= tol_feas),
                               feasibility_violation=viol)

"""Core problem data and trajectory evaluation.

A :class:`ControlProblem` bundles horizon, dynamics, costs, the action set
and (optionally) per-stage noise and a parameterized policy class.  Decisions
are either open-loop input sequences (flat vectors of length ``n*M``) or
:class:`PolicyParams` holding one parameter vector per stage.

Everything evaluates with numpy broadcasting over leading batch axes so that
multistart solvers and quadrature banks can share one code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .feasible import Box, FeasibleSet, product_set
from .smooth import SmoothFn


class EvaluationError(ValueError):
    """Non-finite dynamics or cost value during a rollout."""

    def __init__(self, stage, what):
        super().__init__(f"non-finite {what} at stage {stage}")
        self.stage = stage


class PolicyBasis:
    """Linear-in-parameters policy class mu_theta(x) = sum_i theta_i f_i(x).

    ``functions`` are smooth maps from the state to R^M; ``param_set`` is the
    feasible set for theta.
    """

    def __init__(self, functions, action_dim, param_set):
        self.functions = list(functions)
        self.m = len(self.functions)
        self.action_dim = int(action_dim)
        self.param_set = param_set

    def matrix(self, x):
        """Stack basis values into (..., M, m)."""
        cols = [np.asarray(f(x), dtype=float) for f in self.functions]
        shape = np.broadcast_shapes(*(c.shape for c in cols))
        return np.stack([np.broadcast_to(c, shape) for c in cols], axis=-1)

    def action(self, x, theta):
        return np.einsum("...ij,...j->...i", self.matrix(x), theta)

    def jac_x(self, x, theta):
        """State jacobian of the policy, sum_i theta_i Df_i(x): (..., M, N)."""
        out = None
        for i, f in enumerate(self.functions):
            term = np.asarray(theta, dtype=float)[..., i, None, None] * f.jac(0, x)
            out = term if out is None else out + term
        return out


class MatrixGainBasis(PolicyBasis):
    """Policies u = K x with theta = vec(K) (row major)."""

    def __init__(self, action_dim, state_dim, param_set):
        self.action_dim = int(action_dim)
        self.state_dim = int(state_dim)
        self.m = self.action_dim * self.state_dim
        self.param_set = param_set
        self.functions = None

    def _gain(self, theta):
        theta = np.asarray(theta, dtype=float)
        return theta.reshape(theta.shape[:-1] + (self.action_dim, self.state_dim))

    def matrix(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1] + (self.action_dim, self.m)
        B = np.zeros(shape)
        for a in range(self.action_dim):
            B[..., a, a * self.state_dim:(a + 1) * self.state_dim] = x
        return B

    def action(self, x, theta):
        return np.einsum("...ij,...j->...i", self._gain(theta), x)

    def jac_x(self, x, theta):
        K = self._gain(theta)
        return np.broadcast_to(K, np.shape(x)[:-1] + K.shape[-2:])


@dataclass
class PolicyParams:
    """One parameter vector per stage."""

    thetas: list

    @property
    def flat(self):
        return np.concatenate([np.atleast_1d(np.asarray(t, dtype=float))
                               for t in self.thetas], axis=-1)

    @staticmethod
    def from_flat(problem, z):
        z = np.asarray(z, dtype=float)
        thetas = []
        off = 0
        for basis in problem.policy_bases:
            thetas.append(z[..., off:off + basis.m])
            off += basis.m
        return PolicyParams(thetas)


@dataclass
class Trajectory:
    states: np.ndarray      # (n+1, N)
    inputs: np.ndarray      # (n, M)
    noises: np.ndarray      # (n, W) or None
    stage_costs: np.ndarray  # (n,)
    terminal_cost: float
    total_cost: float


@dataclass
class ControlProblem:
    name: str
    n: int
    state_dim: int
    action_dim: int
    dynamics: list            # SmoothFn(x, u) or SmoothFn(x, u, w) per stage
    stage_costs: list         # scalar SmoothFn(x, u) per stage
    terminal_cost: object     # scalar SmoothFn(x)
    action_set: FeasibleSet
    x0: np.ndarray | None = None
    noise: list | None = None          # per-stage noise distributions
    noise_dim: int = 0
    policy_bases: list | None = None   # per-stage PolicyBasis
    eval_box: Box | None = None        # state box used for sampling/grids
    init_dist: object | None = None    # random initial state (LQR only)

    @property
    def stochastic(self):
        return self.noise is not None or self.init_dist is not None

    @property
    def parameterized(self):
        return self.policy_bases is not None

    def input_set(self):
        """Feasible set for the stacked open-loop decision."""
        return product_set([self.action_set] * self.n)

    def param_set(self):
        """Feasible set for the stacked policy parameters."""
        return product_set([b.param_set for b in self.policy_bases])

    def decision_dim(self, parameterized=None):
        if parameterized is None:
            parameterized = self.parameterized
        if parameterized:
            return sum(b.m for b in self.policy_bases)
        return self.n * self.action_dim

    def split_inputs(self, z):
        z = np.asarray(z, dtype=float)
        return z.reshape(z.shape[:-1] + (self.n, self.action_dim))

    def with_zero_noise(self):
        """Deterministic counterpart: every noise input pinned to zero."""
        if self.noise is None:
            return self
        wd = self.noise_dim

        def pin(f):
            def zeros(x):
                return np.zeros(np.shape(x)[:-1] + (wd,))
            return SmoothFn(lambda x, u: f(x, u, zeros(x)),
                            f.arg_dims[:2], f.out_dim,
                            jacs=(lambda x, u: f.jac(0, x, u, zeros(x)),
                                  lambda x, u: f.jac(1, x, u, zeros(x))))

        return replace(self, dynamics=[pin(f) for f in self.dynamics],
                       noise=None, noise_dim=0)


def _stage_noise(w, k):
    if w is None:
        return None
    return w[..., k, :]


def rollout_batch(problem, decision, w=None, x0=None, start_stage=0,
                  first_action=None):
    """Propagate dynamics and accumulate costs with broadcasting.

    ``decision`` is a flat input array (..., n*M) or PolicyParams.  ``w``
    has shape (..., n - start_stage, W).  ``first_action`` overrides the
    stage ``start_stage`` action (used by Q evaluation).  Returns a dict of
    stacked states/inputs and cost arrays.
    """
    params = decision if isinstance(decision, PolicyParams) else None
    inputs = None if (params is not None or decision is None) \
        else problem.split_inputs(decision)
    if x0 is None:
        x0 = problem.x0
    x = np.asarray(x0, dtype=float)
    states = [x]
    used_inputs = []
    total = 0.0
    for j, k in enumerate(range(start_stage, problem.n)):
        if first_action is not None and k == start_stage:
            u = np.asarray(first_action, dtype=float)
        elif params is not None:
            u = problem.policy_bases[k].action(x, params.thetas[k])
        else:
            u = inputs[..., k, :]
        u = np.broadcast_to(u, np.broadcast_shapes(np.shape(u), x.shape[:-1] + (problem.action_dim,)))
        c = problem.stage_costs[k](x, u)
        total = total + c
        wk = _stage_noise(w, j)
        if wk is None and problem.noise_dim:
            wk = np.zeros(x.shape[:-1] + (problem.noise_dim,))
        if problem.noise_dim:
            x = problem.dynamics[k](x, u, wk)
        else:
            x = problem.dynamics[k](x, u)
        used_inputs.append(u)
        states.append(x)
    term = problem.terminal_cost(states[-1])
    total = total + term
    return {"states": states, "inputs": used_inputs,
            "total": total, "terminal": term}


def rollout(problem, decision, noise=None, x0=None):
    """Single trajectory rollout; raises :class:`EvaluationError` on
    non-finite values, reporting the stage."""
    params = decision if isinstance(decision, PolicyParams) else None
    inputs = None if params is not None else problem.split_inputs(np.asarray(decision, dtype=float))
    if x0 is None:
        x0 = problem.x0
    x = np.asarray(x0, dtype=float)
    states = [x]
    used = []
    stage_costs = []
    for k in range(problem.n):
        u = (problem.policy_bases[k].action(x, params.thetas[k]) if params is not None
             else inputs[k])
        c = float(problem.stage_costs[k](x, u))
        if not np.isfinite(c):
            raise EvaluationError(k, "stage cost")
        if problem.noise_dim:
            wk = (np.zeros(problem.noise_dim) if noise is None
                  else np.asarray(noise, dtype=float)[k])
            x = problem.dynamics[k](x, u, wk)
        else:
            wk = None
            x = problem.dynamics[k](x, u)
        if not np.all(np.isfinite(x)):
            raise EvaluationError(k, "dynamics value")
        states.append(x)
        used.append(u)
        stage_costs.append(c)
    term = float(problem.terminal_cost(x))
    if not np.isfinite(term):
        raise EvaluationError(problem.n, "terminal cost")
    return Trajectory(states=np.stack(states), inputs=np.stack(used),
                      noises=None if noise is None else np.asarray(noise, dtype=float),
                      stage_costs=np.asarray(stage_costs),
                      terminal_cost=term,
                      total_cost=float(sum(stage_costs) + term))


def cost_to_go(problem, k, x, inputs_tail):
    """Deterministic cost-to-go C(x; u_k, ..., u_{n-1})."""
    x = np.asarray(x, dtype=float)
    tail = np.asarray(inputs_tail, dtype=float)
    tail = tail.reshape(tail.shape[:-1] + (problem.n - k, problem.action_dim))
    total = 0.0
    for j, kk in enumerate(range(k, problem.n)):
        u = tail[..., j, :]
        total = total + problem.stage_costs[kk](x, u)
        x = problem.dynamics[kk](x, u) if not problem.noise_dim \
            else problem.dynamics[kk](x, u, np.zeros(x.shape[:-1] + (problem.noise_dim,)))
    return total + problem.terminal_cost(x)


@dataclass
class TabularPolicy:
    """Grid policy for one stage over a 1-D state space.

    Stores, per node, every distinct local minimizer of the stage
    subproblem plus the selected branch action and value.  Actions and
    values interpolate piecewise-linearly between nodes.
    """

    stage: int
    grid: np.ndarray                    # (G,)
    actions: np.ndarray                 # (G, M) selected branch
    values: np.ndarray                  # (G,)
    minimizer_sets: list = field(default_factory=list)  # per node: (r, M)

    def action(self, x):
        x = np.asarray(x, dtype=float)
        xs = x[..., 0]
        cols = [np.interp(xs, self.grid, self.actions[:, j])
                for j in range(self.actions.shape[1])]
        return np.stack(cols, axis=-1)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.interp(x[..., 0], self.grid, self.values)


def tabular_value(problem, policies, k, x):
    """J_k(x) under tabular policies, re-evaluated through the dynamics
    (costs of interpolated actions), not by interpolating stored J values.
    Deterministic problems only."""
    x = np.asarray(x, dtype=float)
    total = 0.0
    for kk in range(k, problem.n):
        u = policies[kk].action(x)
        total = total + problem.stage_costs[kk](x, u)
        x = problem.dynamics[kk](x, u)
    return total + problem.terminal_cost(x)


def q_function(problem, k, x, u, tail=None, engine=None):
    """Q_k(x, u): stage cost plus cost-to-go of the successor under the
    tail policy (tabular policies, PolicyParams, or an input tail array).

    For stochastic problems pass an expectation ``engine``; the expectation
    runs over stage noises w_k..w_{n-1}.
    """
    if engine is not None:
        return engine.expected_q(problem, k, x, u, tail)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    c = problem.stage_costs[k](x, u)
    xn = problem.dynamics[k](x, u) if not problem.noise_dim \
        else problem.dynamics[k](x, u, np.zeros(x.shape[:-1] + (problem.noise_dim,)))
    if k + 1 == problem.n:
        return c + problem.terminal_cost(xn)
    if isinstance(tail, PolicyParams):
        res = rollout_batch(problem, tail, x0=xn, start_stage=k + 1)
        return c + res["total"]
    if tail is not None and isinstance(tail, (list, tuple)) \
            and isinstance(tail[0] if len(tail) else None, TabularPolicy):
        return c + tabular_value(problem, tail, k + 1, xn)
    if tail is not None:
        return c + cost_to_go(problem, k + 1, xn, tail)
    raise ValueError("tail policy required for non-final stages")


def j_function(problem, k, x, tail, engine=None):
    """J_k(x) under the given tail policy (which must cover stage k)."""
    if isinstance(tail, PolicyParams):
        u = problem.policy_bases[k].action(np.asarray(x, dtype=float), tail.thetas[k])
    else:
        u = tail[k].action(np.asarray(x, dtype=float))
    return q_function(problem, k, x, u, tail, engine=engine)

"""Registered benchmark problems with machine-readable ground truth.

Each entry returns a freshly built :class:`ControlProblem` plus a dict of
expected results (stationary points, minimizers, DP verdicts, ...) used by
the reproduction command and the test suite.
"""

from __future__ import annotations

import math

import numpy as np

from .expect import Uniform
from .feasible import Box, Polytope
from .model import ControlProblem, PolicyBasis
from .smooth import ExprMap


def _scalar_cost(expr):
    return ExprMap([expr], [("x", 1), ("u", 1)], scalar=True)


def _terminal(expr="0"):
    return ExprMap([expr], [("x", 1)], scalar=True)


def _dyn(expr, noise=False):
    spec = [("x", 1), ("u", 1)] + ([("w", 1)] if noise else [])
    return ExprMap([expr], spec)


def make_example1():
    """Two-stage scalar problem with one spurious stage-1 policy branch."""
    c1 = ("0.25*u0^4 - ((3*x0+4)/3)*u0^3 + ((3*x0^2+8*x0+3)/2)*u0^2"
          " - x0*(x0+1)*(x0+3)*u0 + exp(x0^4)")
    problem = ControlProblem(
        name="example1", n=2, state_dim=1, action_dim=1,
        dynamics=[_dyn("x0+u0"), _dyn("x0+u0")],
        stage_costs=[_scalar_cost("0"), _scalar_cost(c1)],
        terminal_cost=_terminal(),
        action_set=Box([-10.0], [10.0]),
        x0=np.array([0.0]),
        eval_box=Box([-13.0], [10.0]),
    )
    truth = {
        "minima": [(-0.523, -0.523), (-0.523, 2.477), (0.938, 0.938), (0.938, 3.938)],
        "best": (0.938, 3.938),
        "dp_branches": {
            # anchor -> (policy slope, policy intercept, state range)
            "short": {"anchor": (0.0, 0.0), "coef": (1.0, 0.0), "range": (-10.0, 10.0)},
            "long": {"anchor": (0.0, 3.0), "coef": (1.0, 3.0), "range": (-13.0, 7.0)},
        },
        "tol": 1e-3,
    }
    return problem, truth


def make_example2():
    """Variant whose DP-induced pair (0,0) is stationary but not a local
    minimum; the curvature hypothesis of the local-min transfer claim
    fails there."""
    c1 = "0.25*u0^4 - (x0/3)*u0^3 - x0^2*u0^2 + exp(x0^4)"
    problem = ControlProblem(
        name="example2", n=2, state_dim=1, action_dim=1,
        dynamics=[_dyn("x0+u0"), _dyn("x0+u0")],
        stage_costs=[_scalar_cost("0"), _scalar_cost(c1)],
        terminal_cost=_terminal(),
        action_set=Box([-10.0], [10.0]),
        x0=np.array([0.0]),
        eval_box=Box([-10.0], [10.0]),
    )
    t = math.log(8.0 / 3.0) ** 0.25
    truth = {
        "stationary": [(0.0, 0.0), (t, 2 * t), (-t, -2 * t)],
        "minima": [(t, 2 * t), (-t, -2 * t)],
        "saddle": (0.0, 0.0),
        "refuting_direction": (1.0, 1.0),
        "dp_anchor_flat": (0.0, 0.0),   # continuation branch through u = -x
        "tol": 1e-3,
    }
    return problem, truth


def make_detparam():
    """One-stage problem with a linear policy class over a polytope where
    one of the two one-shot local minima fails DP certification."""
    c0 = ("0.25*u0^4 - (1/3)*(x0^2+2*x0)*u0^3 + 0.5*(2*x0^3+x0-1)*u0^2"
          " - (x0^4-x0^3+x0^2-x0)*u0")
    theta_set = Polytope(
        A=[[2.0, -1.0], [-2.0, 1.0], [2.0, 1.0], [-2.0, -1.0]],
        b=[3.0, -1.0, 3.0, -1.0],
    )
    basis = PolicyBasis(
        functions=[ExprMap(["x0"], [("x", 1)]), ExprMap(["1"], [("x", 1)])],
        action_dim=1, param_set=theta_set)
    problem = ControlProblem(
        name="detparam-counterexample", n=1, state_dim=1, action_dim=1,
        dynamics=[_dyn("x0+u0")],
        stage_costs=[_scalar_cost(c0)],
        terminal_cost=_terminal(),
        action_set=Box([-10.0], [10.0]),
        x0=np.array([1.0]),
        policy_bases=[basis],
        eval_box=Box([-3.0], [3.0]),
    )
    truth = {
        "strict_minima": [(1.0, 1.0), (1.0, -1.0)],
        "dp_accepted": (1.0, -1.0),
        "dp_rejected": (1.0, 1.0),
        "tol": 1e-3,
    }
    return problem, truth


_NOISE_HALF_WIDTH = math.sqrt(5.0 / 3.0)   # E[w^2] = E[w^4] = 5/9


def _stochastic_common(stage1_cost):
    """Two-stage stochastic problem over policies (b0; a1, b1).

    The first stage resets the state: x1 = u0 + w0 with u0 = b0 constant,
    matching the slice of affine policies that the three census coordinates
    parameterize; the second stage policy is a1*x + b1.
    """
    u_half = _NOISE_HALF_WIDTH
    basis0 = PolicyBasis([ExprMap(["1"], [("x", 1)])], 1, Box([-2.0], [2.0]))
    basis1 = PolicyBasis([ExprMap(["x0"], [("x", 1)]), ExprMap(["1"], [("x", 1)])],
                         1, Box([-2.0, -2.0], [2.0, 2.0]))
    return dict(
        n=2, state_dim=1, action_dim=1, noise_dim=1,
        dynamics=[ExprMap(["u0+w0"], [("x", 1), ("u", 1), ("w", 1)]),
                  ExprMap(["x0+u0+w0"], [("x", 1), ("u", 1), ("w", 1)])],
        stage_costs=[_scalar_cost("0"), _scalar_cost(stage1_cost)],
        terminal_cost=_terminal(),
        action_set=Box([-10.0], [10.0]),
        x0=np.array([0.0]),
        noise=[Uniform([-u_half], [u_half]), Uniform([-u_half], [u_half])],
        policy_bases=[basis0, basis1],
        eval_box=Box([-3.5], [3.5]),
    )


def make_stochastic():
    problem = ControlProblem(name="stochastic-counterexample",
                             **_stochastic_common("0.25*u0^4 - 0.5*u0^2 + x0^2"))
    r2, r6 = 1.0 / math.sqrt(2.0), 1.0 / math.sqrt(6.0)
    quad = [(0.0, s * r2, t * r6) for s in (1, -1) for t in (1, -1)]
    truth = {
        "stationary": quad + [(0.0, 1.0, 0.0), (0.0, -1.0, 0.0),
                              (0.0, 0.0, 1.0), (0.0, 0.0, -1.0), (0.0, 0.0, 0.0)],
        "minima": [(0.0, 1.0, 0.0), (0.0, -1.0, 0.0),
                   (0.0, 0.0, 1.0), (0.0, 0.0, -1.0)],
        "dp_local_minima": [(0.0, 0.0, 1.0), (0.0, 0.0, -1.0)],
        "dp_stationary_only": [(0.0, 0.0, 0.0)],
        "objective_at_001": 0.25 - 0.5 + 5.0 / 9.0,
        "tol": 1e-3,
    }
    return problem, truth


def make_equivalence():
    problem = ControlProblem(name="equivalence-example",
                             **_stochastic_common(
                                 "0.25*(u0-x0-0.5)^4 + x0^4"))
    truth = {
        "stationary": [(0.0, 1.0, 0.5)],
        "minima": [(0.0, 1.0, 0.5)],
        "dp_local_minima": [(0.0, 1.0, 0.5)],
        "tol": 1e-3,
    }
    return problem, truth


_FACTORIES = {
    "example1": make_example1,
    "example2": make_example2,
    "detparam-counterexample": make_detparam,
    "stochastic-counterexample": make_stochastic,
    "equivalence-example": make_equivalence,
}


def registry_names():
    return sorted(_FACTORIES) + ["lqr"]


def registry_lookup(name, seed=None, scenario="unconstrained"):
    """Build a registered problem.  Returns (problem, ground_truth); the
    ``lqr`` entry returns an LqrInstance instead of a ControlProblem."""
    if name == "lqr":
        from .landscape import generate_lqr
        if seed is None:
            raise ValueError("lqr requires a seed")
        inst = generate_lqr(seed, scenario)
        truth = {"dp_to_os_distance": 0.0,
                 "os_to_dp_tol_unconstrained": 1e-3}
        return inst, truth
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise KeyError(f"unknown registry entry {name!r}; "
                       f"known: {', '.join(registry_names())}")
    return factory()

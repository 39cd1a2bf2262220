"""Expectation engines: tensor quadrature and common-random-number Monte
Carlo over the per-stage noise.

Both engines expose the same surface: a frozen bank of noise realizations
with weights, plus ``expected_objective`` / ``expected_q`` built on batched
rollouts.  Gauss-Legendre handles uniform noise, Gauss-Hermite handles
Gaussian noise.  A zero-width (or absent) noise model produces a single
zero node with weight exactly 1.0 so stochastic evaluators reproduce the
deterministic ones bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import PolicyParams, rollout_batch

MAX_QUADRATURE_NODES = 10_000_000


@dataclass(frozen=True)
class Uniform:
    """Independent uniform noise on [lo_i, hi_i] per component."""

    lo: tuple
    hi: tuple

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("invalid uniform noise bounds")
        object.__setattr__(self, "lo", tuple(lo))
        object.__setattr__(self, "hi", tuple(hi))

    @property
    def dim(self):
        return len(self.lo)

    def quad_1d(self, order, i):
        lo, hi = self.lo[i], self.hi[i]
        if lo == hi:
            return np.array([lo]), np.array([1.0])
        t, w = np.polynomial.legendre.leggauss(order)
        return (lo + hi) / 2.0 + (hi - lo) / 2.0 * t, w / 2.0

    def sample(self, rng, count):
        return rng.uniform(self.lo, self.hi, size=(count, self.dim))


@dataclass(frozen=True)
class Gaussian:
    """Independent Gaussian noise with given means and standard deviations."""

    mean: tuple
    std: tuple

    def __init__(self, mean, std):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        std = np.atleast_1d(np.asarray(std, dtype=float))
        if mean.shape != std.shape or np.any(std < 0):
            raise ValueError("invalid gaussian noise parameters")
        object.__setattr__(self, "mean", tuple(mean))
        object.__setattr__(self, "std", tuple(std))

    @property
    def dim(self):
        return len(self.mean)

    def quad_1d(self, order, i):
        mu, sd = self.mean[i], self.std[i]
        if sd == 0.0:
            return np.array([mu]), np.array([1.0])
        t, w = np.polynomial.hermite.hermgauss(order)
        return mu + np.sqrt(2.0) * sd * t, w / np.sqrt(np.pi)

    def sample(self, rng, count):
        return np.asarray(self.mean) + np.asarray(self.std) * rng.standard_normal(
            size=(count, self.dim))


def crn_sample_bank(noise_model, n_stages, count, seed):
    """Frozen sample bank keyed by (seed, count): (count, n_stages, W)."""
    rng = np.random.default_rng(seed)
    draws = [noise_model[k].sample(rng, count) for k in range(n_stages)]
    return np.stack(draws, axis=1)


def _tensor_bank(dists, order):
    """Tensor-product quadrature over the stage distributions in ``dists``.

    Returns nodes (B, len(dists), W) and weights (B,)."""
    axes = []
    for dist in dists:
        for i in range(dist.dim):
            axes.append(dist.quad_1d(order, i))
    total = 1
    for nodes, _ in axes:
        total *= len(nodes)
    if total > MAX_QUADRATURE_NODES:
        raise ValueError(f"quadrature tensor grid too large ({total} nodes)")
    if not axes:
        return np.zeros((1, len(dists), 0)), np.array([1.0])
    grids = np.meshgrid(*(n for n, _ in axes), indexing="ij")
    flat = np.stack([g.ravel() for g in grids], axis=-1)  # (B, total_dims)
    weights = np.ones(flat.shape[0])
    exact_one = all(len(n) == 1 for n, _ in axes)
    if not exact_one:
        wgrids = np.meshgrid(*(w for _, w in axes), indexing="ij")
        weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    W = dists[0].dim if dists else 0
    return flat.reshape(flat.shape[0], len(dists), W), weights


class _EngineBase:
    def bank(self, problem, start_stage=0):
        raise NotImplementedError

    def _expand(self, decision, extra_axes=1):
        sl = (...,) + (None,) * extra_axes + (slice(None),)
        if isinstance(decision, PolicyParams):
            return PolicyParams([np.asarray(t, dtype=float)[sl] for t in decision.thetas])
        return np.asarray(decision, dtype=float)[sl]

    def expected_objective(self, problem, decision):
        """E[total cost] for an open-loop or parameterized decision;
        decision arrays may carry leading batch axes."""
        w, weights = self.bank(problem)
        if w is None:
            return np.asarray(rollout_batch(problem, decision)["total"], dtype=float)
        dec = self._expand(decision)
        res = rollout_batch(problem, dec, w=w)
        total = np.asarray(res["total"], dtype=float)
        return np.einsum("...b,b->...", total, weights)

    def expected_q(self, problem, k, x, u, tail):
        """E over w_k..w_{n-1} of stage cost plus tail cost from state x."""
        w, weights = self.bank(problem, start_stage=k)
        if w is None:
            from .model import q_function
            return q_function(problem, k, x, u, tail)
        x = self._expand(np.asarray(x, dtype=float))
        u = self._expand(np.asarray(u, dtype=float))
        if isinstance(tail, PolicyParams):
            tail = self._expand(tail)
        res = rollout_batch(problem, tail, w=w, x0=x, start_stage=k, first_action=u)
        total = np.asarray(res["total"], dtype=float)
        return np.einsum("...b,b->...", total, weights)


class QuadratureEngine(_EngineBase):
    """Tensor Gauss-Legendre / Gauss-Hermite quadrature, one rule per noise
    dimension per stage (default order 16)."""

    def __init__(self, order=16):
        self.order = int(order)
        self._cache = {}

    def bank(self, problem, start_stage=0):
        key = (id(problem), start_stage)
        if key not in self._cache:
            if problem.noise is None:
                self._cache[key] = (None, np.array([1.0]))
            else:
                self._cache[key] = _tensor_bank(problem.noise[start_stage:], self.order)
        return self._cache[key]


class MonteCarloEngine(_EngineBase):
    """Monte Carlo with common random numbers: the sample bank is drawn
    once from (seed, count) and reused across evaluations."""

    def __init__(self, count, seed=0):
        self.count = int(count)
        self.seed = int(seed)
        self._cache = {}

    def bank(self, problem, start_stage=0):
        key = (id(problem), start_stage)
        if key not in self._cache:
            if problem.noise is None:
                self._cache[key] = (None, np.array([1.0]))
            else:
                nodes = crn_sample_bank(problem.noise[start_stage:],
                                        problem.n - start_stage,
                                        self.count, self.seed)
                self._cache[key] = (nodes, np.full(self.count, 1.0 / self.count))
        return self._cache[key]


def make_engine(problem, kind="quadrature", order=16, mc_samples=100_000, seed=0):
    """Engine factory; deterministic problems get the trivial single-node
    engine so all evaluators share one code path."""
    if kind == "quadrature":
        return QuadratureEngine(order=order)
    if kind == "mc":
        return MonteCarloEngine(mc_samples, seed=seed)
    raise ValueError(f"unknown engine kind {kind!r}")

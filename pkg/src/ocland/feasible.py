"""Feasible sets for decisions and actions: boxes, polytopes, spectral
floors, and products of these.

Every set works on flat vectors of shape (..., dim) and supports exact (or,
for the spectral floor, retraction-based) Euclidean projection, membership
tests, sampling and a projected-gradient stationarity residual.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

TOL_FEAS = 1e-9
PG_PROBE_STEP = 1e-3


class FeasibleSet:
    dim: int

    def project(self, z):
        raise NotImplementedError

    def contains(self, z, tol=TOL_FEAS):
        z = np.asarray(z, dtype=float)
        return np.linalg.norm(self.project(z) - z, axis=-1) <= tol

    def sample(self, rng, count):
        raise NotImplementedError

    def bounding_box(self):
        """Return (lower, upper) arrays enclosing the set."""
        raise NotImplementedError

    def lattice(self, per_dim):
        lo, hi = self.bounding_box()
        axes = [np.linspace(lo[i], hi[i], per_dim) for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        return self.project(pts)

    def pg_residual(self, z, g, eta=PG_PROBE_STEP):
        """Projected-gradient stationarity surrogate
        ``|P(z - eta*g) - z| / eta`` (batched)."""
        z = np.asarray(z, dtype=float)
        g = np.asarray(g, dtype=float)
        step = self.project(z - eta * g)
        return np.linalg.norm(step - z, axis=-1) / eta

    def on_boundary(self, z, tol=1e-6):
        """True where z sits within ``tol`` of the boundary of the set."""
        raise NotImplementedError


class Box(FeasibleSet):
    def __init__(self, lower, upper):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if self.lower.shape != self.upper.shape or np.any(self.lower > self.upper):
            raise ValueError("invalid box bounds")
        self.dim = self.lower.shape[0]

    def project(self, z):
        return np.clip(np.asarray(z, dtype=float), self.lower, self.upper)

    def sample(self, rng, count):
        return rng.uniform(self.lower, self.upper, size=(count, self.dim))

    def bounding_box(self):
        return self.lower.copy(), self.upper.copy()

    def on_boundary(self, z, tol=1e-6):
        z = np.asarray(z, dtype=float)
        at = (z - self.lower <= tol) | (self.upper - z <= tol)
        return np.any(at, axis=-1)


class Polytope(FeasibleSet):
    """Convex polytope {z : A z <= b}; projection is an exact active-set
    solve (all active subsets are enumerated, which is cheap for the small
    row counts used here)."""

    def __init__(self, A, b):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.atleast_1d(np.asarray(b, dtype=float))
        self.dim = self.A.shape[1]
        r = self.A.shape[0]
        if r > 12:
            raise ValueError("polytope projection supports at most 12 rows")
        self._subsets = []
        for k in range(1, min(r, self.dim) + 1):
            for rows in combinations(range(r), k):
                As = self.A[list(rows)]
                M = As @ As.T
                if np.linalg.matrix_rank(M) < len(rows):
                    continue
                self._subsets.append((np.array(rows), As, np.linalg.inv(M)))

    def project(self, z):
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        zb = np.atleast_2d(z)
        out = zb.copy()
        slack = zb @ self.A.T - self.b
        todo = np.any(slack > TOL_FEAS * 0.0 + 1e-15, axis=-1)
        if np.any(todo):
            zt = zb[todo]
            best = np.full(zt.shape[0], np.inf)
            res = zt.copy()
            # unconstrained candidate is infeasible for these points, so the
            # projection has at least one active row
            for rows, As, Minv in self._subsets:
                lam = (zt @ As.T - self.b[rows]) @ Minv.T
                cand = zt - lam @ As
                ok = np.all(lam >= -1e-10, axis=-1)
                ok &= np.all(cand @ self.A.T - self.b <= 1e-9, axis=-1)
                dist = np.linalg.norm(cand - zt, axis=-1)
                take = ok & (dist < best)
                res[take] = cand[take]
                best[take] = dist[take]
            out[todo] = res
        return out[0] if single else out.reshape(z.shape)

    def sample(self, rng, count):
        lo, hi = self.bounding_box()
        pts = rng.uniform(lo, hi, size=(count, self.dim))
        return self.project(pts)

    def bounding_box(self):
        from scipy.optimize import linprog

        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        for i in range(self.dim):
            c = np.zeros(self.dim)
            c[i] = 1.0
            r1 = linprog(c, A_ub=self.A, b_ub=self.b, bounds=[(None, None)] * self.dim)
            r2 = linprog(-c, A_ub=self.A, b_ub=self.b, bounds=[(None, None)] * self.dim)
            if not (r1.success and r2.success):
                raise ValueError("polytope appears unbounded")
            lo[i], hi[i] = r1.fun, -r2.fun
        return lo, hi

    def on_boundary(self, z, tol=1e-6):
        z = np.asarray(z, dtype=float)
        slack = self.b - np.einsum("rd,...d->...r", self.A, z)
        return np.any(slack <= tol, axis=-1)


class SpectralFloor(FeasibleSet):
    """Matrices K (rows x cols, flattened row-major) with all singular
    values >= ``floor``.  The set is nonconvex; ``project`` is the SVD
    clamp retraction (singular values below the floor are raised to it),
    not an exact Euclidean projection.  Stationarity uses the tangent-cone
    residual in singular-vector coordinates, which is exact and avoids the
    curvature error of the probe-step surrogate on this manifold."""

    def __init__(self, rows, cols, floor):
        self.rows = int(rows)
        self.cols = int(cols)
        self.floor = float(floor)
        self.dim = self.rows * self.cols

    def _mat(self, z):
        z = np.asarray(z, dtype=float)
        return z.reshape(z.shape[:-1] + (self.rows, self.cols))

    def project(self, z):
        z = np.asarray(z, dtype=float)
        K = self._mat(z)
        U, s, Vt = np.linalg.svd(K, full_matrices=False)
        # keep feasible inputs bitwise unchanged (projection idempotence);
        # the tolerance absorbs SVD reconstruction round-off
        ok = np.min(s, axis=-1) >= self.floor * (1.0 - 1e-12)
        if np.all(ok):
            return z.copy()
        s = np.maximum(s, self.floor)
        out = np.einsum("...ij,...j,...jk->...ik", U, s, Vt)
        out = out.reshape(z.shape)
        return np.where(np.expand_dims(ok, -1), z, out)

    def contains(self, z, tol=TOL_FEAS):
        s = np.linalg.svd(self._mat(z), compute_uv=False)
        return np.min(s, axis=-1) >= self.floor - tol

    def sample(self, rng, count):
        raw = rng.normal(size=(count, self.dim)) * max(1.0, self.floor)
        return self.project(raw)

    def pg_residual(self, z, g, eta=PG_PROBE_STEP):
        z = np.asarray(z, dtype=float)
        g = np.asarray(g, dtype=float)
        K = self._mat(z)
        G = self._mat(g)
        U, s, Vt = np.linalg.svd(K, full_matrices=False)
        active = s <= self.floor * (1.0 + 1e-9) + 1e-12
        # alpha_i = u_i^T G v_i; normal-cone part of the gradient
        alpha = np.einsum("...ji,...jk,...ik->...i", U, G, Vt)
        coef = np.where(active, np.maximum(alpha, 0.0), 0.0)
        normal = np.einsum("...ji,...i,...ik->...jk", U, coef, Vt)
        resid = G - normal
        return np.linalg.norm(resid.reshape(z.shape), axis=-1)

    def on_boundary(self, z, tol=1e-6):
        s = np.linalg.svd(self._mat(z), compute_uv=False)
        return np.min(s, axis=-1) <= self.floor + tol


class ProductSet(FeasibleSet):
    """Cartesian product of feasible sets over consecutive blocks of the
    flat decision vector; projection factorizes exactly."""

    def __init__(self, blocks):
        self.blocks = list(blocks)
        self.dims = [b.dim for b in self.blocks]
        self.dim = sum(self.dims)
        self._offsets = np.cumsum([0] + self.dims)

    def _split(self, z):
        return [z[..., self._offsets[i]:self._offsets[i + 1]]
                for i in range(len(self.blocks))]

    def project(self, z):
        z = np.asarray(z, dtype=float)
        return np.concatenate([b.project(p) for b, p in zip(self.blocks, self._split(z))],
                              axis=-1)

    def sample(self, rng, count):
        return np.concatenate([b.sample(rng, count) for b in self.blocks], axis=-1)

    def bounding_box(self):
        los, his = zip(*(b.bounding_box() for b in self.blocks))
        return np.concatenate(los), np.concatenate(his)

    def on_boundary(self, z, tol=1e-6):
        z = np.asarray(z, dtype=float)
        parts = [b.on_boundary(p, tol) for b, p in zip(self.blocks, self._split(z))]
        return np.any(np.stack(parts, axis=-1), axis=-1)


def product_set(sets):
    """Combine per-stage sets, collapsing adjacent boxes into one Box."""
    if all(isinstance(s, Box) for s in sets):
        lo = np.concatenate([s.lower for s in sets])
        hi = np.concatenate([s.upper for s in sets])
        return Box(lo, hi)
    if len(sets) == 1:
        return sets[0]
    return ProductSet(sets)

"""Local solvers: projected gradient descent with Armijo backtracking, and
Newton polishing of interior stationary points.

``projected_descent`` is batched: it accepts a (B, d) block of starts and
runs all of them in lockstep with per-start line searches, which is what
makes large multistart censuses affordable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import smooth
from .diff import PG_PROBE_STEP, TOL_STAT

ARMIJO_C = 1e-4
MAX_ITER = 100_000
MIN_STEP = 1e-18
NEWTON_TARGET = 1e-10
LEVENBERG_SHIFT = 1e-8


@dataclass
class SolveResult:
    point: np.ndarray
    value: np.ndarray
    pg_norm: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    start: np.ndarray


def project(feasible, z):
    """Euclidean projection onto the feasible set (SVD-clamp retraction for
    spectral floors)."""
    return feasible.project(z)


def projected_descent(objective, gradient, start, feasible, tol_stat=TOL_STAT,
                      max_iter=MAX_ITER, armijo_c=ARMIJO_C, step0=1.0,
                      eta=PG_PROBE_STEP, stall_tol=0.0):
    """Projected gradient descent with Armijo backtracking (halving, initial
    step ``step0``).  Stops per start when the projected-gradient residual
    ``|P(z - eta g) - z|/eta`` falls below ``tol_stat``, the line search
    stalls, or ``max_iter`` is hit.

    With ``stall_tol`` > 0, a start is also retired after five consecutive
    accepted steps whose relative decrease is below ``stall_tol``; censuses
    use this to cut off slow crawls along quartic-flat valleys (the
    endpoints get Newton-polished downstream)."""
    start = np.asarray(start, dtype=float)
    single = start.ndim == 1
    z0 = np.atleast_2d(start)
    B, d = z0.shape
    z = feasible.project(z0)
    f = np.asarray(objective(z), dtype=float)

    out_z = z.copy()
    out_f = f.copy()
    out_pg = np.full(B, np.inf)
    out_conv = np.zeros(B, dtype=bool)
    out_iters = np.zeros(B, dtype=int)

    alive = np.isfinite(f)
    idx = np.nonzero(alive)[0]
    z, f = z[alive], f[alive]
    stall = np.zeros(idx.size, dtype=int)

    it = 0
    while idx.size and it < max_iter:
        it += 1
        g = np.asarray(gradient(z), dtype=float)
        bad = ~np.all(np.isfinite(g), axis=-1)
        pg = np.where(bad, np.inf, feasible.pg_residual(z, np.where(bad[:, None], 0.0, g), eta=eta))
        done = (pg <= tol_stat) | bad
        if np.any(done):
            sel = idx[done]
            out_z[sel], out_f[sel] = z[done], f[done]
            out_pg[sel] = pg[done]
            out_conv[sel] = pg[done] <= tol_stat
            out_iters[sel] = it
            keep = ~done
            idx, z, f, g = idx[keep], z[keep], f[keep], g[keep]
            stall = stall[keep]
            if not idx.size:
                break

        f_before = f.copy()
        t = np.full(idx.size, float(step0))
        cand = z.copy()
        fc = f.copy()
        pending = np.ones(idx.size, dtype=bool)
        while np.any(pending):
            trial = feasible.project(z[pending] - t[pending, None] * g[pending])
            ft = np.asarray(objective(trial), dtype=float)
            decr = np.einsum("bd,bd->b", g[pending], trial - z[pending])
            ok = np.isfinite(ft) & (ft <= f[pending] + armijo_c * decr)
            pi = np.nonzero(pending)[0]
            acc = pi[ok]
            cand[acc] = trial[ok]
            fc[acc] = ft[ok]
            pending[acc] = False
            t[pi[~ok]] *= 0.5
            stalled = pending & (t < MIN_STEP)
            if np.any(stalled):
                # line search exhausted: keep the point as-is and retire it
                sel = idx[stalled]
                out_z[sel], out_f[sel] = z[stalled], f[stalled]
                out_pg[sel] = feasible.pg_residual(z[stalled], g[stalled], eta=eta)
                out_conv[sel] = out_pg[sel] <= tol_stat
                out_iters[sel] = it
                keep = ~stalled
                idx, z, f, g = idx[keep], z[keep], f[keep], g[keep]
                cand, fc, t = cand[keep], fc[keep], t[keep]
                pending, stall, f_before = pending[keep], stall[keep], f_before[keep]
        z, f = cand, fc

        if stall_tol > 0.0 and idx.size:
            rel = (f_before - f) / (1.0 + np.abs(f))
            stall = np.where(rel < stall_tol, stall + 1, 0)
            tired = stall >= 5
            if np.any(tired):
                gt = np.asarray(gradient(z[tired]), dtype=float)
                sel = idx[tired]
                out_z[sel], out_f[sel] = z[tired], f[tired]
                out_pg[sel] = feasible.pg_residual(z[tired], gt, eta=eta)
                out_conv[sel] = out_pg[sel] <= tol_stat
                out_iters[sel] = it
                keep = ~tired
                idx, z, f, stall = idx[keep], z[keep], f[keep], stall[keep]

    if idx.size:  # ran out of iterations
        g = np.asarray(gradient(z), dtype=float)
        pg = feasible.pg_residual(z, g, eta=eta)
        out_z[idx], out_f[idx], out_pg[idx] = z, f, pg
        out_conv[idx] = pg <= tol_stat
        out_iters[idx] = it

    if single:
        return SolveResult(point=out_z[0], value=float(out_f[0]),
                           pg_norm=float(out_pg[0]), converged=bool(out_conv[0]),
                           iterations=int(out_iters[0]), start=start)
    return SolveResult(point=out_z, value=out_f, pg_norm=out_pg,
                       converged=out_conv, iterations=out_iters, start=z0)


def newton_polish(objective, gradient, point, feasible, target=NEWTON_TARGET,
                  max_iter=60, shift0=LEVENBERG_SHIFT, boundary_tol=1e-6):
    """Polish an interior stationary-point candidate by damped Newton steps
    on the gradient system (targets stationary points of any index).
    Boundary points are returned unchanged."""
    z = np.asarray(point, dtype=float).copy()
    if bool(np.asarray(feasible.on_boundary(z, tol=boundary_tol))):
        return z
    obj1 = lambda p: float(np.asarray(objective(np.atleast_2d(p))).ravel()[0])
    grad1 = lambda p: np.asarray(gradient(np.atleast_2d(p)), dtype=float).reshape(-1)
    g = grad1(z)
    gn = np.linalg.norm(g)
    for _ in range(max_iter):
        if not np.isfinite(gn) or gn <= target:
            break
        H = smooth.fd_hessian(obj1, z)
        shift = 0.0
        improved = False
        while shift < 1e6:
            try:
                step = np.linalg.solve(H + shift * np.eye(len(z)), -g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                cand = z + step
                if bool(np.asarray(feasible.contains(cand, tol=1e-9))) \
                        and not bool(np.asarray(feasible.on_boundary(cand, tol=boundary_tol))):
                    gc = grad1(cand)
                    gcn = np.linalg.norm(gc)
                    if np.isfinite(gcn) and gcn < gn:
                        z, g, gn = cand, gc, gcn
                        improved = True
                        break
            shift = shift0 if shift == 0.0 else shift * 2.0
        if not improved:
            break
    return z

"""Vector-valued smooth maps with analytic or finite-difference jacobians.

All maps broadcast over a leading batch shape: arguments have shape
``(..., d_in)`` and values ``(..., d_out)`` (or ``(...,)`` for scalar maps).
Finite differences use central steps ``h = FD_GRAD_STEP * max(1, |z_i|)``
per component.
"""

from __future__ import annotations

import numpy as np

from . import expr as _expr

FD_GRAD_STEP = 1e-6
FD_HESS_STEP = 1e-4


class SmoothFn:
    """A map f(arg_0, ..., arg_{k-1}) -> R^out with jacobians per argument.

    Parameters
    ----------
    fn : callable taking ``k`` arrays shaped (..., d_i), returning
        (..., out_dim) (or (...,) when ``scalar``).
    arg_dims : tuple of input dimensions.
    out_dim : output dimension.
    jacs : optional tuple of callables; ``jacs[i]`` returns the jacobian
        with respect to argument ``i`` shaped (..., out_dim, d_i) (for a
        scalar map, the gradient shaped (..., d_i)).  Missing entries fall
        back to central finite differences.
    """

    def __init__(self, fn, arg_dims, out_dim, jacs=None, scalar=False):
        self.fn = fn
        self.arg_dims = tuple(int(d) for d in arg_dims)
        self.out_dim = int(out_dim)
        self.scalar = bool(scalar)
        self.jacs = tuple(jacs) if jacs is not None else (None,) * len(self.arg_dims)

    def __call__(self, *args):
        return self.fn(*args)

    def jac(self, i, *args):
        j = self.jacs[i]
        if j is not None:
            return j(*args)
        return self._fd_jac(i, *args)

    def _fd_jac(self, i, *args):
        z = np.asarray(args[i], dtype=float)
        d = self.arg_dims[i]
        h = FD_GRAD_STEP * np.maximum(1.0, np.abs(z))
        cols = []
        for j in range(d):
            dz = np.zeros_like(z)
            dz[..., j] = h[..., j]
            hi = self.fn(*args[:i], z + dz, *args[i + 1:])
            lo = self.fn(*args[:i], z - dz, *args[i + 1:])
            cols.append((np.asarray(hi) - np.asarray(lo)) / (2.0 * h[..., j])[..., None]
                        if not self.scalar
                        else (np.asarray(hi) - np.asarray(lo)) / (2.0 * h[..., j]))
        if self.scalar:
            return np.stack(cols, axis=-1)
        return np.stack(cols, axis=-1)


class ExprMap(SmoothFn):
    """SmoothFn compiled from DSL expressions.

    ``exprs`` is a list of AST nodes (one per output component) and
    ``arg_spec`` a list of (variable prefix, dimension) pairs, e.g.
    ``[("x", 1), ("u", 1)]``.  Derivatives are symbolic.
    """

    def __init__(self, exprs, arg_spec, scalar=False):
        if isinstance(exprs, (str, _expr.Node)):
            exprs = [exprs]
        self.exprs = [_expr.parse(e) if isinstance(e, str) else e for e in exprs]
        self.arg_spec = [(p, int(d)) for p, d in arg_spec]
        self._derivs = {}
        if scalar and len(self.exprs) != 1:
            raise ValueError("scalar ExprMap needs exactly one expression")
        super().__init__(self._eval, [d for _, d in self.arg_spec],
                         len(self.exprs), jacs=None, scalar=scalar)
        self.jacs = tuple(self._make_jac(i) for i in range(len(self.arg_spec)))

    def _env(self, args):
        env = {}
        for (prefix, d), arg in zip(self.arg_spec, args):
            arg = np.asarray(arg, dtype=float)
            for j in range(d):
                env[f"{prefix}{j}"] = arg[..., j]
        return env

    def _eval(self, *args):
        env = self._env(args)
        shape = np.broadcast_shapes(*(np.shape(v) for v in env.values())) if env else ()
        vals = [np.broadcast_to(np.asarray(e.eval(env), dtype=float), shape)
                for e in self.exprs]
        if self.scalar:
            return vals[0]
        return np.stack(vals, axis=-1)

    def _deriv(self, out_idx, name):
        key = (out_idx, name)
        if key not in self._derivs:
            self._derivs[key] = self.exprs[out_idx].diff(name)
        return self._derivs[key]

    def _make_jac(self, i):
        prefix, d = self.arg_spec[i]

        def jac(*args):
            env = self._env(args)
            shape = np.broadcast_shapes(*(np.shape(v) for v in env.values())) if env else ()
            rows = []
            for oi in range(len(self.exprs)):
                row = [np.broadcast_to(
                    np.asarray(self._deriv(oi, f"{prefix}{j}").eval(env), dtype=float),
                    shape) for j in range(d)]
                rows.append(np.stack(row, axis=-1))
            if self.scalar:
                return rows[0]
            return np.stack(rows, axis=-2)

        return jac

    def split_action_terms(self):
        """Return (action-dependent part, action-free part) as ExprMaps with
        the same signature; only meaningful for scalar cost expressions."""
        dep, const = _expr.split_by_variables(self.exprs[0], "u")
        mk = lambda e: ExprMap([e], self.arg_spec, scalar=self.scalar)
        return mk(dep), mk(const)


def fd_gradient(f, z, step=FD_GRAD_STEP):
    """Central finite-difference gradient of a scalar function of a flat
    vector; batched over leading axes of ``z``."""
    z = np.asarray(z, dtype=float)
    h = step * np.maximum(1.0, np.abs(z))
    cols = []
    for j in range(z.shape[-1]):
        dz = np.zeros_like(z)
        dz[..., j] = h[..., j]
        cols.append((np.asarray(f(z + dz)) - np.asarray(f(z - dz))) / (2.0 * h[..., j]))
    return np.stack(cols, axis=-1)


def fd_hessian(f, z, step=FD_HESS_STEP):
    """Central finite-difference Hessian (symmetrized) of a scalar function
    at a single point ``z`` of shape (d,)."""
    z = np.asarray(z, dtype=float)
    d = z.shape[-1]
    h = step * np.maximum(1.0, np.abs(z))
    H = np.empty((d, d))
    f0 = float(f(z))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h[i]
        H[i, i] = (float(f(z + ei)) - 2.0 * f0 + float(f(z - ei))) / (h[i] * h[i])
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                float(f(z + ei + ej)) - float(f(z + ei - ej))
                - float(f(z - ei + ej)) + float(f(z - ei - ej))
            ) / (4.0 * h[i] * h[j])
    return H

"""Internal helpers turning sympy expressions into vectorized numpy evaluators.

Closed-form metrics and potentials are stored symbolically; their component
functions and exact partial derivatives are generated here once per object and
cached as a single lambdified call, so pointwise queries stay cheap and batch
queries (quadrature nodes, surface grids) vectorize.
"""

import numpy as np
import sympy as sp


def coordinate_symbols(n):
    return sp.symbols(f"x1:{n + 1}", real=True)


def lambdify_flat(exprs, syms):
    """Lambdify a flat list of expressions into one vectorized callable.

    Returns ``f(pts)`` mapping an array of shape (..., n) to (..., len(exprs)).
    Constant expressions are broadcast to the batch shape.
    """
    exprs = [sp.sympify(e) for e in exprs]
    fn = sp.lambdify(syms, exprs, modules="numpy", cse=True)

    def call(pts):
        pts = np.asarray(pts, dtype=float)
        cols = fn(*(pts[..., i] for i in range(len(syms))))
        out = np.empty(pts.shape[:-1] + (len(exprs),))
        for j, c in enumerate(cols):
            out[..., j] = c
        return out

    return call


def metric_jet_functions(gmat, syms):
    """Exact jet evaluators for a symbolic metric matrix.

    Returns ``(g_fn, jet_fn)`` where ``g_fn(pts) -> (..., n, n)`` and
    ``jet_fn(pts) -> (g, dg, ddg)`` with index conventions
    ``dg[..., k, i, j] = d_k g_ij`` and ``ddg[..., k, l, i, j] = d_k d_l g_ij``.
    """
    n = len(syms)
    g_exprs = [gmat[i, j] for i in range(n) for j in range(n)]
    dg_exprs = [sp.diff(gmat[i, j], syms[k])
                for k in range(n) for i in range(n) for j in range(n)]
    ddg_exprs = [sp.diff(gmat[i, j], syms[k], syms[l])
                 for k in range(n) for l in range(n)
                 for i in range(n) for j in range(n)]

    g_flat = lambdify_flat(g_exprs, syms)
    all_flat = lambdify_flat(g_exprs + dg_exprs + ddg_exprs, syms)

    def g_fn(pts):
        vals = g_flat(pts)
        return vals.reshape(vals.shape[:-1] + (n, n))

    def jet_fn(pts):
        vals = all_flat(pts)
        base = vals.shape[:-1]
        g = vals[..., : n * n].reshape(base + (n, n))
        dg = vals[..., n * n: n * n + n ** 3].reshape(base + (n, n, n))
        ddg = vals[..., n * n + n ** 3:].reshape(base + (n, n, n, n))
        return g, dg, ddg

    return g_fn, jet_fn


def scalar_jet_functions(expr, syms):
    """Exact value / gradient / Hessian evaluators for a symbolic scalar."""
    n = len(syms)
    grads = [sp.diff(expr, s) for s in syms]
    hess = [sp.diff(expr, syms[k], syms[l]) for k in range(n) for l in range(n)]
    flat = lambdify_flat([expr] + grads + hess, syms)

    def value(pts):
        return flat(pts)[..., 0]

    def grad(pts):
        return flat(pts)[..., 1: 1 + n]

    def hessian(pts):
        vals = flat(pts)
        return vals[..., 1 + n:].reshape(vals.shape[:-1] + (n, n))

    return value, grad, hessian


def vector_jet_functions(vec_exprs, syms):
    """Value / Jacobian / second-derivative evaluators for a symbolic vector field.

    ``jac[..., k, i] = d_k v^i`` and ``hess[..., k, l, i] = d_k d_l v^i``.
    """
    n = len(syms)
    m = len(vec_exprs)
    jac = [sp.diff(vec_exprs[i], syms[k]) for k in range(n) for i in range(m)]
    hess = [sp.diff(vec_exprs[i], syms[k], syms[l])
            for k in range(n) for l in range(n) for i in range(m)]
    flat = lambdify_flat(list(vec_exprs) + jac + hess, syms)

    def call(pts):
        vals = flat(pts)
        base = vals.shape[:-1]
        v = vals[..., :m]
        dv = vals[..., m: m + n * m].reshape(base + (n, m))
        ddv = vals[..., m + n * m:].reshape(base + (n, n, m))
        return v, dv, ddv

    return call

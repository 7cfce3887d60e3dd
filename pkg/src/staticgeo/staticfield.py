"""Static potentials: the adjoint-linearization residual, structural checks,
a harmonic solver on annuli, and zero-set extraction as graphs.

The central operator is ``L*V = -(Lap V) g + nabla^2 V - V Ric``; a static
potential is a nontrivial solution of ``L*V = 0``.  Its metric trace is
``-(n-1) Lap V - R V``, so on scalar-flat metrics static potentials are
harmonic, and the trace equation is the only scalar problem solved here; the
full overdetermined system is only ever *reported* as a residual.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla
import sympy as sp

from . import _sym
from ._interp import TensorSpline
from .charts import Point, metric_jet
from .curvature import christoffel, curvature_arrays, hessian_arrays
from .errors import (ChartDomainError, SolverError, StaticGeoError,
                     TransversalityError)

log = logging.getLogger("staticgeo")


class ScalarFieldSpec:
    """A C^2 scalar field with vectorized value / gradient / Hessian access."""

    def __init__(self, value, grad, hess, n=3, kind="closed-form",
                 sym_expr=None, metric=None, name="field"):
        self.value = value
        self.grad = grad
        self.hess = hess
        self.n = int(n)
        self.kind = kind
        self.sym_expr = sym_expr
        self.metric = metric
        self.name = name
        self.solve_report = None

    def __repr__(self):
        return f"ScalarFieldSpec({self.name!r}, kind={self.kind!r})"

    def __call__(self, pts):
        return self.value(np.asarray(pts, dtype=float))

    @classmethod
    def from_sympy(cls, expr, n=3, metric=None, name="field"):
        expr = sp.sympify(expr)
        syms = _sym.coordinate_symbols(n)
        value, grad, hess = _sym.scalar_jet_functions(expr, syms)
        return cls(value, grad, hess, n=n, kind="closed-form",
                   sym_expr=expr, metric=metric, name=name)

    @classmethod
    def constant(cls, c, n=3, metric=None):
        return cls.from_sympy(sp.Float(float(c)), n=n, metric=metric,
                              name=f"const({c})")

    @classmethod
    def linear(cls, coeffs, const=0.0, metric=None):
        syms = _sym.coordinate_symbols(len(coeffs))
        expr = sum(float(c) * s for c, s in zip(coeffs, syms)) + float(const)
        return cls.from_sympy(expr, n=len(coeffs), metric=metric,
                              name="linear")

    def scaled(self, c):
        if self.sym_expr is not None:
            return ScalarFieldSpec.from_sympy(c * self.sym_expr, n=self.n,
                                              metric=self.metric,
                                              name=f"{c}*{self.name}")
        return ScalarFieldSpec(
            lambda pts: c * self.value(pts),
            lambda pts: c * self.grad(pts),
            lambda pts: c * self.hess(pts),
            n=self.n, kind=self.kind, metric=self.metric,
            name=f"{c}*{self.name}")


def exact_potential(spec):
    """The exact static potential attached to a catalog metric, if any."""
    expr = spec.oracles.potential_expr
    if expr is None:
        raise StaticGeoError(f"{spec.name} carries no exact potential oracle")
    return ScalarFieldSpec.from_sympy(expr, n=spec.n, metric=spec,
                                      name=f"{spec.name}-potential")


def flat_harmonic_field(spec, harmonic_expr, name="u-harmonic"):
    """Metric-harmonic field ``h/u`` on a conformally flat metric ``u^{4/(n-2)} delta``.

    Valid when ``h`` and the conformal factor ``u`` are Euclidean-harmonic;
    such fields supply asymptotically linear boundary data for the Plateau
    experiments.  They are *not* static potentials in general.
    """
    u = spec.oracles.conformal_factor_expr
    if u is None:
        raise StaticGeoError(f"{spec.name} is not conformally flat from u")
    return ScalarFieldSpec.from_sympy(sp.sympify(harmonic_expr) / u,
                                      n=spec.n, metric=spec, name=name)


# -- the static operator ---------------------------------------------------


@dataclass
class StaticResidual:
    """``L*V`` at a point, its g-norm, and the trace diagnostic."""

    point: np.ndarray
    tensor: np.ndarray
    g_norm: float
    trace: float
    trace_expected: float    # -(n-1) Lap V - R V

    @property
    def trace_defect(self):
        return abs(self.trace - self.trace_expected)


def _static_tensor_batch(spec, V, pts):
    g, dg, ddg = spec.jet(pts)
    g_inv = np.linalg.inv(g)
    gamma, _, ric, scal = curvature_arrays(g, g_inv, dg, ddg)
    dV = V.grad(pts)
    ddV = V.hess(pts)
    hess, lap, _ = hessian_arrays(g_inv, gamma, dV, ddV)
    val = V.value(pts)
    tensor = (-lap[..., None, None] * g + hess
              - val[..., None, None] * ric)
    norm = np.sqrt(np.einsum("...ik,...jl,...ij,...kl->...",
                             g_inv, g_inv, tensor, tensor))
    trace = np.einsum("...ij,...ij->...", g_inv, tensor)
    n = spec.n
    expected = -(n - 1) * lap - scal * val
    return tensor, norm, trace, expected


def static_residual(spec, V, p):
    """Evaluate ``L*V = -(Lap V) g + nabla^2 V - V Ric`` at a point.

    Returns the residual tensor, its g-norm, and the trace diagnostic; the
    norm vanishes exactly when ``V`` solves the static equation at ``p``.
    """
    x = spec.coords_of(p)
    tensor, norm, trace, expected = _static_tensor_batch(spec, V, x[None])
    res = StaticResidual(point=x, tensor=tensor[0], g_norm=float(norm[0]),
                         trace=float(trace[0]),
                         trace_expected=float(expected[0]))
    scale = 1.0 + abs(res.trace_expected)
    if res.trace_defect > 1e-10 * scale:
        raise StaticGeoError(
            f"trace identity violated by {res.trace_defect:.3e}; "
            "inconsistent curvature/Hessian inputs")
    return res


def static_residual_sup(spec, V, pts):
    """Max g-norm of ``L*V`` over a batch of chart points."""
    _, norm, _, _ = _static_tensor_batch(spec, V, np.asarray(pts, dtype=float))
    return float(np.max(norm))


@dataclass
class ConstancyReport:
    """Deviation of the scalar curvature across sample points."""

    max_deviation: float
    scalars: np.ndarray
    flagged: bool
    tol: float


def scalar_constancy_check(spec, samples, tol=1e-8):
    """Max deviation of R over the samples; flags metrics whose scalar
    curvature is non-constant (they cannot admit static potentials)."""
    pts = np.asarray([spec.coords_of(p) for p in samples], dtype=float)
    if pts.shape[0] < 2:
        raise ValueError("need at least two sample points")
    g, dg, ddg = spec.jet(pts)
    g_inv = np.linalg.inv(g)
    _, _, _, scal = curvature_arrays(g, g_inv, dg, ddg)
    dev = float(np.max(np.abs(scal - scal[0])))
    return ConstancyReport(max_deviation=dev, scalars=scal,
                           flagged=dev > tol, tol=tol)


# -- spherical coordinates helpers -----------------------------------------


def spherical_to_cartesian(q):
    """(rho, theta, phi) -> (x, y, z), vectorized on the leading axes."""
    rho, th, ph = q[..., 0], q[..., 1], q[..., 2]
    st, ct = np.sin(th), np.cos(th)
    return np.stack([rho * st * np.cos(ph), rho * st * np.sin(ph), rho * ct],
                    axis=-1)


def cartesian_to_spherical(x):
    rho = np.linalg.norm(x, axis=-1)
    th = np.arccos(np.clip(x[..., 2] / np.maximum(rho, 1e-300), -1.0, 1.0))
    ph = np.mod(np.arctan2(x[..., 1], x[..., 0]), 2.0 * np.pi)
    return np.stack([rho, th, ph], axis=-1)


def _spherical_map_jets(q):
    """First and second derivatives of x(rho, theta, phi).

    Returns (x, J, H) with ``J[..., a, i] = d x^i / d q^a`` and
    ``H[..., a, b, i] = d^2 x^i / d q^a d q^b``.
    """
    rho, th, ph = q[..., 0], q[..., 1], q[..., 2]
    st, ct = np.sin(th), np.cos(th)
    cp, sP = np.cos(ph), np.sin(ph)
    shape = q.shape[:-1]
    x = np.stack([rho * st * cp, rho * st * sP, rho * ct], axis=-1)
    J = np.zeros(shape + (3, 3))
    J[..., 0, 0] = st * cp
    J[..., 0, 1] = st * sP
    J[..., 0, 2] = ct
    J[..., 1, 0] = rho * ct * cp
    J[..., 1, 1] = rho * ct * sP
    J[..., 1, 2] = -rho * st
    J[..., 2, 0] = -rho * st * sP
    J[..., 2, 1] = rho * st * cp
    H = np.zeros(shape + (3, 3, 3))
    H[..., 0, 1, 0] = H[..., 1, 0, 0] = ct * cp
    H[..., 0, 1, 1] = H[..., 1, 0, 1] = ct * sP
    H[..., 0, 1, 2] = H[..., 1, 0, 2] = -st
    H[..., 0, 2, 0] = H[..., 2, 0, 0] = -st * sP
    H[..., 0, 2, 1] = H[..., 2, 0, 1] = st * cp
    H[..., 1, 1, 0] = -rho * st * cp
    H[..., 1, 1, 1] = -rho * st * sP
    H[..., 1, 1, 2] = -rho * ct
    H[..., 1, 2, 0] = H[..., 2, 1, 0] = -rho * ct * sP
    H[..., 1, 2, 1] = H[..., 2, 1, 1] = rho * ct * cp
    H[..., 2, 2, 0] = -rho * st * cp
    H[..., 2, 2, 1] = -rho * st * sP
    return x, J, H


def _pullback_jet(spec, q):
    """Metric and first partials in spherical coordinates (numeric pullback)."""
    x, J, H = _spherical_map_jets(q)
    g, dg, _ = spec.jet(x)
    gq = np.einsum("...ai,...bj,...ij->...ab", J, J, g)
    dg_term = np.einsum("...ck,...ai,...bj,...kij->...cab", J, J, J, dg)
    h_term = (np.einsum("...cai,...bj,...ij->...cab", H, J, g)
              + np.einsum("...ai,...cbj,...ij->...cab", J, H, g))
    return x, gq, dg_term + h_term


# -- the annulus solver -----------------------------------------------------


def _smallest_scalar_samples(spec, r0, r1, count=24, seed=6):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(count, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    radii = np.exp(rng.uniform(np.log(r0), np.log(r1), size=count))
    return u * radii[:, None]


def solve_harmonic_annulus(spec, inner_bc, outer_bc, r_inner, r_outer,
                           shape=(96, 16, 32), log_radial=True,
                           scalar_tol=1e-6, direct_limit=80000):
    """Solve ``Lap_g V = 0`` on the annulus ``r_inner < |x| < r_outer``.

    Dirichlet data on both coordinate spheres is read from ``inner_bc`` and
    ``outer_bc``.  The metric must be scalar-flat (checked), which makes the
    trace of the static equation the harmonic equation; the full static
    residual of the discrete solution is only a diagnostic afterwards.

    Second-order stencils on a spherical-product grid: radial nodes (log
    spaced by default) include both boundary spheres, the colatitude grid is
    cell-centered with antipodal closure across the poles, and longitude is
    periodic.  Small systems are solved directly, larger ones by a
    preconditioned Krylov iteration.

    Returns a tabulated :class:`ScalarFieldSpec`; ``solve_report`` carries the
    residual norm, boundary sup norms and solver metadata.
    """
    if not (1.0 <= r_inner < r_outer):
        raise ChartDomainError("annulus must satisfy 1 <= r_inner < r_outer")
    rep = scalar_constancy_check(
        spec, _smallest_scalar_samples(spec, r_inner, r_outer), tol=scalar_tol)
    if rep.flagged:
        raise SolverError(
            f"metric is not scalar-flat (R deviation {rep.max_deviation:.2e});"
            " the harmonic trace equation does not apply")

    nr, nth, nph = shape
    if nr < 4 or nth < 4 or nph < 8 or nph % 2:
        raise ValueError("grid must satisfy nr>=4, nth>=4, nph>=8 even")
    if log_radial:
        s_nodes = np.linspace(np.log(r_inner), np.log(r_outer), nr)
        rho_nodes = np.exp(s_nodes)
    else:
        rho_nodes = np.linspace(r_inner, r_outer, nr)
        s_nodes = rho_nodes
    dth = np.pi / nth
    th_nodes = (np.arange(nth) + 0.5) * dth
    dph = 2.0 * np.pi / nph
    ph_nodes = np.arange(nph) * dph
    ds = s_nodes[1] - s_nodes[0]

    Q = np.stack(np.meshgrid(rho_nodes, th_nodes, ph_nodes, indexing="ij"),
                 axis=-1)
    X, gq, dgq = _pullback_jet(spec, Q.reshape(-1, 3))
    gq_inv = np.linalg.inv(gq)
    gam = christoffel(gq_inv, dgq)
    # Lap V = a^{ab} d_a d_b V + b^c d_c V in (rho, theta, phi)
    a_coef = gq_inv
    b_coef = -np.einsum("...ab,...cab->...c", gq_inv, gam)
    if log_radial:
        # chain rule to s = log rho: d_rho = (1/rho) d_s
        rho_flat = Q.reshape(-1, 3)[:, 0]
        a_s = a_coef.copy()
        b_s = b_coef.copy()
        a_s[:, 0, 0] = a_coef[:, 0, 0] / rho_flat ** 2
        a_s[:, 0, 1:] = a_coef[:, 0, 1:] / rho_flat[:, None]
        a_s[:, 1:, 0] = a_coef[:, 1:, 0] / rho_flat[:, None]
        b_s[:, 0] = b_coef[:, 0] / rho_flat - a_coef[:, 0, 0] / rho_flat ** 2
        a_coef, b_coef = a_s, b_s
    a_coef = a_coef.reshape(nr, nth, nph, 3, 3)
    b_coef = b_coef.reshape(nr, nth, nph, 3)

    def node_id(i, j, k):
        return (i * nth + j) * nph + (k % nph)

    def wrapped(i, j, k):
        # antipodal closure across the poles in theta
        if j < 0:
            return i, -1 - j, k + nph // 2
        if j >= nth:
            return i, 2 * nth - 1 - j, k + nph // 2
        return i, j, k

    steps = (ds, dth, dph)
    rows, cols, vals = [], [], []
    rhs = np.zeros(nr * nth * nph)
    interior = np.ones(nr * nth * nph, dtype=bool)

    bc_inner = inner_bc.value(spherical_to_cartesian(Q[0]))
    bc_outer = outer_bc.value(spherical_to_cartesian(Q[-1]))
    dirichlet = np.full((nr, nth, nph), np.nan)
    dirichlet[0] = bc_inner
    dirichlet[-1] = bc_outer

    def add(i, j, k, ii, jj, kk, coef, row_id):
        ii, jj, kk = wrapped(ii, jj, kk)
        if ii == 0 or ii == nr - 1:
            rhs[row_id] -= coef * dirichlet[ii, jj, kk % nph]
        else:
            rows.append(row_id)
            cols.append(node_id(ii, jj, kk))
            vals.append(coef)

    offsets_axis = {0: (1, 0, 0), 1: (0, 1, 0), 2: (0, 0, 1)}
    for i in range(1, nr - 1):
        for j in range(nth):
            for k in range(nph):
                rid = node_id(i, j, k)
                A = a_coef[i, j, k]
                B = b_coef[i, j, k]
                for ax in range(3):
                    d = steps[ax]
                    o = offsets_axis[ax]
                    c2 = A[ax, ax] / d ** 2
                    c1 = B[ax] / (2.0 * d)
                    add(i, j, k, i + o[0], j + o[1], k + o[2], c2 + c1, rid)
                    add(i, j, k, i - o[0], j - o[1], k - o[2], c2 - c1, rid)
                    add(i, j, k, i, j, k, -2.0 * c2, rid)
                for ax1 in range(3):
                    for ax2 in range(ax1 + 1, 3):
                        cx = 2.0 * A[ax1, ax2] / (4.0 * steps[ax1] * steps[ax2])
                        if cx == 0.0:
                            continue
                        o1, o2 = offsets_axis[ax1], offsets_axis[ax2]
                        for s1 in (+1, -1):
                            for s2 in (+1, -1):
                                add(i, j, k,
                                    i + s1 * o1[0] + s2 * o2[0],
                                    j + s1 * o1[1] + s2 * o2[1],
                                    k + s1 * o1[2] + s2 * o2[2],
                                    s1 * s2 * cx, rid)

    for j in range(nth):
        for k in range(nph):
            for i in (0, nr - 1):
                rid = node_id(i, j, k)
                interior[rid] = False

    idx_interior = np.where(interior)[0]
    renum = -np.ones(nr * nth * nph, dtype=int)
    renum[idx_interior] = np.arange(idx_interior.size)
    rows = renum[np.asarray(rows)]
    cols_arr = renum[np.asarray(cols)]
    keep = cols_arr >= 0
    if not np.all(keep):
        raise SolverError("stencil leaked outside the annulus grid")
    A_mat = sparse.csr_matrix(
        (np.asarray(vals)[keep], (rows[keep], cols_arr[keep])),
        shape=(idx_interior.size, idx_interior.size))
    b_vec = rhs[idx_interior]

    if idx_interior.size <= direct_limit:
        sol = spla.spsolve(A_mat.tocsc(), b_vec)
        method = "sparse-lu"
    else:
        ilu = spla.spilu(A_mat.tocsc(), drop_tol=1e-5, fill_factor=12)
        M = spla.LinearOperator(A_mat.shape, ilu.solve)
        sol, info = spla.lgmres(A_mat, b_vec, M=M, rtol=1e-12, atol=0.0,
                                maxiter=4000)
        if info != 0:
            raise SolverError(f"Krylov solver did not converge (info={info})")
        method = "ilu-lgmres"

    values = np.empty((nr, nth, nph))
    values[0] = bc_inner
    values[-1] = bc_outer
    values.reshape(-1)[idx_interior] = sol
    resid = float(np.linalg.norm(A_mat @ sol - b_vec)
                  / max(1.0, np.linalg.norm(b_vec)))

    fieldspec = spherical_grid_field(rho_nodes, th_nodes, ph_nodes, values,
                                     metric=spec, name="annulus-harmonic")
    fieldspec.solve_report = {
        "grid": (nr, nth, nph),
        "log_radial": log_radial,
        "linear_residual": resid,
        "method": method,
        "outer_sup": float(np.abs(bc_outer).max()),
        "inner_sup": float(np.abs(bc_inner).max()),
        "normalization": "reported relative to outer-boundary sup norm",
    }
    log.info("annulus solve %s: residual %.2e via %s", shape, resid, method)
    return fieldspec


def spherical_grid_field(rho_nodes, th_nodes, ph_nodes, values, metric=None,
                         name="tabulated"):
    """Scalar field from samples on a spherical-product grid.

    The colatitude axis is extended across the poles by the antipodal
    identification ``V(-theta, phi) = V(theta, phi + pi)`` and the longitude
    axis by periodic wrap before splining, so derivative evaluation stays
    accurate near the poles and the seam.  Cartesian gradients and Hessians
    come from the chain rule through the coordinate map; evaluation exactly on
    the polar axis is ill-conditioned and should be avoided.
    """
    values = np.asarray(values, dtype=float)
    rho_nodes = np.asarray(rho_nodes, dtype=float)
    th_nodes = np.asarray(th_nodes, dtype=float)
    ph_nodes = np.asarray(ph_nodes, dtype=float)
    nr, nth, nph = values.shape
    if nph % 2:
        raise ValueError("longitude count must be even for antipodal closure")
    pad = 3
    rolled = np.roll(values, -(nph // 2), axis=2)       # phi -> phi + pi
    v_th = np.concatenate([rolled[:, :pad][:, ::-1], values,
                           rolled[:, -pad:][:, ::-1]], axis=1)
    th_full = np.concatenate([-th_nodes[:pad][::-1], th_nodes,
                              2.0 * np.pi - th_nodes[-pad:][::-1]])
    v_full = np.concatenate([v_th[:, :, -pad:], v_th, v_th[:, :, :pad]],
                            axis=2)
    ph_full = np.concatenate([ph_nodes[-pad:] - 2.0 * np.pi, ph_nodes,
                              ph_nodes[:pad] + 2.0 * np.pi])
    spline = TensorSpline([rho_nodes, th_full, ph_full], v_full)
    rho_lo, rho_hi = rho_nodes[0], rho_nodes[-1]

    def to_q(pts):
        q = cartesian_to_spherical(np.asarray(pts, dtype=float))
        r = q[..., 0]
        if np.any((r < rho_lo - 1e-9) | (r > rho_hi + 1e-9)):
            raise ChartDomainError("point outside tabulated radial range")
        return q

    def value(pts):
        return spline(to_q(pts))

    def grad(pts):
        q = to_q(pts)
        _, J, _ = _spherical_map_jets(q)
        Jinv = np.linalg.inv(J)          # Jinv[..., i, a] = d q^a / d x^i
        dq = spline.gradient(q)
        return np.einsum("...ia,...a->...i", Jinv, dq)

    def hess(pts):
        q = to_q(pts)
        _, J, H = _spherical_map_jets(q)
        Ji = np.swapaxes(np.linalg.inv(J), -1, -2)   # Ji[..., a, i] = d q^a / d x^i
        dq = spline.gradient(q)
        ddq = spline.hessian(q)
        d2q = -np.einsum("...ak,...cdk,...ci,...dj->...aij", Ji, H, Ji, Ji)
        return (np.einsum("...ab,...ai,...bj->...ij", ddq, Ji, Ji)
                + np.einsum("...a,...aij->...ij", dq, d2q))

    return ScalarFieldSpec(value, grad, hess, n=3, kind="tabulated-grid",
                           metric=metric, name=name)


# -- zero sets as graphs ----------------------------------------------------


@dataclass
class ZeroSetGraph:
    """One component of ``V^{-1}(0)``, written as a graph over a window.

    ``x[direction] = f(x')`` on the sampled window; ``grid_axes`` hold the
    two transverse sample axes and ``heights`` the root locations.  The
    fitted envelope constants bound ``|f| <= C |x'|^gamma`` and
    ``|grad f| <= C_grad |x'|^(gamma-1)`` over the sampled window.
    """

    component: int
    direction: int
    axes: tuple            # indices of the transverse coordinates
    grid_axes: tuple       # 1-D arrays of transverse samples
    heights: np.ndarray    # (N1, N2)
    grad_bound: float
    envelope_C: float
    envelope_gamma: float
    root_tol: float
    max_abs_value: float   # max |V| re-evaluated at the sampled roots
    field: object = None

    def points(self):
        """Embedded sample points, shape (N1*N2, n)."""
        A1, A2 = np.meshgrid(*self.grid_axes, indexing="ij")
        n = len(self.axes) + 1
        pts = np.zeros(A1.shape + (n,))
        pts[..., self.axes[0]] = A1
        pts[..., self.axes[1]] = A2
        pts[..., self.direction] = self.heights
        return pts.reshape(-1, n)

    def interpolator(self):
        return TensorSpline(list(self.grid_axes), self.heights)


def _refine_root(field, base, direction, lo, hi, tol):
    """Bisection bracketing followed by one Newton polish per scan line."""
    f = lambda s: _line_value(field, base, direction, s)
    flo, fhi = f(lo), f(hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if flo * fm <= 0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
        if hi - lo < max(tol, 1e-15 * (1 + abs(mid))):
            break
    s = 0.5 * (lo + hi)
    pt = _line_point(base, direction, s)
    dV = field.grad(pt)[direction]
    if abs(dV) > 1e-14:
        s = s - field.value(pt) / dV
    return s


def _line_point(base, direction, s):
    pt = np.array(base, dtype=float)
    pt[direction] = s
    return pt


def _line_value(field, base, direction, s):
    return float(field.value(_line_point(base, direction, s)))


def zero_set_extract(V, window, direction=None, scan=None, grid=(17, 17),
                     scan_samples=64, root_tol=1e-10, deriv_floor=1e-8):
    """Extract the components of ``V^{-1}(0)`` over a window as graphs.

    ``window`` is a pair of (lo, hi) intervals for the transverse coordinates
    ``x'``; scan lines run along ``direction`` (default: the last axis) over
    the ``scan`` interval.  Roots are bracketed by sign changes on the scan
    samples, refined by bisection plus one Newton step, and grouped into
    components by their per-line ordering (the root index at the window's
    inner boundary labels the component).

    Raises :class:`TransversalityError` when a scan line sees no sign change
    or the vertical derivative degenerates at a root.
    """
    n = V.n
    direction = n - 1 if direction is None else int(direction)
    axes = tuple(i for i in range(n) if i != direction)
    if len(window) != 2 or len(axes) != 2:
        raise ValueError("zero-set graphs need exactly two transverse axes")
    if scan is None:
        span = max(abs(w[0]) + abs(w[1]) for w in window)
        scan = (-span, span)
    a1 = np.linspace(window[0][0], window[0][1], grid[0])
    a2 = np.linspace(window[1][0], window[1][1], grid[1])
    svals = np.linspace(scan[0], scan[1], scan_samples)

    A1, A2 = np.meshgrid(a1, a2, indexing="ij")
    lines = np.zeros((grid[0], grid[1], scan_samples, n))
    lines[..., axes[0]] = A1[..., None]
    lines[..., axes[1]] = A2[..., None]
    lines[..., direction] = svals
    vals = V.value(lines.reshape(-1, n)).reshape(grid[0], grid[1],
                                                 scan_samples)

    sign_change = vals[..., :-1] * vals[..., 1:] <= 0
    counts = sign_change.sum(axis=-1)
    k = int(counts.flat[0])
    if k == 0:
        raise TransversalityError(
            "V is sign-definite along a scan line; no zero set in window")
    if not np.all(counts == k):
        raise TransversalityError(
            f"inconsistent root counts across scan lines "
            f"(min {counts.min()}, max {counts.max()}); "
            "window does not isolate graph components")

    heights = np.empty((k, grid[0], grid[1]))
    max_val = 0.0
    for i in range(grid[0]):
        for j in range(grid[1]):
            base = lines[i, j, 0]
            roots = []
            for s_idx in np.where(sign_change[i, j])[0]:
                s = _refine_root(V, base, direction,
                                 svals[s_idx], svals[s_idx + 1], root_tol)
                roots.append(s)
            roots.sort()
            for c in range(k):
                pt = _line_point(base, direction, roots[c])
                dV = V.grad(pt)[direction]
                if abs(dV) < deriv_floor:
                    raise TransversalityError(
                        f"vertical derivative {dV:.2e} below floor at {pt}")
                max_val = max(max_val, abs(_line_value(V, base, direction,
                                                       roots[c])))
                heights[c, i, j] = roots[c]

    graphs = []
    for c in range(k):
        f = heights[c]
        g1 = np.gradient(f, a1, axis=0)
        g2 = np.gradient(f, a2, axis=1)
        gnorm = np.sqrt(g1 ** 2 + g2 ** 2)
        rho = np.sqrt(A1 ** 2 + A2 ** 2)
        mask = rho > 0.1 * rho.max()
        if np.abs(f).max() < 1e-10:
            C, gam = 0.0, 0.0
        else:
            y = np.log(np.maximum(np.abs(f[mask]), 1e-15))
            gam, logC = np.polyfit(np.log(rho[mask]), y, 1)
            C = float(np.max(np.abs(f[mask]) * rho[mask] ** (-gam)))
        graphs.append(ZeroSetGraph(
            component=c, direction=direction, axes=axes, grid_axes=(a1, a2),
            heights=f, grad_bound=float(gnorm.max()), envelope_C=C,
            envelope_gamma=float(gam), root_tol=root_tol,
            max_abs_value=float(max_val), field=V))
    return graphs


def level_set_geometry_check(spec, graph, static_tol=None):
    """Sup of the second-fundamental-form norm over a zero-set graph.

    Uses the implicit representation: on a level set, the shape operator is
    the restricted covariant Hessian scaled by ``1/|grad V|_g``, so no
    embedding differentiation is involved and exact field derivatives give
    machine-accurate results.  The zero set of a static potential is totally
    geodesic, so the check passes near zero for statically consistent data.
    """
    V = graph.field
    pts = graph.points()
    if static_tol is not None:
        sup = static_residual_sup(spec, V, pts)
        if sup > static_tol:
            raise StaticGeoError(
                f"field static residual {sup:.2e} above {static_tol:.1e}")
    g, dg, _ = spec.jet(pts)
    g_inv = np.linalg.inv(g)
    gamma_sym = christoffel(g_inv, dg)
    dV = V.grad(pts)
    ddV = V.hess(pts)
    hess, _, _ = hessian_arrays(g_inv, gamma_sym, dV, ddV)
    grad_norm = np.sqrt(np.einsum("...ij,...i,...j->...", g_inv, dV, dV))

    n = spec.n
    d = graph.direction
    slope = -dV[:, list(graph.axes)] / dV[:, d][:, None]
    tang = np.zeros((pts.shape[0], n - 1, n))
    for a, ax in enumerate(graph.axes):
        tang[:, a, ax] = 1.0
        tang[:, a, d] = slope[:, a]
    A = np.einsum("...ai,...bj,...ij->...ab", tang, tang, hess)
    A /= grad_norm[:, None, None]
    gamma_ind = np.einsum("...ai,...bj,...ij->...ab", tang, tang, g)
    gamma_inv = np.linalg.inv(gamma_ind)
    norms = np.sqrt(np.einsum("...ac,...bd,...ab,...cd->...",
                              gamma_inv, gamma_inv, A, A))
    return float(np.max(norms))

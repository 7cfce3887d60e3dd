"""Coordinate charts and the asymptotically flat metric catalog.

A metric lives in a single Cartesian chart of one end.  Every catalog entry
carries exact symbolic components, so first and second partial derivatives are
generated analytically; a centered finite-difference path exists as an
independent cross-check.  Tabulated metrics interpolate gridded components
with tensor-product cubic splines.

All evaluators are vectorized: an array of shape (..., n) of chart coordinates
maps to (..., n, n) metric components and to stacked derivative tensors with
the conventions ``dg[..., k, i, j] = d_k g_ij`` and
``ddg[..., k, l, i, j] = d_k d_l g_ij``.
"""

from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from . import _sym
from ._interp import TensorSpline, uniform_axes
from .errors import (CatalogError, ChartDomainError, DegenerateMetricError,
                     ResolutionError)

CATALOG_NAMES = ("euclidean", "schwarzschild_isotropic",
                 "schwarzschild_standard", "conformally_flat",
                 "perturbed_flat")

# default relative finite-difference step, clamped to documented bounds
FD_STEP_REL = 1e-3
FD_STEP_MIN = 1e-5
FD_STEP_MAX = 1e-1


@dataclass(frozen=True)
class Point:
    """A point in the chart of one end."""

    coords: np.ndarray
    chart_id: str = "end-0"

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float))
        if self.coords.ndim != 1 or self.coords.size < 3:
            raise ValueError("need at least 3 coordinates in a single chart")

    @property
    def n(self):
        return self.coords.size

    @property
    def radius(self):
        return float(np.linalg.norm(self.coords))


@dataclass
class MetricOracles:
    """Optional exact reference data attached to a catalog metric."""

    potential_expr: object = None        # sympy expression for an exact static potential
    adm_mass: float = None
    sphere_mean_curvature: object = None  # callable rho -> H of the coordinate sphere
    ricci_eigenvalues: object = None      # callable r -> sorted eigenvalue triple
    horizon_radius: float = None
    conformal_factor_expr: object = None


class MetricSpec:
    """A chart-based metric with vectorized component and jet evaluators."""

    def __init__(self, name, n, kind, params, g_fn, jet_fn, sym=None,
                 chart_id="end-0", inner_radius=0.0, is_end_chart=True,
                 decay_q=None, oracles=None, domain_box=None):
        self.name = name
        self.n = int(n)
        self.kind = kind
        self.params = dict(params)
        self._g_fn = g_fn
        self._jet_fn = jet_fn
        self.sym = sym                      # (matrix, symbols) for closed forms
        self.chart_id = chart_id
        self.inner_radius = float(inner_radius)
        self.is_end_chart = bool(is_end_chart)
        self.decay_q = decay_q
        self.oracles = oracles or MetricOracles()
        self.domain_box = domain_box        # (lo, hi) arrays for tabulated charts

    def __repr__(self):
        return f"MetricSpec({self.name!r}, n={self.n}, kind={self.kind!r})"

    # -- evaluation ---------------------------------------------------------

    def coords_of(self, p):
        x = p.coords if isinstance(p, Point) else np.asarray(p, dtype=float)
        return x

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1)
        ok = r > self.inner_radius
        if self.domain_box is not None:
            lo, hi = self.domain_box
            ok = ok & np.all((pts >= lo) & (pts <= hi), axis=-1)
        return ok

    def require_inside(self, pts):
        if not np.all(self.contains(pts)):
            raise ChartDomainError(
                f"point outside chart domain of {self.name} "
                f"(inner radius {self.inner_radius})")

    def g(self, pts):
        pts = np.asarray(pts, dtype=float)
        self.require_inside(pts)
        return self._g_fn(pts)

    def jet(self, pts):
        """Exact (g, dg, ddg) stacks at chart points."""
        pts = np.asarray(pts, dtype=float)
        self.require_inside(pts)
        return self._jet_fn(pts)

    def sqrt_det(self, pts):
        return np.sqrt(np.linalg.det(self.g(pts)))

    def fd_jet(self, pts, step=None):
        """(g, dg, ddg) by centered 4th-order differences of the g evaluator."""
        pts = np.asarray(pts, dtype=float)
        self.require_inside(pts)
        n = self.n
        if step is None:
            r = np.linalg.norm(pts, axis=-1, keepdims=True)
            h = np.clip(FD_STEP_REL * np.maximum(r, 1.0), FD_STEP_MIN, FD_STEP_MAX)
        else:
            h = np.broadcast_to(float(step), pts.shape[:-1] + (1,))
        c1 = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0     # offsets -2,-1,1,2
        o1 = np.array([-2.0, -1.0, 1.0, 2.0])
        c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0  # offsets -2..2
        o2 = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        g0 = self._g_fn(pts)
        dg = np.empty(pts.shape[:-1] + (n, n, n))
        ddg = np.empty(pts.shape[:-1] + (n, n, n, n))
        ek = np.eye(n)
        for k in range(n):
            shifted = pts[..., None, :] + o1[:, None] * h[..., None] * ek[k]
            vals = self._g_fn(shifted)
            dg[..., k, :, :] = np.einsum("s,...sij->...ij", c1, vals) / h[..., None]
            shifted2 = pts[..., None, :] + o2[:, None] * h[..., None] * ek[k]
            vals2 = self._g_fn(shifted2)
            ddg[..., k, k, :, :] = (np.einsum("s,...sij->...ij", c2, vals2)
                                    / h[..., None] ** 2)
        for k in range(n):
            for l in range(k + 1, n):
                off = (o1[:, None, None] * ek[k] + o1[None, :, None] * ek[l])
                shifted = pts[..., None, None, :] + off * h[..., None, None]
                vals = self._g_fn(shifted)
                mixed = np.einsum("a,b,...abij->...ij", c1, c1, vals)
                mixed = mixed / h[..., None] ** 2
                ddg[..., k, l, :, :] = mixed
                ddg[..., l, k, :, :] = mixed
        return g0, dg, ddg


class MetricJet:
    """Metric components and partials at one point, with consistency checks."""

    TOL = {"analytic": 1e-12, "fd": 1e-8}

    def __init__(self, g, dg, ddg, point, source="analytic"):
        self.g = np.asarray(g, dtype=float)
        self.dg = np.asarray(dg, dtype=float)
        self.ddg = np.asarray(ddg, dtype=float)
        self.point = np.asarray(point, dtype=float)
        self.source = source
        n = self.g.shape[-1]
        if not np.allclose(self.g, np.swapaxes(self.g, -1, -2), atol=1e-12):
            raise DegenerateMetricError("metric components not symmetric")
        try:
            np.linalg.cholesky(self.g)
        except np.linalg.LinAlgError:
            raise DegenerateMetricError(
                f"metric not positive definite at {self.point}") from None
        self.g_inv = np.linalg.inv(self.g)
        tol = self.TOL.get(source, 1e-8)
        resid = np.abs(self.g @ self.g_inv - np.eye(n)).max()
        if resid > tol:
            raise DegenerateMetricError(
                f"inverse consistency {resid:.3e} above {tol:.1e}")
        sym_resid = np.abs(self.ddg - np.swapaxes(self.ddg, 0, 1)).max()
        scale = 1.0 + np.abs(self.ddg).max()
        if sym_resid > 1e3 * tol * scale:
            raise DegenerateMetricError(
                f"second partials not symmetric in derivative slots "
                f"({sym_resid:.3e})")
        self.sqrt_det = float(np.sqrt(np.linalg.det(self.g)))

    @property
    def n(self):
        return self.g.shape[-1]


def metric_jet(spec, p, mode="analytic", step=None):
    """Evaluate the metric jet at a point.

    ``mode='analytic'`` uses exact symbolic (or spline) derivatives;
    ``mode='fd'`` uses centered 4th-order differences of the component
    evaluator with step ``1e-3 |x|`` clamped to [1e-5, 1e-1].
    """
    x = spec.coords_of(p)
    if mode == "analytic":
        g, dg, ddg = spec.jet(x)
        return MetricJet(g, dg, ddg, x, source="analytic")
    if mode == "fd":
        g, dg, ddg = spec.fd_jet(x, step=step)
        return MetricJet(g, dg, ddg, x, source="fd")
    raise ValueError(f"unknown jet mode {mode!r}")


# -- catalog --------------------------------------------------------------


def _radial(syms):
    return sp.sqrt(sum(s ** 2 for s in syms))


def _closed_form_spec(name, n, gmat, params, kind="closed-form", **kw):
    syms = _sym.coordinate_symbols(n)
    gmat = sp.Matrix(gmat)
    g_fn, jet_fn = _sym.metric_jet_functions(gmat, syms)
    return MetricSpec(name, n, kind, params, g_fn, jet_fn,
                      sym=(gmat, syms), **kw)


def closed_form_metric(component_matrix, n=3, name="custom", params=None,
                       **kw):
    """Wrap an explicit symbolic component matrix (in ``x1..xn``) as a spec.

    Meant for bespoke charts in tests and experiments, e.g. pullbacks of the
    flat metric under an explicit diffeomorphism.
    """
    kw.setdefault("is_end_chart", False)
    return _closed_form_spec(name, n, component_matrix, params or {}, **kw)


def isotropic_to_areal(m, rho):
    """Areal radius of the coordinate sphere ``|x| = rho`` (isotropic chart)."""
    rho = np.asarray(rho, dtype=float)
    return rho * (1.0 + m / (2.0 * rho)) ** 2


def areal_to_isotropic(m, r):
    """Inverse of :func:`isotropic_to_areal`, valid for ``r >= 2m``."""
    r = np.asarray(r, dtype=float)
    return 0.25 * (np.sqrt(r) + np.sqrt(r - 2.0 * m)) ** 2


def builtin_metric(name, **params):
    """Instantiate a catalog metric with exact oracles attached where known.

    Catalog names: ``euclidean``, ``schwarzschild_isotropic``,
    ``schwarzschild_standard``, ``conformally_flat``, ``perturbed_flat``.
    """
    if name not in CATALOG_NAMES:
        raise CatalogError(f"unknown catalog metric {name!r}; "
                           f"choose from {CATALOG_NAMES}")
    n = int(params.pop("n", 3))
    if n < 3:
        raise CatalogError("dimension must satisfy n >= 3")

    if name == "euclidean":
        _reject_extra(name, params)
        syms = _sym.coordinate_symbols(n)
        oracles = MetricOracles(potential_expr=sp.Integer(1), adm_mass=0.0,
                                sphere_mean_curvature=lambda r: (n - 1) / np.asarray(r, dtype=float),
                                ricci_eigenvalues=lambda r: np.zeros(n))
        return _closed_form_spec(name, n, sp.eye(n), {}, oracles=oracles)

    if name == "schwarzschild_isotropic":
        m = float(params.pop("m", 1.0))
        _reject_extra(name, params)
        if m <= 0:
            raise CatalogError("Schwarzschild mass must satisfy m > 0")
        if n != 3:
            raise CatalogError("Schwarzschild catalog entries are 3-dimensional")
        syms = _sym.coordinate_symbols(n)
        rho = _radial(syms)
        u = 1 + m / (2 * rho)
        gmat = u ** 4 * sp.eye(3)
        V = (1 - m / (2 * rho)) / (1 + m / (2 * rho))

        def sphere_H(r, m=m):
            r = np.asarray(r, dtype=float)
            uu = 1.0 + m / (2.0 * r)
            return 2.0 * (r - m / 2.0) / (r * uu ** 2 * (r + m / 2.0))

        def ricci_eigs(rho_val, m=m):
            # eigenvalues of the spatial Ricci tensor at |x| = rho, expressed
            # through the areal radius; radial one is the doubled negative.
            r = isotropic_to_areal(m, rho_val)
            lam = m / r ** 3
            return np.array([-2.0 * lam, lam, lam])

        oracles = MetricOracles(potential_expr=V, adm_mass=m,
                                sphere_mean_curvature=sphere_H,
                                ricci_eigenvalues=ricci_eigs,
                                horizon_radius=m / 2.0,
                                conformal_factor_expr=u)
        return _closed_form_spec(name, 3, gmat, {"m": m},
                                 kind="conformally-flat-from-u",
                                 inner_radius=1e-8, decay_q=1.0,
                                 oracles=oracles)

    if name == "schwarzschild_standard":
        m = float(params.pop("m", 1.0))
        _reject_extra(name, params)
        if m <= 0:
            raise CatalogError("Schwarzschild mass must satisfy m > 0")
        if n != 3:
            raise CatalogError("Schwarzschild catalog entries are 3-dimensional")
        syms = _sym.coordinate_symbols(3)
        r = _radial(syms)
        X = sp.Matrix(syms)
        gmat = sp.eye(3) + (2 * m / (r - 2 * m)) * (X * X.T) / r ** 2
        V = sp.sqrt(1 - 2 * m / r)

        def sphere_H(rv, m=m):
            rv = np.asarray(rv, dtype=float)
            return (2.0 / rv) * np.sqrt(1.0 - 2.0 * m / rv)

        def ricci_eigs(rv, m=m):
            lam = m / np.asarray(rv, dtype=float) ** 3
            return np.array([-2.0 * lam, lam, lam])

        oracles = MetricOracles(potential_expr=V, adm_mass=m,
                                sphere_mean_curvature=sphere_H,
                                ricci_eigenvalues=ricci_eigs,
                                horizon_radius=2.0 * m)
        return _closed_form_spec(name, 3, gmat, {"m": m},
                                 inner_radius=2.0 * m * (1 + 1e-10),
                                 decay_q=1.0, oracles=oracles)

    if name == "conformally_flat":
        amp = float(params.pop("amp", 0.5))
        u_kind = params.pop("u_kind", "harmonic")
        _reject_extra(name, params)
        syms = _sym.coordinate_symbols(n)
        rho = _radial(syms)
        if u_kind == "harmonic":
            u = 1 + amp / rho ** (n - 2)
            mass = 2.0 * amp
            decay_q = float(n - 2)
        elif u_kind == "exp":
            u = 1 + amp * sp.exp(-rho)
            mass = None
            decay_q = None
        else:
            raise CatalogError(f"unknown conformal factor kind {u_kind!r}")
        gmat = u ** sp.Rational(4, n - 2) * sp.eye(n)
        oracles = MetricOracles(adm_mass=mass, conformal_factor_expr=u)
        return _closed_form_spec(name, n, gmat,
                                 {"amp": amp, "u_kind": u_kind},
                                 kind="conformally-flat-from-u",
                                 inner_radius=1e-8, decay_q=decay_q,
                                 oracles=oracles)

    if name == "perturbed_flat":
        q = float(params.pop("q", 1.0))
        eps = float(params.pop("eps", 0.05))
        _reject_extra(name, params)
        if q <= (n - 2) / 2.0:
            raise CatalogError(
                f"decay exponent q={q} at or below (n-2)/2 = {(n - 2) / 2:g}")
        if not -1.0 < eps:
            raise CatalogError("perturbation amplitude must exceed -1")
        syms = _sym.coordinate_symbols(n)
        rho = _radial(syms)
        X = sp.Matrix(syms)
        gmat = sp.eye(n) + eps * rho ** (-q) * (X * X.T) / rho ** 2
        mass = eps / 2.0 if (q == 1.0 and n == 3) else None
        oracles = MetricOracles(adm_mass=mass)
        return _closed_form_spec(name, n, gmat, {"q": q, "eps": eps},
                                 inner_radius=0.05, decay_q=q,
                                 oracles=oracles)

    raise CatalogError(name)


def _reject_extra(name, params):
    if params:
        raise CatalogError(f"unexpected parameters for {name}: "
                           f"{sorted(params)}")


# -- decay verification ---------------------------------------------------


@dataclass
class DecayReport:
    """Log-log fit of sup-norm metric deviations over coordinate spheres."""

    radii: np.ndarray
    deviations: np.ndarray          # max of |g-delta|, r|dg|, r^2|ddg| per radius
    declared_q: float
    fitted_q: float = None
    fitted_C: float = None
    worst_C: float = None
    exactly_flat: bool = False
    passed: bool = False
    margin: float = 0.1

    def summary(self):
        if self.exactly_flat:
            return "exactly flat: deviations identically 0"
        state = "pass" if self.passed else "FAIL"
        return (f"fitted q = {self.fitted_q:.3f} (declared {self.declared_q}),"
                f" C = {self.fitted_C:.3g}, worst C = {self.worst_C:.3g}"
                f" [{state}]")


def decay_report(spec, radii, resolution=8, margin=0.1):
    """Fit the decay exponent of ``|g - delta| + |x||dg| + |x|^2|ddg|``.

    Samples quadrature nodes on each coordinate sphere, takes the sup of the
    three scaled deviation norms, and regresses log-deviation on log-radius.
    Passes when the fitted exponent is at least ``declared_q - margin``.
    """
    from .quadrature import sphere_quadrature

    radii = np.asarray(radii, dtype=float)
    if radii.size < 3:
        raise ValueError("need at least 3 radii for a decay fit")
    if not (np.all(np.diff(radii) > 0) and radii[0] > 1.0):
        raise ValueError("radii must be increasing and all > 1")
    if not spec.is_end_chart:
        raise ChartDomainError("decay check requires an end chart")

    devs = np.empty_like(radii)
    eye = np.eye(spec.n)
    for i, r in enumerate(radii):
        quad = sphere_quadrature(r, resolution, n=spec.n)
        g, dg, ddg = spec.jet(quad.points)
        devs[i] = max(np.abs(g - eye).max(),
                      r * np.abs(dg).max(),
                      r ** 2 * np.abs(ddg).max())

    declared = spec.decay_q if spec.decay_q is not None else (spec.n - 2) / 2.0
    rep = DecayReport(radii=radii, deviations=devs, declared_q=float(declared),
                      margin=margin)
    if devs.max() < 1e-13:
        rep.exactly_flat = True
        rep.fitted_q = np.inf
        rep.fitted_C = 0.0
        rep.worst_C = 0.0
        rep.passed = True
        return rep
    slope, logC = np.polyfit(np.log(radii), np.log(np.maximum(devs, 1e-300)), 1)
    rep.fitted_q = -float(slope)
    rep.fitted_C = float(np.exp(logC))
    rep.worst_C = float(np.max(devs * radii ** declared))
    rep.passed = rep.fitted_q >= declared - margin
    return rep


# -- gridded metrics and the grid file format ------------------------------


def _triu_index(n):
    return [(i, j) for i in range(n) for j in range(i, n)]


def tabulated_metric(lo, hi, shape, values, name="tabulated", decay_q=None,
                     is_end_chart=True):
    """Metric from gridded independent components (upper triangle, row-major).

    ``values`` has shape ``(*shape, n(n+1)/2)`` on the uniform grid spanned by
    ``lo``/``hi``.  Components are interpolated by tensor-product cubic
    splines; jets are exact derivatives of the interpolant.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    idx = _triu_index(n)
    values = np.asarray(values, dtype=float)
    if values.shape != tuple(shape) + (len(idx),):
        raise ValueError(f"component array must have shape {tuple(shape)} + "
                         f"({len(idx)},)")
    spline = TensorSpline(uniform_axes(lo, hi, shape), values)
    pad = 2.0 * np.max((hi - lo) / (np.asarray(shape) - 1))
    box = (lo + pad, hi - pad)

    def g_fn(pts):
        comps = spline(pts)
        g = np.empty(pts.shape[:-1] + (n, n))
        for c, (i, j) in enumerate(idx):
            g[..., i, j] = comps[..., c]
            g[..., j, i] = comps[..., c]
        return g

    def jet_fn(pts):
        comps = spline(pts)
        dcomps = spline.gradient(pts)
        ddcomps = spline.hessian(pts)
        base = pts.shape[:-1]
        g = np.empty(base + (n, n))
        dg = np.empty(base + (n, n, n))
        ddg = np.empty(base + (n, n, n, n))
        for c, (i, j) in enumerate(idx):
            g[..., i, j] = g[..., j, i] = comps[..., c]
            dg[..., :, i, j] = dg[..., :, j, i] = dcomps[..., c]
            ddg[..., :, :, i, j] = ddg[..., :, :, j, i] = ddcomps[..., c]
        return g, dg, ddg

    return MetricSpec(name, n, "tabulated-grid", {"shape": tuple(shape)},
                      g_fn, jet_fn, inner_radius=0.0, is_end_chart=is_end_chart,
                      decay_q=decay_q, domain_box=box)


def sample_metric_grid(spec, lo, hi, shape):
    """Sample a spec's independent components on a uniform grid."""
    axes = uniform_axes(lo, hi, shape)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    g = spec.g(mesh)
    idx = _triu_index(spec.n)
    return np.stack([g[..., i, j] for (i, j) in idx], axis=-1)


def _format_vec(v):
    return ",".join(repr(float(x)) for x in v)


def write_grid_file(path, lo, hi, shape, values):
    """Write the documented grid file: one ASCII header line, then raw
    little-endian float64 in C order of shape ``(*shape, ncomp)``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    header = (f"n={lo.size} lo={_format_vec(lo)} hi={_format_vec(hi)} "
              f"shape={','.join(str(int(s)) for s in shape)}\n")
    arr = np.ascontiguousarray(np.asarray(values, dtype="<f8"))
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(arr.tobytes())


def read_grid_file(path):
    """Read the grid file format; returns ``(lo, hi, shape, values)`` where
    ``values`` has shape ``(*shape, ncomp)`` with ncomp inferred from size."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        payload = fh.read()
    fields = dict(tok.split("=", 1) for tok in header.split())
    n = int(fields["n"])
    lo = np.array([float(t) for t in fields["lo"].split(",")])
    hi = np.array([float(t) for t in fields["hi"].split(",")])
    shape = tuple(int(t) for t in fields["shape"].split(","))
    if lo.size != n or hi.size != n:
        raise ValueError("header vectors inconsistent with dimension")
    flat = np.frombuffer(payload, dtype="<f8")
    ngrid = int(np.prod(shape))
    if flat.size % ngrid:
        raise ValueError("payload size incompatible with grid shape")
    ncomp = flat.size // ngrid
    return lo, hi, shape, flat.reshape(shape + (ncomp,)).astype(float)


def save_metric_grid(path, spec, lo, hi, shape):
    write_grid_file(path, lo, hi, shape, sample_metric_grid(spec, lo, hi, shape))


def load_metric_grid(path, name=None, decay_q=None):
    lo, hi, shape, values = read_grid_file(path)
    n = lo.size
    if values.shape[-1] != n * (n + 1) // 2:
        raise ValueError("file does not hold n(n+1)/2 metric components")
    return tabulated_metric(lo, hi, shape, values,
                            name=name or "tabulated", decay_q=decay_q)

"""Christoffel symbols, Riemann / Ricci / scalar curvature, covariant Hessians.

Sign conventions, pinned by the positivity of round-sphere curvature:

* ``R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_{[X,Y]} Z``,
  in components ``R^l_{ijk} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
  + Gamma^l_{im} Gamma^m_{jk} - Gamma^l_{jm} Gamma^m_{ik}``.
* Fully covariant tensor ``Rm_{ijkl} = g_{lm} R^m_{ijk}``.
* Ricci is the trace on the first and fourth slots:
  ``Ric_{jk} = g^{il} Rm_{ijkl}``; scalar ``R = g^{jk} Ric_{jk}``.

All assembly routines are batched: leading axes of the jet arrays broadcast.
"""

from dataclasses import dataclass

import numpy as np

from .charts import MetricJet, metric_jet
from .errors import DegenerateMetricError


def christoffel(g_inv, dg):
    """``Gamma^a_{bc}`` from the inverse metric and ``dg[...,k,i,j] = d_k g_ij``."""
    S = (np.einsum("...bdc->...dbc", dg[..., :, :, :])
         + np.einsum("...cdb->...dbc", dg)
         - np.einsum("...dbc->...dbc", dg))
    return 0.5 * np.einsum("...ad,...dbc->...abc", g_inv, S)


def christoffel_partials(g_inv, dg, ddg):
    """``d_p Gamma^a_{bc}`` from exact metric jets."""
    S = (np.einsum("...bdc->...dbc", dg)
         + np.einsum("...cdb->...dbc", dg)
         - dg)
    dS = (np.einsum("...pbdc->...pdbc", ddg)
          + np.einsum("...pcdb->...pdbc", ddg)
          - np.einsum("...pdbc->...pdbc", ddg))
    dg_inv = -np.einsum("...ae,...pef,...fd->...pad", g_inv, dg, g_inv)
    return (0.5 * np.einsum("...pad,...dbc->...pabc", dg_inv, S)
            + 0.5 * np.einsum("...ad,...pdbc->...pabc", g_inv, dS))


def riemann_down(g, gamma, dgamma):
    """Fully covariant ``Rm_{ijkl}`` from Christoffels and their partials."""
    r_up = (np.einsum("...iljk->...lijk", dgamma)
            - np.einsum("...jlik->...lijk", dgamma)
            + np.einsum("...lim,...mjk->...lijk", gamma, gamma)
            - np.einsum("...ljm,...mik->...lijk", gamma, gamma))
    return np.einsum("...lm,...mijk->...ijkl", g, r_up)


def ricci_from_riemann(g_inv, rm):
    return np.einsum("...il,...ijkl->...jk", g_inv, rm)


def curvature_arrays(g, g_inv, dg, ddg):
    """Batched (Gamma, Rm, Ric, R) from metric jet arrays."""
    gamma = christoffel(g_inv, dg)
    dgamma = christoffel_partials(g_inv, dg, ddg)
    rm = riemann_down(g, gamma, dgamma)
    ric = ricci_from_riemann(g_inv, rm)
    scal = np.einsum("...jk,...jk->...", g_inv, ric)
    return gamma, rm, ric, scal


@dataclass
class CurvatureBundle:
    """Curvature data of the ambient metric at a single point."""

    point: np.ndarray
    gamma: np.ndarray        # Gamma^k_{ij}
    riemann: np.ndarray      # Rm_{ijkl}, fully covariant
    ricci: np.ndarray
    scalar: float
    source: str = "analytic"

    SYM_TOL = {"analytic": 1e-9, "fd": 1e-6}

    def check_invariants(self):
        rm = self.riemann
        scale = 1.0 + np.abs(rm).max()
        tol = self.SYM_TOL.get(self.source, 1e-6) * scale
        res = {
            "antisym_first": np.abs(rm + np.einsum("ijkl->jikl", rm)).max(),
            "antisym_last": np.abs(rm + np.einsum("ijkl->ijlk", rm)).max(),
            "pair_sym": np.abs(rm - np.einsum("ijkl->klij", rm)).max(),
            "first_bianchi": np.abs(rm + np.einsum("ijkl->jkil", rm)
                                    + np.einsum("ijkl->kijl", rm)).max(),
        }
        worst = max(res.values())
        if worst > tol:
            raise DegenerateMetricError(
                f"curvature symmetry residual {worst:.3e} above {tol:.1e} "
                f"({res})")
        return res


def curvature_bundle(spec, p, mode="analytic", step=None):
    """Curvature of ``spec`` at point ``p`` with invariants verified."""
    jet = metric_jet(spec, p, mode=mode, step=step)
    gamma, rm, ric, scal = curvature_arrays(jet.g, jet.g_inv, jet.dg, jet.ddg)
    bundle = CurvatureBundle(point=jet.point, gamma=gamma, riemann=rm,
                             ricci=ric, scalar=float(scal), source=jet.source)
    bundle.check_invariants()
    return bundle


@dataclass
class HessianData:
    """Covariant Hessian, Laplacian and raised gradient of a scalar at a point."""

    point: np.ndarray
    hessian: np.ndarray      # (nabla^2 V)_{ij}
    laplacian: float
    gradient: np.ndarray     # index raised: g^{ij} d_j V


def hessian_arrays(g_inv, gamma, dV, ddV):
    """Batched covariant Hessian / Laplacian / raised gradient."""
    hess = ddV - np.einsum("...kij,...k->...ij", gamma, dV)
    lap = np.einsum("...ij,...ij->...", g_inv, hess)
    grad = np.einsum("...ij,...j->...i", g_inv, dV)
    return hess, lap, grad


def covariant_hessian(spec, V, p, mode="analytic"):
    """Covariant Hessian data of the scalar field ``V`` at point ``p``.

    The Hessian includes the Christoffel correction
    ``(nabla^2 V)_ij = d_i d_j V - Gamma^k_ij d_k V`` and the Laplacian is its
    metric trace.
    """
    jet = metric_jet(spec, p, mode=mode)
    x = jet.point
    gamma = christoffel(jet.g_inv, jet.dg)
    dV = V.grad(x)
    ddV = V.hess(x)
    hess, lap, grad = hessian_arrays(jet.g_inv, gamma, dV, ddV)
    if np.abs(hess - hess.T).max() > 1e-8 * (1 + np.abs(hess).max()):
        raise DegenerateMetricError("covariant Hessian not symmetric")
    return HessianData(point=x, hessian=hess, laplacian=float(lap),
                       gradient=grad)

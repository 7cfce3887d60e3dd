"""Quadrature on coordinate spheres.

For n = 3 the rule is Gauss-Legendre in the cosine of the colatitude times a
uniform (trapezoid) rule in longitude, which integrates smooth flux integrands
with spectral accuracy.  Higher dimensions recurse through product rules with
Gauss-Jacobi nodes absorbing the ``sin^{n-2}`` colatitude weight.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma, roots_jacobi, roots_legendre

from .errors import ResolutionError

MIN_RESOLUTION = 2


@dataclass
class SphereQuadrature:
    """Nodes and positive weights on the coordinate sphere ``|x| = r``.

    Weights carry units of (n-1)-area and sum to the Euclidean sphere area.
    A rule of resolution ``p`` integrates Cartesian polynomials of degree
    up to ``2p - 1`` exactly.
    """

    r: float
    points: np.ndarray       # (N, n)
    weights: np.ndarray      # (N,)
    resolution: int

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        area = euclidean_sphere_area(self.r, self.points.shape[1])
        rel = abs(self.weights.sum() - area) / area
        if rel > 1e-10:
            raise ValueError(f"weights sum off sphere area by {rel:.2e}")

    @property
    def n(self):
        return self.points.shape[1]

    def integrate(self, values):
        """Integrate nodal samples against the Euclidean area weights."""
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))

    def normals(self):
        return self.points / self.r


def euclidean_sphere_area(r, n):
    """Area of the round sphere of radius r in R^n: omega_{n-1} r^{n-1}."""
    return unit_sphere_area(n) * r ** (n - 1)


def unit_sphere_area(n):
    return 2.0 * np.pi ** (n / 2.0) / gamma(n / 2.0)


def _unit_sphere_nodes(n, resolution):
    """Nodes/weights on the unit sphere in R^n (recursive product rule)."""
    if n == 2:
        m = 2 * resolution
        phi = 2.0 * np.pi * np.arange(m) / m
        pts = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        w = np.full(m, 2.0 * np.pi / m)
        return pts, w
    if n == 3:
        u, wu = roots_legendre(resolution)
    else:
        a = (n - 3) / 2.0
        u, wu = roots_jacobi(resolution, a, a)
    sub_pts, sub_w = _unit_sphere_nodes(n - 1, resolution)
    s = np.sqrt(1.0 - u ** 2)
    pts = np.concatenate(
        [np.repeat(u, len(sub_pts))[:, None],
         np.einsum("i,jk->ijk", s, sub_pts).reshape(-1, n - 1)], axis=1)
    w = np.outer(wu, sub_w).ravel()
    return pts, w


def sphere_quadrature(r, resolution, n=3, center=None):
    """Product quadrature on the coordinate sphere of radius ``r``.

    Resolution ``p`` uses ``p`` colatitude nodes and ``2p`` longitudes per
    recursion level; the minimum documented resolution is
    ``MIN_RESOLUTION = 2``.
    """
    if resolution < MIN_RESOLUTION:
        raise ResolutionError(
            f"resolution {resolution} below minimum {MIN_RESOLUTION}")
    if r <= 0:
        raise ValueError("radius must be positive")
    pts, w = _unit_sphere_nodes(n, int(resolution))
    pts = r * pts
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    w = w * r ** (n - 1)
    return SphereQuadrature(r=float(r), points=pts, weights=w,
                            resolution=int(resolution))

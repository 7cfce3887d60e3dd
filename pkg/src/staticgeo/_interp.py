"""Tensor-product cubic spline interpolation on uniform rectangular grids.

The curvature engine needs C^2 interpolants, so tabulated metrics and
potentials are represented by cubic B-splines built axis by axis; partial
derivatives come from the spline itself rather than finite differences.
"""

import numpy as np
from scipy.interpolate import NdBSpline, make_interp_spline


class TensorSpline:
    """Cubic spline interpolant of gridded values with derivative access.

    Parameters
    ----------
    axes : sequence of 1-D arrays
        Strictly increasing grid coordinates per axis.
    values : ndarray
        Shape ``(*grid_shape, m)`` or ``(*grid_shape,)``; trailing axes beyond
        the grid are interpolated componentwise.
    """

    def __init__(self, axes, values, degree=3):
        axes = [np.asarray(a, dtype=float) for a in axes]
        values = np.asarray(values, dtype=float)
        self.ndim = len(axes)
        self.axes = axes
        self.lo = np.array([a[0] for a in axes])
        self.hi = np.array([a[-1] for a in axes])
        coeffs = values
        knots = []
        for axis, a in enumerate(axes):
            if len(a) <= degree:
                raise ValueError(f"axis {axis}: need more than {degree} nodes")
            spl = make_interp_spline(a, np.moveaxis(coeffs, axis, 0), k=degree)
            coeffs = np.moveaxis(spl.c, 0, axis)
            knots.append(spl.t)
        self._nd = NdBSpline(tuple(knots), coeffs, degree)

    def inside(self, pts, pad=0.0):
        pts = np.asarray(pts, dtype=float)
        return np.all((pts >= self.lo + pad) & (pts <= self.hi - pad), axis=-1)

    def __call__(self, pts, nu=None):
        pts = np.asarray(pts, dtype=float)
        out = self._nd(pts, nu=None if nu is None else tuple(nu))
        return out

    def gradient(self, pts):
        """Stack of first partials, shape ``(..., ndim, *component_shape)``."""
        parts = []
        for k in range(self.ndim):
            nu = [0] * self.ndim
            nu[k] = 1
            parts.append(self(pts, nu=nu))
        return np.stack(parts, axis=np.asarray(pts).ndim - 1)

    def hessian(self, pts):
        """Stack of second partials, shape ``(..., ndim, ndim, *component_shape)``."""
        pts = np.asarray(pts, dtype=float)
        base = pts.ndim - 1
        rows = []
        for k in range(self.ndim):
            row = []
            for l in range(self.ndim):
                nu = [0] * self.ndim
                nu[k] += 1
                nu[l] += 1
                row.append(self(pts, nu=nu))
            rows.append(np.stack(row, axis=base))
        return np.stack(rows, axis=base)


def uniform_axes(lo, hi, shape):
    return [np.linspace(float(l), float(h), int(s))
            for l, h, s in zip(lo, hi, shape)]

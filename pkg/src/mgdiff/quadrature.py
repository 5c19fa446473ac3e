"""Tensor Gauss quadrature on mesh cells.

Rules live on the reference interval [0, 1]; tensor products of the 1-D
rule integrate separable polynomials exactly up to degree 2n-1 per axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """1-D Gauss rule on [0, 1]; weights sum to one."""

    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def gauss(cls, n: int) -> "QuadratureRule":
        t, w = np.polynomial.legendre.leggauss(n)
        return cls(points=0.5 * (t + 1.0), weights=0.5 * w)

    @property
    def order(self) -> int:
        """Highest polynomial degree integrated exactly."""
        return 2 * len(self.points) - 1


def tensor_rule(rule: QuadratureRule, dim: int):
    """Tensor-product points (n^d, d) and weights (n^d,) on [0, 1]^d."""
    grids = np.meshgrid(*([rule.points] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.ones(1)
    for _ in range(dim):
        wts = np.multiply.outer(wts, rule.weights).ravel()
    return pts, wts


def cell_points(mesh, ref_pts: np.ndarray, cell_slice=None) -> np.ndarray:
    """Physical coordinates of reference points in every cell.

    Returns an array of shape (*cellshape, npts, dim); `cell_slice`
    restricts the first axis (x-chunking for big meshes).
    """
    d = mesh.dim
    shape = list(mesh.shape)
    if cell_slice is None:
        cell_slice = slice(None)
    lows, widths = [], []
    for ax in range(d):
        c = mesh.axes[ax].coords
        lo, w = c[:-1], np.diff(c)
        if ax == 0:
            lo, w = lo[cell_slice], w[cell_slice]
        lows.append(lo)
        widths.append(w)
    shape[0] = len(lows[0])
    npts = ref_pts.shape[0]
    out = np.empty(tuple(shape) + (npts, d))
    for ax in range(d):
        sh = [1] * (d + 1)
        sh[ax] = shape[ax]
        lo = lows[ax].reshape(sh)
        w = widths[ax].reshape(sh)
        t = ref_pts[:, ax].reshape([1] * d + [npts])
        out[..., ax] = lo + t * w
    return out

"""Local tricubic (4-point Lagrange per axis) interpolation on uniform grids."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _weights(u, w):
    w[0] = -u * (u - 1.0) * (u - 2.0) / 6.0
    w[1] = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0
    w[2] = -(u + 1.0) * u * (u - 2.0) / 2.0
    w[3] = (u + 1.0) * u * (u - 1.0) / 6.0


@njit(cache=True)
def tricubic(grid, origin, spacing, pts, periodic, out):
    """Interpolate ``grid`` at ``pts``; returns the index of the first point
    whose stencil leaves a non-periodic grid, or -1."""
    n0, n1, n2 = grid.shape
    wx = np.empty(4)
    wy = np.empty(4)
    wz = np.empty(4)
    bad = -1
    for p in range(pts.shape[0]):
        gx = (pts[p, 0] - origin[0]) / spacing[0]
        gy = (pts[p, 1] - origin[1]) / spacing[1]
        gz = (pts[p, 2] - origin[2]) / spacing[2]
        ix = int(np.floor(gx))
        iy = int(np.floor(gy))
        iz = int(np.floor(gz))
        _weights(gx - ix, wx)
        _weights(gy - iy, wy)
        _weights(gz - iz, wz)
        if not periodic:
            if ix < 1 or iy < 1 or iz < 1 or ix + 2 >= n0 or iy + 2 >= n1 or iz + 2 >= n2:
                if bad < 0:
                    bad = p
                out[p] = np.nan
                continue
        acc = 0.0
        for a in range(4):
            jx = ix - 1 + a
            if periodic:
                jx %= n0
            sy = 0.0
            for b in range(4):
                jy = iy - 1 + b
                if periodic:
                    jy %= n1
                sz = 0.0
                for c in range(4):
                    jz = iz - 1 + c
                    if periodic:
                        jz %= n2
                    sz += wz[c] * grid[jx, jy, jz]
                sy += wy[b] * sz
            acc += wx[a] * sy
        out[p] = acc
    return bad


def interpolate(grid: np.ndarray, origin, spacing, pts: np.ndarray, periodic: bool) -> tuple[np.ndarray, int]:
    out = np.empty(pts.shape[0])
    bad = tricubic(np.ascontiguousarray(grid, dtype=np.float64),
                   np.asarray(origin, dtype=np.float64),
                   np.asarray(spacing, dtype=np.float64),
                   np.ascontiguousarray(pts, dtype=np.float64), periodic, out)
    return out, int(bad)

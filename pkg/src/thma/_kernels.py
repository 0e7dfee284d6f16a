"""Hot numeric kernels for BEV rasterization.

Two interchangeable implementations of the per-point scatter aggregation:
a numba ``@njit`` loop (default when numba imports) and a pure-numpy path
using ``np.maximum.at`` / ``np.minimum.at``. Both produce bit-identical
output; set ``THMA_PURE_NUMPY=1`` to force the numpy path (or to debug
without a JIT). ``benchmarks/bench_rasterize.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_FORCE_NUMPY = os.environ.get("THMA_PURE_NUMPY", "0") not in ("0", "", "false")

try:
    if _FORCE_NUMPY:
        raise ImportError
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


def _project_numpy(x, y, cx, cy, cos_h, sin_h, res, size):
    # u: along travel, v: left of travel; travel points toward row 0
    dx = x - cx
    dy = y - cy
    u = dx * cos_h + dy * sin_h
    v = -dx * sin_h + dy * cos_h
    half = size / 2.0
    rows = np.floor(half - u / res).astype(np.int64)
    cols = np.floor(half - v / res).astype(np.int64)
    return rows, cols


def _scatter_numpy(rows, cols, inten, z, size):
    inside = (rows >= 0) & (rows < size) & (cols >= 0) & (cols < size)
    rows = rows[inside]
    cols = cols[inside]
    inten = inten[inside]
    z = z[inside]
    flat = rows * size + cols

    imax = np.full(size * size, -np.inf)
    zmax = np.full(size * size, -np.inf)
    zmin = np.full(size * size, np.inf)
    occ = np.zeros(size * size, dtype=np.bool_)

    np.maximum.at(imax, flat, inten)
    np.maximum.at(zmax, flat, z)
    np.minimum.at(zmin, flat, z)
    occ[flat] = True
    shape = (size, size)
    return imax.reshape(shape), zmax.reshape(shape), zmin.reshape(shape), occ.reshape(shape)


@njit(cache=True, nogil=True)
def _aggregate_numba(x, y, inten, z, cx, cy, cos_h, sin_h, res, size):  # pragma: no cover - compiled
    imax = np.full((size, size), -np.inf)
    zmax = np.full((size, size), -np.inf)
    zmin = np.full((size, size), np.inf)
    occ = np.zeros((size, size), dtype=np.bool_)
    half = size / 2.0
    for i in range(x.shape[0]):
        dx = x[i] - cx
        dy = y[i] - cy
        u = dx * cos_h + dy * sin_h
        v = -dx * sin_h + dy * cos_h
        r = int(np.floor(half - u / res))
        c = int(np.floor(half - v / res))
        if r < 0 or r >= size or c < 0 or c >= size:
            continue
        occ[r, c] = True
        if inten[i] > imax[r, c]:
            imax[r, c] = inten[i]
        if z[i] > zmax[r, c]:
            zmax[r, c] = z[i]
        if z[i] < zmin[r, c]:
            zmin[r, c] = z[i]
    return imax, zmax, zmin, occ


def aggregate(x, y, inten, z, cx, cy, heading, res, size, force_numpy=False):
    """Project points into a tile and aggregate per-pixel max intensity / max z / min z.

    Returns float64 raw aggregates (``-inf``/``inf`` off occupancy) plus the
    occupancy mask. Quantization to 8 bit happens in :mod:`thma.raster`.
    """
    cos_h = np.cos(heading)
    sin_h = np.sin(heading)
    if NUMBA_ENABLED and not force_numpy:
        return _aggregate_numba(x, y, inten, z, cx, cy, cos_h, sin_h, float(res), int(size))
    rows, cols = _project_numpy(x, y, cx, cy, cos_h, sin_h, float(res), int(size))
    return _scatter_numpy(rows, cols, inten, z, int(size))

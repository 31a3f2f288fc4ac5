"""Compiled disc scans over the cell lattice.

Discs are described in cell units by their row half-widths: for a radius
``r`` (in multiples of ``h``) row offset ``di`` covers the column offsets
``|dj| <= w[di]`` with ``di**2 + dj**2 < r**2``.  All loops run in a fixed
order so results are bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .grid import TIE_RTOL


def disc_halfwidths(r_cells: float) -> np.ndarray:
    """Half-widths ``w[di + R]`` for ``di in [-R, R]``; ``-1`` marks an empty row."""
    t = r_cells * r_cells * (1 - TIE_RTOL)
    R = int(np.floor(np.sqrt(t))) + 1
    di = np.arange(-R, R + 1)
    rem = t - di.astype(float) ** 2
    w = np.full(di.shape, -1, dtype=np.int64)
    ok = rem > 0
    w[ok] = np.floor(np.sqrt(rem[ok])).astype(np.int64)
    # enforce the strict inequality dj**2 < rem exactly
    for k in np.nonzero(ok)[0]:
        while w[k] >= 0 and w[k] * w[k] >= rem[k]:
            w[k] -= 1
        while (w[k] + 1) * (w[k] + 1) < rem[k]:
            w[k] += 1
    return w


def disc_pixel_count(r_cells: float) -> int:
    """Number of lattice offsets strictly inside the disc (the discrete ball area)."""
    w = disc_halfwidths(r_cells)
    return int(np.sum(np.where(w >= 0, 2 * w + 1, 0)))


def pack_halfwidths(radii_cells) -> tuple:
    """Stack half-width tables of several radii into a padded 2-D array."""
    tables = [disc_halfwidths(r) for r in radii_cells]
    R = max((len(t) - 1) // 2 for t in tables)
    out = np.full((len(tables), 2 * R + 1), -1, dtype=np.int64)
    for k, t in enumerate(tables):
        rk = (len(t) - 1) // 2
        out[k, R - rk:R + rk + 1] = t
    return out, R


@njit(cache=True, nogil=True)
def _row_prefix(values):
    nx, ny = values.shape
    P = np.zeros((nx, ny + 1))
    for i in range(nx):
        acc = 0.0
        for j in range(ny):
            acc += values[i, j]
            P[i, j + 1] = acc
    return P


@njit(cache=True, nogil=True)
def _disc_sums_prefix(P, ci, cj, W, R):
    nx = P.shape[0]
    ny = P.shape[1] - 1
    nr = W.shape[0]
    nc = ci.shape[0]
    out = np.zeros((nr, nc))
    for c in range(nc):
        i0 = ci[c]
        j0 = cj[c]
        for k in range(nr):
            s = 0.0
            for d in range(2 * R + 1):
                w = W[k, d]
                if w < 0:
                    continue
                i = i0 + d - R
                if i < 0 or i >= nx:
                    continue
                lo = j0 - w
                hi = j0 + w + 1
                if lo < 0:
                    lo = 0
                if hi > ny:
                    hi = ny
                if hi > lo:
                    s += P[i, hi] - P[i, lo]
            out[k, c] = s
    return out


@njit(cache=True, nogil=True)
def _disc_sums_direct(values, ci, cj, W, R):
    nx, ny = values.shape
    nr = W.shape[0]
    nc = ci.shape[0]
    out = np.zeros((nr, nc))
    for c in range(nc):
        i0 = ci[c]
        j0 = cj[c]
        for k in range(nr):
            s = 0.0
            for d in range(2 * R + 1):
                w = W[k, d]
                if w < 0:
                    continue
                i = i0 + d - R
                if i < 0 or i >= nx:
                    continue
                for j in range(max(j0 - w, 0), min(j0 + w + 1, ny)):
                    s += values[i, j]
            out[k, c] = s
    return out


def disc_sums(values: np.ndarray, ci: np.ndarray, cj: np.ndarray, radii_cells,
              method: str = "prefix") -> np.ndarray:
    """Sums of ``values`` over discs of each radius around each centre.

    Returns an array of shape ``(len(radii_cells), len(ci))``.  Cells off
    the lattice contribute zero (zero extension).
    """
    W, R = pack_halfwidths(radii_cells)
    values = np.ascontiguousarray(values, dtype=np.float64)
    ci = np.ascontiguousarray(ci, dtype=np.int64)
    cj = np.ascontiguousarray(cj, dtype=np.int64)
    if method == "prefix":
        return _disc_sums_prefix(_row_prefix(values), ci, cj, W, R)
    if method == "direct":
        return _disc_sums_direct(values, ci, cj, W, R)
    raise ValueError(f"unknown disc-sum method {method!r}")


@njit(cache=True, nogil=True)
def _mean_spectral_deviation(L11, L12, L22, valid, ci, cj, W, R):
    """Per (radius, centre): mean over valid disc cells of |L(x) - mean L|_2."""
    nx, ny = L11.shape
    nr = W.shape[0]
    nc = ci.shape[0]
    out = np.zeros((nr, nc))
    for c in range(nc):
        i0 = ci[c]
        j0 = cj[c]
        for k in range(nr):
            n = 0
            a = 0.0
            b = 0.0
            e = 0.0
            for d in range(2 * R + 1):
                w = W[k, d]
                if w < 0:
                    continue
                i = i0 + d - R
                if i < 0 or i >= nx:
                    continue
                for j in range(max(j0 - w, 0), min(j0 + w + 1, ny)):
                    if valid[i, j]:
                        n += 1
                        a += L11[i, j]
                        b += L12[i, j]
                        e += L22[i, j]
            if n == 0:
                continue
            a /= n
            b /= n
            e /= n
            dev = 0.0
            for d in range(2 * R + 1):
                w = W[k, d]
                if w < 0:
                    continue
                i = i0 + d - R
                if i < 0 or i >= nx:
                    continue
                for j in range(max(j0 - w, 0), min(j0 + w + 1, ny)):
                    if valid[i, j]:
                        x = L11[i, j] - a
                        y = L12[i, j] - b
                        z = L22[i, j] - e
                        m = 0.5 * (x + z)
                        r = np.sqrt(0.25 * (x - z) * (x - z) + y * y)
                        dev += abs(m) + r
            out[k, c] = dev / n
    return out


def mean_spectral_deviation(L: np.ndarray, valid: np.ndarray, ci, cj, radii_cells) -> np.ndarray:
    W, R = pack_halfwidths(radii_cells)
    return _mean_spectral_deviation(
        np.ascontiguousarray(L[..., 0, 0]), np.ascontiguousarray(L[..., 0, 1]),
        np.ascontiguousarray(L[..., 1, 1]), np.ascontiguousarray(valid, dtype=np.bool_),
        np.ascontiguousarray(ci, dtype=np.int64), np.ascontiguousarray(cj, dtype=np.int64), W, R)


def square_sums(values: np.ndarray, ci, cj, half_sides) -> np.ndarray:
    """Sums over axis-aligned squares ``|di|, |dj| <= k`` via a summed-area table."""
    S = np.zeros((values.shape[0] + 1, values.shape[1] + 1))
    S[1:, 1:] = np.cumsum(np.cumsum(values, axis=0), axis=1)
    nx, ny = values.shape
    ci = np.asarray(ci)
    cj = np.asarray(cj)
    out = np.empty((len(half_sides), ci.size))
    for k, m in enumerate(half_sides):
        i0 = np.clip(ci - m, 0, nx)
        i1 = np.clip(ci + m + 1, 0, nx)
        j0 = np.clip(cj - m, 0, ny)
        j1 = np.clip(cj + m + 1, 0, ny)
        out[k] = S[i1, j1] - S[i0, j1] - S[i1, j0] + S[i0, j0]
    return out

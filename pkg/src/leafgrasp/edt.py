"""Exact Euclidean distance transforms.

Separable lower-envelope-of-parabolas algorithm (Felzenszwalb and
Huttenlocher), linear in the number of pixels. Squared distances are sums
of squared integer offsets, so the results are exact in float64 and agree
bit-for-bit with a brute-force nearest-site search.
"""

import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True)
def _envelope_1d(f, out, v, z):
    n = f.shape[0]
    k = -1
    for q in range(n):
        fq = f[q]
        if fq == INF:
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -INF
            z[1] = INF
            continue
        while True:
            p = v[k]
            s = ((fq + q * q) - (f[p] + p * p)) / (2.0 * q - 2.0 * p)
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = INF
    if k < 0:
        for q in range(n):
            out[q] = INF
        return
    j = 0
    for q in range(n):
        while z[j + 1] < q:
            j += 1
        d = q - v[j]
        out[q] = d * d + f[v[j]]


@njit(cache=True)
def _squared_edt_2d(sites):
    h, w = sites.shape
    g = np.empty((h, w), np.float64)
    n = max(h, w)
    v = np.empty(n, np.int64)
    z = np.empty(n + 1, np.float64)
    col = np.empty(h, np.float64)
    colout = np.empty(h, np.float64)
    for x in range(w):
        for y in range(h):
            col[y] = 0.0 if sites[y, x] else INF
        _envelope_1d(col, colout, v, z)
        for y in range(h):
            g[y, x] = colout[y]
    out = np.empty((h, w), np.float64)
    row = np.empty(w, np.float64)
    for y in range(h):
        for x in range(w):
            row[x] = g[y, x]
        _envelope_1d(row, out[y], v, z)
    return out


def squared_edt(sites):
    """Squared distance from every pixel to the nearest ``True`` site.

    Pixels are at integer coordinates; with no sites at all every entry is
    ``inf``.
    """
    sites = np.ascontiguousarray(sites, dtype=np.bool_)
    if sites.ndim != 2:
        raise ValueError("sites must be a 2-D boolean array")
    if sites.size == 0:
        return np.zeros(sites.shape)
    return _squared_edt_2d(sites)


def boundary_pixels(mask):
    """Foreground pixels with a 4-neighbour in the background or off-image."""
    m = np.asarray(mask, dtype=bool)
    padded = np.pad(m, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return m & ~interior


def distance_transform(mask, side="inside"):
    """Exact Euclidean distance grid (pixels) for a binary mask.

    ``side="outside"``: distance from each pixel to the nearest foreground
    pixel (0 on the foreground, ``inf`` everywhere for an all-zero mask).

    ``side="inside"``: distance from each foreground pixel to the nearest
    boundary pixel of the mask (0 on the boundary and on the background).
    Off-image counts as background, so an all-one mask measures distance to
    the image border.
    """
    m = np.asarray(mask, dtype=bool)
    if side == "outside":
        return np.sqrt(squared_edt(m))
    if side == "inside":
        if not m.any():
            return np.zeros(m.shape)
        d = np.sqrt(squared_edt(boundary_pixels(m)))
        d[~m] = 0.0
        return d
    raise ValueError(f"side must be 'inside' or 'outside', not {side!r}")


def signed_distance(mask):
    """Outside distance minus inside distance; negative within the mask."""
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        return np.full(m.shape, INF)
    return distance_transform(m, "outside") - distance_transform(m, "inside")

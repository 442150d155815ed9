"""Brute-force reference implementations.

These deliberately avoid the fast paths they check: distances come from an
exhaustive nearest-pixel scan and grasp scores from per-pixel calls to the
scalar scoring functions.
"""

import numpy as np

from . import grasp as g
from .stereo import reproject_pixel


def brute_boundary(mask):
    """Foreground pixels with a 4-neighbour in the background or off-image."""
    h, w = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    for v in range(h):
        for u in range(w):
            if not mask[v, u]:
                continue
            for du, dv in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                uu, vv = u + du, v + dv
                if not (0 <= uu < w and 0 <= vv < h) or not mask[vv, uu]:
                    out[v, u] = True
                    break
    return out


def brute_nearest(sites, query=None):
    """Euclidean distance from each query pixel to the nearest site (O(n^2))."""
    sv, su = np.nonzero(sites)
    out = np.full(sites.shape, np.inf)
    if len(su) == 0:
        return out
    if query is None:
        query = np.ones(sites.shape, dtype=bool)
    for v, u in zip(*np.nonzero(query)):
        d2 = (su - u) ** 2 + (sv - v) ** 2
        out[v, u] = np.sqrt(float(d2.min()))
    return out


def brute_distance_transform(mask, side):
    mask = np.asarray(mask, dtype=bool)
    if side == "outside":
        return brute_nearest(mask)
    out = np.zeros(mask.shape)
    if mask.any():
        d = brute_nearest(brute_boundary(mask), mask)
        out[mask] = d[mask]
    return out


def brute_force_grasp(instance, depth, rig, field=None, cfg=g.GraspConfig(), stride=1, inside=None):
    """Exhaustive arg-max of the grasp score over the leaf mask.

    Returns ``(pixel, total, components)`` or ``None`` when no candidate is
    valid. Tie-breaking matches :meth:`ScoreMap.best_index`. ``inside``
    overrides the brute-force inside distance transform, which is quadratic
    in the leaf area.
    """
    if inside is None:
        inside = brute_distance_transform(instance.mask, "inside")
    center = field.plant_center_px if field is not None else None
    junction = g.petiole_junction(instance, center)
    best_key, best = None, None
    vs, us = np.nonzero(instance.mask)
    for u, v in zip(us.tolist(), vs.tolist()):
        if u % stride or v % stride:
            continue
        F = g.flatness(depth, (u, v), cfg)
        if F is None:
            continue
        z = float(depth.values[v, u])
        pc = reproject_pixel(rig, u, v, z)
        p = np.array(rig.to_world(pc[0], pc[1], pc[2]))
        E = g.edge_margin(inside, (u, v), g.px_to_mm(rig, z), instance.mask, cfg)
        if E <= 0:
            continue
        A = g.approach_alignment(rig, p)
        Acc = g.accessibility(rig, (u, v), p)
        S = g.stem_penalty(instance, (u, v), cfg, junction=junction)
        total = g.combine(F, A, E, Acc, S, cfg)
        key = (-total, -E, -F, u, v)
        if best_key is None or key < best_key:
            best_key = key
            best = ((u, v), total, {"F": F, "A": A, "E": E, "Acc": Acc, "S_pen": S})
    return best

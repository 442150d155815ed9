"""Grasp-point scoring on the selected leaf.

Every candidate pixel gets flatness ``F``, approach alignment ``A``, edge
margin ``E`` and accessibility ``Acc`` scores in [0, 1], combined as

    total = (w_f F + w_a A + w_e E + w_acc Acc) * (1 - S_pen)

where ``S_pen`` down-weights the petiole junction. The scalar functions
below define each term for one point; :func:`score_candidates` evaluates
the same arithmetic over arrays so both paths agree bit-for-bit.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePatchError, InputError, NoGraspablePointError
from .perception import plane_fit_normal

UP = np.array([0.0, 0.0, 1.0])
APPROACH = np.array([0.0, 0.0, -1.0])


@dataclass(frozen=True)
class GraspConfig:
    w_f: float = 0.25
    w_a: float = 0.40
    w_e: float = 0.20
    w_acc: float = 0.15
    alpha: float = 5.0
    gradient_scale: float = 100.0  # per-pixel depth difference (m) -> gradient units
    edge_min_mm: float = 5.0
    edge_max_mm: float = 20.0
    stem_penalty_value: float = 0.7
    stem_radius_px: float = 25.0
    candidate_stride_px: int = 4
    normal_radius_px: float = 15.0

    def __post_init__(self):
        w = self.weights
        if min(w) <= 0:
            raise InputError("grasp weights must be positive")
        if abs(sum(w) - 1.0) > 1e-9:
            raise InputError(f"grasp weights sum to {sum(w)}, expected 1")
        if not 0 < self.edge_min_mm < self.edge_max_mm:
            raise InputError("need 0 < edge_min_mm < edge_max_mm")
        if not 0 <= self.stem_penalty_value < 1:
            raise InputError("stem_penalty_value must be in [0, 1)")
        if int(self.candidate_stride_px) < 1:
            raise InputError("candidate_stride_px must be >= 1")

    @property
    def weights(self):
        return (self.w_f, self.w_a, self.w_e, self.w_acc)


@dataclass(frozen=True, eq=False)
class GraspCandidate:
    leaf_id: int
    pixel: tuple
    point3d: np.ndarray
    F: float
    A: float
    E: float
    Acc: float
    S_pen: float
    total: float
    local_normal: np.ndarray
    approach: np.ndarray = APPROACH
    depth_m: float = 0.0
    d_edge_mm: float = 0.0

    @property
    def normal_alignment(self):
        """Cosine between the local surface normal and world vertical."""
        return float(abs(self.local_normal @ UP))

    def to_dict(self):
        return {
            "leaf_id": int(self.leaf_id),
            "pixel": [int(self.pixel[0]), int(self.pixel[1])],
            "point3d": [float(c) for c in self.point3d],
            "approach": [float(c) for c in self.approach],
            "local_normal": [float(c) for c in self.local_normal],
            "depth_m": float(self.depth_m),
            "d_edge_mm": float(self.d_edge_mm),
            "scores": {
                "F": float(self.F),
                "A": float(self.A),
                "E": float(self.E),
                "Acc": float(self.Acc),
                "S_pen": float(self.S_pen),
                "total": float(self.total),
            },
            "normal_alignment": self.normal_alignment,
        }


# --- per-point terms ------------------------------------------------------


def flatness_from_gradient(gx, gy, alpha=5.0):
    return np.exp(-alpha * np.sqrt(gx * gx + gy * gy))


def depth_gradient(depth, pixel, cfg=GraspConfig()):
    """Central-difference gradient in config units, or ``None`` if the 3x3
    neighbourhood leaves the image or holds invalid depth."""
    u, v = int(pixel[0]), int(pixel[1])
    D = depth.values
    h, w = D.shape
    if u < 1 or v < 1 or u > w - 2 or v > h - 2:
        return None
    if not np.all(D[v - 1:v + 2, u - 1:u + 2] > 0):
        return None
    gx = (float(D[v, u + 1]) - float(D[v, u - 1])) * 0.5 * cfg.gradient_scale
    gy = (float(D[v + 1, u]) - float(D[v - 1, u])) * 0.5 * cfg.gradient_scale
    return gx, gy


def flatness(depth, pixel, cfg=GraspConfig()):
    """Flatness score, or ``None`` when the candidate must be excluded."""
    g = depth_gradient(depth, pixel, cfg)
    if g is None:
        return None
    return float(flatness_from_gradient(g[0], g[1], cfg.alpha))


def approach_alignment(rig, point3d):
    v = np.asarray(point3d, dtype=np.float64) - rig.center
    vx, vy, vz = float(v[0]), float(v[1]), float(v[2])
    norm = np.sqrt(vx * vx + vy * vy + vz * vz)
    if norm == 0:
        raise InputError("point coincides with the camera centre")
    return float(np.abs(vz) / norm)


def image_center(rig):
    return (rig.width - 1) / 2.0, (rig.height - 1) / 2.0


def image_half_diagonal(rig):
    return np.sqrt(float(rig.width - 1) ** 2 + float(rig.height - 1) ** 2) / 2.0


def accessibility_from_terms(d_img, d_max, cos_theta):
    radial = min(max(1.0 - d_img / d_max, 0.0), 1.0)
    return 0.7 * radial + 0.3 * min(max(cos_theta, 0.0), 1.0)


def accessibility(rig, pixel, point3d):
    uc, vc = image_center(rig)
    du, dv = float(pixel[0]) - uc, float(pixel[1]) - vc
    d_img = np.sqrt(du * du + dv * dv)
    v = np.asarray(point3d, dtype=np.float64) - rig.center
    vx, vy, vz = float(v[0]), float(v[1]), float(v[2])
    norm = np.sqrt(vx * vx + vy * vy + vz * vz)
    f = rig.forward
    cos_theta = (vx * f[0] + vy * f[1] + vz * f[2]) / norm if norm > 0 else 1.0
    return float(accessibility_from_terms(d_img, image_half_diagonal(rig), cos_theta))


def px_to_mm(rig, depth_m):
    """Metric size of one pixel at ``depth_m``."""
    return depth_m * 1000.0 / rig.fx


def edge_margin_from_mm(d_edge_mm, cfg=GraspConfig()):
    if d_edge_mm < cfg.edge_min_mm:
        return 0.0
    if d_edge_mm <= cfg.edge_max_mm:
        return d_edge_mm / cfg.edge_max_mm
    return 1.0


def edge_margin(inside_dt, pixel, px_mm, mask=None, cfg=GraspConfig()):
    u, v = int(pixel[0]), int(pixel[1])
    if mask is not None and not mask[v, u]:
        raise InputError(f"pixel ({u}, {v}) is outside the leaf mask")
    return edge_margin_from_mm(float(inside_dt[v, u]) * px_mm, cfg)


def petiole_junction(instance, plant_center_px=None):
    """Contour pixel nearest the plant centre (leaf centroid if unknown)."""
    c = plant_center_px if plant_center_px is not None else instance.centroid_px
    pts = instance.contour
    d2 = (pts[:, 0] - c[0]) ** 2 + (pts[:, 1] - c[1]) ** 2
    j = pts[int(np.argmin(d2))]
    return int(j[0]), int(j[1])


def stem_penalty(instance, pixel, cfg=GraspConfig(), plant_center_px=None, junction=None):
    if not instance.mask[int(pixel[1]), int(pixel[0])]:
        raise InputError("pixel is outside the leaf mask")
    ju, jv = junction if junction is not None else petiole_junction(instance, plant_center_px)
    du, dv = float(pixel[0]) - ju, float(pixel[1]) - jv
    if du * du + dv * dv <= cfg.stem_radius_px ** 2:
        return cfg.stem_penalty_value
    return 0.0


def combine(F, A, E, Acc, S_pen, cfg=GraspConfig()):
    return (cfg.w_f * F + cfg.w_a * A + cfg.w_e * E + cfg.w_acc * Acc) * (1.0 - S_pen)


# --- vectorised evaluation ------------------------------------------------


@dataclass(eq=False)
class ScoreMap:
    """Component arrays over every sampled candidate (valid or not)."""

    pixels: np.ndarray  # (N, 2) (u, v)
    valid: np.ndarray
    F: np.ndarray
    A: np.ndarray
    E: np.ndarray
    Acc: np.ndarray
    S_pen: np.ndarray
    total: np.ndarray
    points: np.ndarray  # (N, 3) world
    depth_m: np.ndarray
    d_edge_mm: np.ndarray
    junction: tuple

    def image(self, shape):
        """Total score raster; NaN where no valid candidate was scored."""
        out = np.full(shape, np.nan)
        p = self.pixels[self.valid]
        out[p[:, 1], p[:, 0]] = self.total[self.valid]
        return out

    def best_index(self):
        """Arg-max with ties broken by larger E, larger F, then smaller (u, v)."""
        idx = np.flatnonzero(self.valid)
        if len(idx) == 0:
            return None
        p = self.pixels[idx]
        order = np.lexsort((p[:, 1], p[:, 0], -self.F[idx], -self.E[idx], -self.total[idx]))
        return int(idx[order[0]])


def candidate_pixels(mask, stride):
    v, u = np.nonzero(mask)
    keep = (u % stride == 0) & (v % stride == 0)
    return np.stack([u[keep], v[keep]], axis=1)


def score_candidates(instance, depth, rig, field=None, cfg=GraspConfig(), stride=None):
    stride = int(cfg.candidate_stride_px if stride is None else stride)
    pix = candidate_pixels(instance.mask, stride)
    u, v = pix[:, 0], pix[:, 1]
    D = depth.values
    h, w = D.shape
    n = len(pix)

    inb = (u >= 1) & (v >= 1) & (u <= w - 2) & (v <= h - 2)
    valid = inb.copy()
    uu, vv = np.where(inb, u, 1), np.where(inb, v, 1)
    for dv in (-1, 0, 1):
        for du in (-1, 0, 1):
            valid &= D[vv + dv, uu + du] > 0

    Dd = D.astype(np.float64)
    gx = (Dd[vv, uu + 1] - Dd[vv, uu - 1]) * 0.5 * cfg.gradient_scale
    gy = (Dd[vv + 1, uu] - Dd[vv - 1, uu]) * 0.5 * cfg.gradient_scale
    F = flatness_from_gradient(gx, gy, cfg.alpha)

    z = Dd[v, u]
    zs = np.where(z > 0, z, 1.0)
    xc = (u - rig.cx) * zs / rig.fx
    yc = (v - rig.cy) * zs / rig.fy
    wx, wy, wz = rig.to_world(xc, yc, zs)
    c = rig.center
    vx, vy, vz = wx - c[0], wy - c[1], wz - c[2]
    norm = np.sqrt(vx * vx + vy * vy + vz * vz)
    A = np.abs(vz) / norm

    uc, vc = image_center(rig)
    du_, dv_ = u - uc, v - vc
    d_img = np.sqrt(du_ * du_ + dv_ * dv_)
    radial = np.clip(1.0 - d_img / image_half_diagonal(rig), 0.0, 1.0)
    f = rig.forward
    cos_t = np.clip((vx * f[0] + vy * f[1] + vz * f[2]) / norm, 0.0, 1.0)
    Acc = 0.7 * radial + 0.3 * cos_t

    d_edge = instance.inside_dt[v, u] * (zs * 1000.0 / rig.fx)
    E = np.where(
        d_edge < cfg.edge_min_mm, 0.0,
        np.where(d_edge <= cfg.edge_max_mm, d_edge / cfg.edge_max_mm, 1.0),
    )
    valid &= E > 0

    center = field.plant_center_px if field is not None else None
    ju, jv = petiole_junction(instance, center)
    dju, djv = u - float(ju), v - float(jv)
    S_pen = np.where(dju * dju + djv * djv <= cfg.stem_radius_px ** 2, cfg.stem_penalty_value, 0.0)

    total = (cfg.w_f * F + cfg.w_a * A + cfg.w_e * E + cfg.w_acc * Acc) * (1.0 - S_pen)
    for arr in (F, A, E, Acc, total):
        arr[~valid] = 0.0
    return ScoreMap(
        pixels=pix,
        valid=valid,
        F=F,
        A=A,
        E=E,
        Acc=Acc,
        S_pen=S_pen,
        total=total,
        points=np.stack([wx, wy, wz], axis=1).reshape(n, 3),
        depth_m=np.where(z > 0, z, 0.0),
        d_edge_mm=np.where(z > 0, d_edge, 0.0),
        junction=(ju, jv),
    )


def local_normal(instance, pixel, radius_px):
    """Plane-fit normal over the leaf's cloud within ``radius_px`` of ``pixel``."""
    d = instance.pixels - np.asarray(pixel)
    near = (d[:, 0] ** 2 + d[:, 1] ** 2) <= radius_px ** 2
    try:
        n, _ = plane_fit_normal(instance.cloud[near])
    except DegeneratePatchError:
        n = instance.mean_normal
    return n


def select_grasp_point(instance, depth, rig, field=None, cfg=GraspConfig(), stride=None):
    """Best-scoring candidate on ``instance`` and the full score map."""
    smap = score_candidates(instance, depth, rig, field, cfg, stride)
    i = smap.best_index()
    if i is None:
        raise NoGraspablePointError(f"no graspable point on leaf {instance.id}")
    pixel = (int(smap.pixels[i, 0]), int(smap.pixels[i, 1]))
    cand = GraspCandidate(
        leaf_id=instance.id,
        pixel=pixel,
        point3d=smap.points[i].copy(),
        F=float(smap.F[i]),
        A=float(smap.A[i]),
        E=float(smap.E[i]),
        Acc=float(smap.Acc[i]),
        S_pen=float(smap.S_pen[i]),
        total=float(smap.total[i]),
        local_normal=local_normal(instance, pixel, cfg.normal_radius_px),
        depth_m=float(smap.depth_m[i]),
        d_edge_mm=float(smap.d_edge_mm[i]),
    )
    return cand, smap

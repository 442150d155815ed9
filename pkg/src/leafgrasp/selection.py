"""Leaf ranking by weighted clutter, distance and visibility scores."""

import math
from dataclasses import dataclass, field

import numpy as np

from .edt import distance_transform
from .errors import InputError, NoViableLeafError
from .perception import visibility_ratio


@dataclass(frozen=True)
class LeafSelectionConfig:
    w_c: float = 0.35
    w_d: float = 0.35
    w_v: float = 0.30
    ideal_margin_px: float = 20.0
    margin_sigma_px: float = 10.0
    clearance_norm_px: float = 40.0
    ideal_depth_range: tuple = (0.30, 0.50)
    decay_rate: float = 5.0  # 1/m
    occlusion_threshold: float = 0.8

    def __post_init__(self):
        w = (self.w_c, self.w_d, self.w_v)
        if min(w) <= 0:
            raise InputError("leaf selection weights must be positive")
        if abs(sum(w) - 1.0) > 1e-9:
            raise InputError(f"leaf selection weights sum to {sum(w)}, expected 1")
        if self.margin_sigma_px <= 0 or self.clearance_norm_px <= 0:
            raise InputError("margin_sigma_px and clearance_norm_px must be positive")
        lo, hi = self.ideal_depth_range
        if not 0 < lo <= hi:
            raise InputError("ideal_depth_range must satisfy 0 < lo <= hi")
        if not 0 < self.occlusion_threshold <= 1:
            raise InputError("occlusion_threshold must be in (0, 1]")
        object.__setattr__(self, "ideal_depth_range", (float(lo), float(hi)))

    @property
    def weights(self):
        return (self.w_c, self.w_d, self.w_v)


@dataclass(frozen=True)
class LeafScore:
    leaf_id: int
    S_c: float
    S_d: float
    S_v: float
    total: float
    area_px: int = 0
    details: dict = field(default_factory=dict, compare=False)

    def to_dict(self):
        return {
            "leaf_id": self.leaf_id,
            "S_c": self.S_c,
            "S_d": self.S_d,
            "S_v": self.S_v,
            "total": self.total,
            "area_px": self.area_px,
            **self.details,
        }


def margin_factor(max_inside_px, cfg):
    z = (max_inside_px - cfg.ideal_margin_px) / cfg.margin_sigma_px
    return math.exp(-0.5 * z * z)


def clearance_to_others(instance, field):
    """Mean distance (px) from the leaf's boundary to the nearest other leaf."""
    others = field.union_mask & ~instance.mask
    if not others.any():
        return math.inf
    d = distance_transform(others, "outside")
    pts = instance.hull_points
    return float(d[pts[:, 1], pts[:, 0]].mean())


def clutter_score(instance, field, cfg=LeafSelectionConfig()):
    """Gaussian interior-margin reward times a neighbour-clearance factor."""
    g = margin_factor(float(instance.inside_dt.max()), cfg)
    clearance = clearance_to_others(instance, field)
    c = min(1.0, clearance / cfg.clearance_norm_px)
    return g * c


def distance_score(instance, cfg=LeafSelectionConfig()):
    d = float(instance.centroid_cam[2])
    if not math.isfinite(d) or d <= 0:
        return 0.0
    far = cfg.ideal_depth_range[1]
    if d <= far:
        return 1.0
    return math.exp(-cfg.decay_rate * (d - far))


def visibility_score(ratio, cfg=LeafSelectionConfig()):
    """Linear penalty below ``occlusion_threshold``; accepts a ratio or an instance."""
    r = ratio if isinstance(ratio, (int, float)) else visibility_ratio(ratio)
    r = min(max(float(r), 0.0), 1.0)
    if r >= cfg.occlusion_threshold:
        return 1.0
    return r / cfg.occlusion_threshold


def weighted_total(components, weights):
    s_c, s_d, s_v = components
    w_c, w_d, w_v = weights
    return w_c * s_c + w_d * s_d + w_v * s_v


def _rank_key(score):
    return (-score.total, -score.area_px, score.leaf_id)


def rank_scores(scores):
    """Sort descending by total; ties by larger area, then smaller id."""
    return sorted(scores, key=_rank_key)


def score_leaf(instance, field, cfg=LeafSelectionConfig()):
    ratio = visibility_ratio(instance)
    s_c = clutter_score(instance, field, cfg)
    s_d = distance_score(instance, cfg)
    s_v = visibility_score(ratio, cfg)
    return LeafScore(
        leaf_id=instance.id,
        S_c=s_c,
        S_d=s_d,
        S_v=s_v,
        total=weighted_total((s_c, s_d, s_v), cfg.weights),
        area_px=instance.area_px,
        details={"visibility_ratio": ratio, "depth_m": float(instance.centroid_cam[2])},
    )


def select_leaf(instances, field, cfg=LeafSelectionConfig()):
    """Return ``(best_leaf_id, ranked_scores)``."""
    if not instances:
        raise NoViableLeafError("no viable leaf: no candidate instances")
    ranked = rank_scores([score_leaf(inst, field, cfg) for inst in instances])
    return ranked[0].leaf_id, ranked

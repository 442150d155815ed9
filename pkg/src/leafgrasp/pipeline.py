"""End-to-end planning for one scene: masks and depth in, trajectory out."""

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from .config import Config
from .errors import NoGraspablePointError, NoViableLeafError, WorkspaceError
from .grasp import select_grasp_point
from .motion.gantry import JointState, jaw_yaw_from_cloud, make_waypoints
from .motion.planner import CollisionModel, InvalidEndpointError, plan_path
from .motion.trajectory import trapezoid_profile
from .perception import build_scene_field, extract_instances, voxelize
from .selection import select_leaf

REPORT_SCHEMA_VERSION = 1
STAGES = ("perception", "selection", "grasp", "planning", "trajectory")


@dataclass(eq=False)
class PlanOutcome:
    scene_id: str
    instances: list
    field: object
    ranked: list
    dropped: list
    attempts: list  # per-leaf fallback log
    grasp: object = None
    score_map: object = None
    waypoints: object = None
    segments: list = field(default_factory=list)
    trajectory: object = None
    latency: dict = field(default_factory=dict)
    config: object = None

    @property
    def selected_leaf(self):
        return None if self.grasp is None else self.grasp.leaf_id

    @property
    def instance(self):
        return next(i for i in self.instances if i.id == self.selected_leaf)

    def report(self, digest=None):
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "scene_id": self.scene_id,
            "scene_digest": digest,
            "status": "ok",
            "selected_leaf": self.selected_leaf,
            "leaf_scores": [s.to_dict() for s in self.ranked],
            "dropped_leaves": self.dropped,
            "leaf_attempts": self.attempts,
            "grasp": self.grasp.to_dict(),
            "waypoints": self.waypoints.to_dict(),
            "plan": {
                "segments": [dict(name=n, **r.to_dict()) for n, r in self.segments],
                "n_waypoints": sum(len(r) for _, r in self.segments),
            },
            "trajectory": {
                "duration_s": self.trajectory.duration,
                "n_knots": len(self.trajectory.times),
                "csv": "trajectory.csv",
            },
            "config": None if self.config is None else self.config.to_dict(),
        }


def error_report(scene_id, exc, digest=None):
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "scene_id": scene_id,
        "scene_digest": digest,
        "status": "error",
        "error": exc.to_record(),
    }


def _reachable(inst, cfg):
    """Leaf centroid plus pre-grasp clearance inside the gantry travel."""
    p = inst.centroid3d + np.array([0.0, 0.0, cfg.waypoints.pre_grasp_offset])
    lo, hi = cfg.gantry.xyz_lower, cfg.gantry.xyz_upper
    for axis, value, a, b in zip("xyz", p, lo, hi):
        if not a <= value <= b:
            return f"{axis} = {value:.4f} outside travel [{a:.4f}, {b:.4f}]"
    return None


def exemption_mask(field, inst, point, radius):
    """Target-leaf voxels within ``radius`` (horizontally) of ``point``."""
    if field.occupancy.size == 0:
        return None
    own, _ = voxelize(inst.cloud, field.voxel_size, origin=field.origin, shape=field.occupancy.shape)
    idx = np.argwhere(own)
    c = field.origin + (idx + 0.5) * field.voxel_size
    near = (c[:, 0] - point[0]) ** 2 + (c[:, 1] - point[1]) ** 2 <= radius * radius
    mask = np.zeros_like(own)
    sel = idx[near]
    mask[sel[:, 0], sel[:, 1], sel[:, 2]] = True
    return mask


def _merge_path(segments):
    path = []
    for _, res in segments:
        for q in res.waypoints:
            if path and np.array_equal(path[-1].q, q.q):
                continue
            path.append(q)
    return path


def run_pipeline(scene, cfg=Config(), stride=None, trial_id=None):
    """Plan a grasp on ``scene``; raises a ``LeafGraspError`` on failure.

    Leaves whose grasp fails for geometric reasons (no valid candidate,
    waypoint outside travel or inside another leaf's clearance) fall back
    to the next-ranked leaf. A search failure in the planner aborts.
    """
    # overrides are folded into the config so the report shows what ran
    if stride is not None:
        cfg = cfg.replace(grasp=dataclasses.replace(cfg.grasp, candidate_stride_px=int(stride)))
    if trial_id is not None:
        cfg = cfg.replace(pipeline=dataclasses.replace(cfg.pipeline, trial_id=int(trial_id)))
    trial_id = cfg.pipeline.trial_id
    model = cfg.gantry
    rig = scene.rig
    lat = {}
    t0 = time.perf_counter()
    instances = extract_instances(scene.labels, scene.depth, rig, cfg.perception, scene.confidence)
    if not instances:
        raise NoViableLeafError("no leaf instance survived extraction")
    fld = build_scene_field(instances, rig, cfg.perception.voxel_size, scene.plant_center_px)
    lat["perception"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    dropped, viable = [], []
    for inst in instances:
        why = _reachable(inst, cfg)
        if why is None:
            viable.append(inst)
        else:
            dropped.append({"leaf_id": inst.id, "reason": "workspace", "detail": why})
    if not viable:
        raise NoViableLeafError("every leaf lies outside the gantry workspace")
    _, ranked = select_leaf(viable, fld, cfg.leaf_selection)
    lat["selection"] = time.perf_counter() - t0

    by_id = {inst.id: inst for inst in viable}
    home = JointState(*cfg.pipeline.home, 0.0, 0.0, 0.0)
    attempts = []
    lat["grasp"] = lat["planning"] = 0.0
    last_exc = None
    for score in ranked[: cfg.pipeline.max_leaf_fallbacks]:
        inst = by_id[score.leaf_id]
        t0 = time.perf_counter()
        try:
            cand, smap = select_grasp_point(inst, scene.depth, rig, fld, cfg.grasp)
            wps = make_waypoints(cand, model, cfg.waypoints, jaw_yaw_from_cloud(inst.cloud))
        except (NoGraspablePointError, WorkspaceError) as exc:
            lat["grasp"] += time.perf_counter() - t0
            attempts.append({"leaf_id": inst.id, "outcome": exc.kind, "detail": str(exc)})
            last_exc = exc
            continue
        lat["grasp"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        exempt = exemption_mask(fld, inst, cand.point3d, cfg.planner.exempt_radius)
        obstacles = CollisionModel.from_field(fld, cfg.planner, model, exempt)
        q_pre, q_grasp, q_ret = wps.joints
        try:
            segments = [
                ("approach", plan_path(home, q_pre, obstacles, cfg.planner, model, trial_id)),
                ("descend", plan_path(q_pre, q_grasp, obstacles, cfg.planner, model, trial_id)),
                ("retreat", plan_path(q_grasp, q_ret, obstacles, cfg.planner, model, trial_id)),
            ]
        except InvalidEndpointError as exc:
            lat["planning"] += time.perf_counter() - t0
            attempts.append({"leaf_id": inst.id, "outcome": "endpoint_in_collision", "detail": str(exc)})
            last_exc = exc
            continue
        lat["planning"] += time.perf_counter() - t0
        attempts.append({"leaf_id": inst.id, "outcome": "ok"})

        t0 = time.perf_counter()
        traj = trapezoid_profile(_merge_path(segments), model)
        lat["trajectory"] = time.perf_counter() - t0
        return PlanOutcome(
            scene_id=scene.scene_id, instances=instances, field=fld, ranked=ranked,
            dropped=dropped, attempts=attempts, grasp=cand, score_map=smap,
            waypoints=wps, segments=segments, trajectory=traj, latency=lat, config=cfg,
        )
    if len(attempts) == 1:
        raise last_exc
    raise NoGraspablePointError(
        f"no leaf yielded a reachable grasp ({len(attempts)} tried): "
        + "; ".join(f"{a['leaf_id']}:{a['outcome']}" for a in attempts)
    )

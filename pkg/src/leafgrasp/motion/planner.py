"""Collision-checked path search for the gantry carriage.

Search runs over the three prismatic axes; wrist angles are interpolated
linearly along the resulting path. The tool is modelled as a vertical
capsule rising from the tip, checked against occupied voxel centres.
"""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..errors import InputError, PlanningError
from .gantry import JointState

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlannerParams:
    longest_valid_segment_fraction: float = 0.01
    planning_time: float = 10.0  # seconds, shared by all attempts
    attempts: int = 10
    goal_tolerance: float = 1e-3
    step_size: float = 0.3  # tree extension range, metres
    max_iterations: int = 1500  # per attempt
    shortcut_iterations: int = 200
    tool_radius: float = 0.03
    tool_length: float = 0.25
    exempt_radius: float = 0.03

    def __post_init__(self):
        if not 0 < self.longest_valid_segment_fraction <= 1:
            raise InputError("longest_valid_segment_fraction must be in (0, 1]")
        if self.attempts < 1:
            raise InputError("attempts must be >= 1")
        if self.planning_time <= 0 or self.step_size <= 0 or self.max_iterations < 1:
            raise InputError("planning_time, step_size and max_iterations must be positive")


class InvalidEndpointError(PlanningError):
    """Start or goal configuration is out of range or in collision."""


class CollisionModel:
    """Vertical capsule (tip upwards ``length``, radius ``radius``) vs points."""

    def __init__(self, centers, radius=0.03, length=0.25, model=None):
        self.centers = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
        self.radius = float(radius)
        self.length = float(length)
        self.model = model
        if len(self.centers):
            self._lo = self.centers.min(axis=0) - self.radius
            self._hi = self.centers.max(axis=0) + self.radius

    @classmethod
    def from_field(cls, field, params=PlannerParams(), model=None, exempt=None):
        """Occupied voxels of ``field`` minus optional exempt voxel mask."""
        if field is None or field.occupancy.size == 0:
            return cls(np.zeros((0, 3)), params.tool_radius, params.tool_length, model)
        keep = None if exempt is None else ~exempt
        return cls(field.voxel_centers(keep), params.tool_radius, params.tool_length, model)

    def valid(self, tips):
        """Boolean validity for an ``(M, 3)`` array of tool-tip positions."""
        tips = np.atleast_2d(np.asarray(tips, dtype=np.float64))
        ok = np.ones(len(tips), dtype=bool)
        if self.model is not None:
            ok &= np.all((tips >= self.model.xyz_lower - 1e-12) & (tips <= self.model.xyz_upper + 1e-12), axis=1)
        if not len(self.centers):
            return ok
        near = (
            (tips[:, 0] >= self._lo[0]) & (tips[:, 0] <= self._hi[0])
            & (tips[:, 1] >= self._lo[1]) & (tips[:, 1] <= self._hi[1])
            & (tips[:, 2] + self.length >= self._lo[2]) & (tips[:, 2] <= self._hi[2])
        )
        idx = np.flatnonzero(near & ok)
        r2 = self.radius * self.radius
        for chunk in np.array_split(idx, max(1, len(idx) // 256)):
            if len(chunk) == 0:
                continue
            t = tips[chunk]
            c = self.centers
            dx = c[None, :, 0] - t[:, None, 0]
            dy = c[None, :, 1] - t[:, None, 1]
            below = t[:, None, 2] - c[None, :, 2]
            above = c[None, :, 2] - (t[:, None, 2] + self.length)
            dz = np.maximum(np.maximum(below, above), 0.0)
            hit = (dx * dx + dy * dy + dz * dz <= r2).any(axis=1)
            ok[chunk[hit]] = False
        return ok

    def motion_valid(self, a, b, resolution=None):
        """Validity of the straight tip motion ``a -> b``.

        With ``resolution`` the motion is sampled at that spacing. Without,
        the exact swept volume is tested, so the answer holds at every
        sampling resolution.
        """
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        if resolution is not None:
            n = max(1, int(math.ceil(np.linalg.norm(b - a) / resolution)))
            s = np.linspace(0.0, 1.0, n + 1)[:, None]
            return bool(self.valid(a + s * (b - a)).all())
        if not self.valid(np.stack([a, b])).all():
            return False  # the travel box is convex, so in-range endpoints keep the motion in range
        return not self._sweep_hits(a, b)

    def _sweep_hits(self, a, b):
        return bool(len(self.centers)) and _sweep_kernel(self.centers, a, b, self.radius, self.length)


@njit(cache=True)
def _sweep_kernel(centers, a, b, r, L):
    """Any centre within ``r`` of the parallelogram ``a + s d + h z``,
    ``s`` in [0, 1], ``h`` in [0, L], swept by the capsule axis."""
    d0, d1, d2 = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    dd = d0 * d0 + d1 * d1 + d2 * d2
    horiz = d0 * d0 + d1 * d1
    r2 = r * r
    lo0, hi0 = min(a[0], b[0]) - r, max(a[0], b[0]) + r
    lo1, hi1 = min(a[1], b[1]) - r, max(a[1], b[1]) + r
    lo2, hi2 = min(a[2], b[2]) - r, max(a[2], b[2]) + r + L
    for k in range(centers.shape[0]):
        c0, c1, c2 = centers[k, 0], centers[k, 1], centers[k, 2]
        if c0 < lo0 or c0 > hi0 or c1 < lo1 or c1 > hi1 or c2 < lo2 or c2 > hi2:
            continue
        w0, w1, w2 = c0 - a[0], c1 - a[1], c2 - a[2]
        best = np.inf
        # the minimum of a convex quadratic over a rectangle lies on an edge
        # unless the stationary point is interior
        for e in range(5):
            if e < 2:  # s = 0 or 1, h clamped
                s = float(e)
                h = min(max(w2 - s * d2, 0.0), L)
            elif e < 4:  # h = 0 or L, s clamped
                if dd == 0.0:
                    continue
                h = 0.0 if e == 2 else L
                s = min(max((w0 * d0 + w1 * d1 + w2 * d2 - h * d2) / dd, 0.0), 1.0)
            else:
                if horiz == 0.0:
                    continue
                s = (w0 * d0 + w1 * d1) / horiz
                h = w2 - s * d2
                if s < 0.0 or s > 1.0 or h < 0.0 or h > L:
                    continue
            e0, e1, e2 = w0 - s * d0, w1 - s * d1, w2 - s * d2 - h
            dist2 = e0 * e0 + e1 * e1 + e2 * e2
            if dist2 < best:
                best = dist2
        if best <= r2:
            return True
    return False


@dataclass
class PlanResult:
    waypoints: list
    straight_line: bool
    attempts_used: int = 0
    iterations: int = 0
    tree_nodes: int = 0
    resolution: float = 0.0
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.waypoints)

    def to_dict(self):
        return {
            "n_waypoints": len(self.waypoints),
            "straight_line": self.straight_line,
            "attempts_used": self.attempts_used,
            "iterations": self.iterations,
            "tree_nodes": self.tree_nodes,
            "resolution_m": self.resolution,
            "waypoints": [w.to_list() for w in self.waypoints],
        }


class _Tree:
    def __init__(self, root):
        self.nodes = np.empty((256, 3))
        self.parent = np.empty(256, dtype=np.int64)
        self.nodes[0] = root
        self.parent[0] = -1
        self.n = 1

    def add(self, q, parent):
        if self.n == len(self.nodes):
            self.nodes = np.concatenate([self.nodes, np.empty_like(self.nodes)])
            self.parent = np.concatenate([self.parent, np.empty_like(self.parent)])
        self.nodes[self.n] = q
        self.parent[self.n] = parent
        self.n += 1
        return self.n - 1

    def nearest(self, q):
        d = self.nodes[: self.n] - q
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def branch(self, i):
        out = []
        while i >= 0:
            out.append(self.nodes[i].copy())
            i = self.parent[i]
        return out


_TRAPPED, _ADVANCED, _REACHED = 0, 1, 2


def _extend(tree, target, step, check):
    i = tree.nearest(target)
    q = tree.nodes[i]
    d = target - q
    dist = float(np.linalg.norm(d))
    if dist <= step:
        new, status = target, _REACHED
    else:
        new, status = q + d * (step / dist), _ADVANCED
    if not check(q, new):
        return _TRAPPED, -1
    return status, tree.add(new, i)


def _connect(tree, target, step, check):
    while True:
        status, j = _extend(tree, target, step, check)
        if status != _ADVANCED:
            return status, j


def rrt_connect(start, goal, check, lower, upper, rng, step, max_iterations, deadline):
    """Bidirectional RRT over a box; returns ``(path, iterations, nodes)``."""
    ta, tb = _Tree(start), _Tree(goal)
    a_is_start = True
    for it in range(1, max_iterations + 1):
        if time.monotonic() > deadline:
            return None, it, ta.n + tb.n
        sample = rng.uniform(lower, upper)
        status, ia = _extend(ta, sample, step, check)
        if status != _TRAPPED:
            status_b, ib = _connect(tb, ta.nodes[ia], step, check)
            if status_b == _REACHED:
                pa, pb = ta.branch(ia)[::-1], tb.branch(ib)[1:]
                path = pa + pb if a_is_start else (pa + pb)[::-1]
                return path, it, ta.n + tb.n
        ta, tb = tb, ta
        a_is_start = not a_is_start
    return None, max_iterations, ta.n + tb.n


def shortcut(path, check, rng, iterations):
    """Greedy random shortcutting; endpoints never move."""
    path = list(path)
    for _ in range(iterations):
        if len(path) <= 2:
            break
        i, j = sorted(rng.choice(len(path), size=2, replace=False))
        if j - i < 2:
            continue
        if check(path[i], path[j]):
            path = path[: i + 1] + path[j:]
    return path


def _with_wrist(xyz_path, q_s, q_g):
    pts = np.asarray(xyz_path)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    total = seg.sum()
    s = np.concatenate([[0.0], np.cumsum(seg)]) / total if total > 0 else np.linspace(0, 1, len(pts))
    ws, wg = q_s.q[3:], q_g.q[3:]
    out = []
    for k, (p, f) in enumerate(zip(pts, s)):
        if k == 0:
            out.append(q_s)
        elif k == len(pts) - 1:
            out.append(q_g)
        else:
            out.append(JointState.from_array(np.concatenate([p, ws + f * (wg - ws)])))
    return out


def plan_path(q_s, q_g, obstacles, params=PlannerParams(), model=None, trial_id=0):
    """Collision-free waypoint path from ``q_s`` to ``q_g``.

    ``obstacles`` is a ``CollisionModel`` (or a ``SceneField``, converted
    without exemptions). Straight segments are checked against the exact
    swept tool volume; ``longest_valid_segment_fraction`` of the workspace
    diagonal is reported as the nominal resolution. Raises
    ``InvalidEndpointError`` for bad endpoints and ``PlanningError`` when all
    attempts fail or the time budget is spent.
    """
    from .gantry import GantryModel

    model = model if model is not None else GantryModel()
    if not isinstance(obstacles, CollisionModel):
        obstacles = CollisionModel.from_field(obstacles, params, model)
    if obstacles.model is None:
        obstacles.model = model
    resolution = params.longest_valid_segment_fraction * model.diagonal

    for name, q in (("start", q_s), ("goal", q_g)):
        if not model.contains(q.q):
            raise InvalidEndpointError(f"{name} configuration outside joint limits")
        if not obstacles.valid(q.xyz)[0]:
            raise InvalidEndpointError(f"{name} configuration in collision")

    def check(a, b):
        return obstacles.motion_valid(a, b)

    a, b = q_s.xyz, q_g.xyz
    if check(a, b):
        return PlanResult([q_s, q_g], straight_line=True, resolution=resolution)

    deadline = time.monotonic() + params.planning_time
    total_iters = 0
    for attempt in range(params.attempts):
        rng = np.random.default_rng(trial_id * params.attempts + attempt)
        path, iters, nodes = rrt_connect(
            a, b, check, model.xyz_lower, model.xyz_upper, rng,
            params.step_size, params.max_iterations, deadline,
        )
        total_iters += iters
        if path is not None:
            path = shortcut(path, check, rng, params.shortcut_iterations)
            return PlanResult(
                _with_wrist(path, q_s, q_g),
                straight_line=False,
                attempts_used=attempt + 1,
                iterations=total_iters,
                tree_nodes=nodes,
                resolution=resolution,
            )
        if time.monotonic() > deadline:
            log.info("planning budget exhausted after %d attempts", attempt + 1)
            break
    raise PlanningError(
        f"no collision-free path after {params.attempts} attempts "
        f"({total_iters} iterations)"
    )

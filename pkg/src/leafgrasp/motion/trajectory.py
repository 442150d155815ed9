"""Synchronised trapezoidal velocity profiles through joint waypoints."""

import math
from dataclasses import dataclass, field

import numpy as np

from .gantry import AXES, GantryModel

SAMPLE_RATE_HZ = 100.0


def trapezoid_time(distance, v_cap, a_cap):
    """Minimum duration to travel ``distance`` from rest to rest."""
    if distance <= 0:
        return 0.0
    if distance >= v_cap * v_cap / a_cap:
        return distance / v_cap + v_cap / a_cap
    return 2.0 * math.sqrt(distance / a_cap)


def cruise_velocity(distance, duration, a_cap, v_cap):
    """Peak velocity of the trapezoid covering ``distance`` in ``duration``
    with ramps at ``a_cap``; never exceeds ``v_cap``."""
    if distance <= 0:
        return 0.0
    aT = a_cap * duration
    disc = max(aT * aT - 4.0 * a_cap * distance, 0.0)
    # smaller root of v^2 - aT v + aD = 0, in cancellation-free form
    return min(2.0 * a_cap * distance / (aT + math.sqrt(disc)), v_cap)


@dataclass(frozen=True)
class _Segment:
    t0: float
    duration: float
    q0: np.ndarray
    q1: np.ndarray
    sign: np.ndarray
    v_peak: np.ndarray
    t_ramp: np.ndarray
    accel: np.ndarray

    def evaluate(self, t):
        """Position, velocity, acceleration at local times ``t`` (array)."""
        t = np.clip(np.asarray(t, dtype=float)[:, None], 0.0, self.duration)
        T, tr, vp, a = self.duration, self.t_ramp[None], self.v_peak[None], self.accel[None]
        t_dec = T - tr
        up = t < tr
        down = t > t_dec
        td = np.maximum(T - t, 0.0)
        s = np.where(up, 0.5 * a * t * t, np.where(down, vp * (T - tr) - 0.5 * a * td * td, vp * (t - 0.5 * tr)))
        v = np.where(up, a * t, np.where(down, a * td, vp))
        acc = np.where(up, a, np.where(down, -a, 0.0))
        moving = vp > 0
        s = np.where(moving, s, 0.0)
        v = np.where(moving, v, 0.0)
        acc = np.where(moving, acc, 0.0)
        at_end = t >= T
        pos = np.where(at_end, self.q1[None], self.q0[None] + self.sign[None] * s)
        return pos, self.sign[None] * v, self.sign[None] * acc


@dataclass(eq=False)
class Trajectory:
    """Rest-to-rest piecewise trajectory; sampled arrays include every knot."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray
    segments: list = field(default_factory=list, repr=False)

    @property
    def duration(self):
        return float(self.times[-1]) if len(self.times) else 0.0

    def __len__(self):
        return len(self.times)

    def evaluate(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        pos = np.empty((len(t), 6))
        vel = np.empty((len(t), 6))
        acc = np.empty((len(t), 6))
        starts = np.array([s.t0 for s in self.segments])
        which = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.segments) - 1)
        for k, seg in enumerate(self.segments):
            sel = which == k
            if sel.any():
                pos[sel], vel[sel], acc[sel] = seg.evaluate(t[sel] - seg.t0)
        return pos, vel, acc

    def resample(self, rate_hz=SAMPLE_RATE_HZ):
        """Samples at a fixed rate (plus the final instant)."""
        if not self.segments:
            return np.zeros(0), np.zeros((0, 6)), np.zeros((0, 6))
        n = int(math.floor(self.duration * rate_hz + 1e-9))
        t = np.arange(n + 1) / rate_hz
        if t[-1] < self.duration - 1e-12:
            t = np.append(t, self.duration)
        pos, vel, _ = self.evaluate(t)
        return t, pos, vel

    def write_csv(self, path, rate_hz=SAMPLE_RATE_HZ):
        t, pos, vel = self.resample(rate_hz)
        header = ["t", *AXES, *(f"v_{a}" for a in AXES)]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for i in range(len(t)):
                row = [t[i], *pos[i], *vel[i]]
                fh.write(",".join(_fmt(x) for x in row) + "\n")


def _fmt(x):
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def _empty():
    z = np.zeros((0, 6))
    return Trajectory(np.zeros(0), z, z.copy(), z.copy(), [])


def trapezoid_profile(path, model=None, rate_hz=SAMPLE_RATE_HZ):
    """Stop-at-every-waypoint trapezoidal trajectory through ``path``.

    Each segment lasts as long as its slowest joint needs under the capped
    limits; the other joints keep the same ramp acceleration with a lower
    cruise speed so that all of them arrive together.
    """
    model = model if model is not None else GantryModel()
    qs = [np.asarray(getattr(w, "q", w), dtype=float) for w in path]
    v_cap, a_cap = model.velocity_caps, model.acceleration_caps
    segments, t0 = [], 0.0
    for qa, qb in zip(qs[:-1], qs[1:]):
        delta = qb - qa
        dist = np.abs(delta)
        T = max(trapezoid_time(d, v, a) for d, v, a in zip(dist, v_cap, a_cap))
        if T <= 0:
            continue
        vp = np.array([cruise_velocity(d, T, a, v) for d, v, a in zip(dist, v_cap, a_cap)])
        tr = np.where(vp > 0, vp / a_cap, 0.0)
        segments.append(_Segment(t0, T, qa, qb, np.sign(delta), vp, tr, a_cap.copy()))
        t0 += T
    if not segments:
        return _empty()

    knots = [0.0]
    for s in segments:
        knots.extend(s.t0 + np.concatenate([s.t_ramp, s.duration - s.t_ramp, [s.duration]]))
    total = segments[-1].t0 + segments[-1].duration
    grid = np.arange(int(math.floor(total * rate_hz + 1e-9)) + 1) / rate_hz
    times = np.unique(np.clip(np.concatenate([grid, knots, [total]]), 0.0, total))
    traj = Trajectory(times, None, None, None, segments)
    traj.positions, traj.velocities, traj.accelerations = traj.evaluate(times)
    # knots shared by two segments belong to the later one; pin the final instant
    traj.positions[-1] = qs[-1]
    traj.velocities[-1] = 0.0
    traj.accelerations[-1] = 0.0
    return traj

"""Batch evaluation on the synthetic bench suite against analytic truth."""

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import Config
from .edt import distance_transform
from .errors import LeafGraspError
from .grasp import px_to_mm
from .oracle import brute_force_grasp
from .pipeline import STAGES, error_report, run_pipeline
from .synthetic import bench_suite, render_scene, vertical_hit

DEFAULT_NOISE_MM = 2.0
DEFAULT_EROSION_PX = 2
FLAGS = ("segmentation_ok", "grasp_in_mask", "edge_margin_ok", "approach_ok", "plan_ok")


@dataclass(frozen=True)
class TruthTolerances:
    min_iou: float = 0.5
    max_height_error_m: float = 0.010
    max_normal_angle_deg: float = 70.0


@dataclass(eq=False)
class TrialResult:
    scene_id: str
    index: int
    noise: bool
    selected_leaf: object = None
    grasp: dict = None
    plan: dict = None
    flags: dict = field(default_factory=lambda: dict.fromkeys(FLAGS, False))
    error: dict = None
    pixel_error_px: float = float("nan")
    oracle_pixel: object = None
    iou: float = float("nan")
    height_error_mm: float = float("nan")
    normal_angle_deg: float = float("nan")
    gt_edge_mm: float = float("nan")
    latency: dict = field(default_factory=dict)
    report: dict = None

    @property
    def success(self):
        return all(self.flags[k] for k in FLAGS)

    def row(self):
        out = {
            "scene_id": self.scene_id,
            "noise": int(self.noise),
            "success": int(self.success),
            "selected_leaf": "" if self.selected_leaf is None else self.selected_leaf,
            "grasp_u": "" if self.grasp is None else self.grasp["pixel"][0],
            "grasp_v": "" if self.grasp is None else self.grasp["pixel"][1],
            "total": "" if self.grasp is None else f"{self.grasp['scores']['total']:.6f}",
        }
        out.update({k: int(self.flags[k]) for k in FLAGS})
        for name in ("pixel_error_px", "iou", "height_error_mm", "normal_angle_deg", "gt_edge_mm"):
            value = getattr(self, name)
            out[name] = "" if not math.isfinite(value) else f"{value:.6f}"
        out["error"] = "" if self.error is None else self.error["kind"]
        return out


def evaluate(rendered, outcome, cfg, tol=TruthTolerances()):
    """Score a successful ``PlanOutcome`` against the render's ground truth."""
    res = {}
    leaf = outcome.selected_leaf
    truth = rendered.truth.get(leaf)
    inst = outcome.instance
    u, v = outcome.grasp.pixel
    if truth is None:
        return res, {k: False for k in FLAGS[:-1]}
    gt = truth.visible_mask
    inter = np.logical_and(inst.mask, gt).sum()
    union = np.logical_or(inst.mask, gt).sum()
    res["iou"] = float(inter / union) if union else 0.0
    in_mask = bool(gt[v, u])
    gt_inside = distance_transform(gt, "inside")
    z_clean = rendered.clean_depth[v, u]
    if in_mask and z_clean > 0:
        res["gt_edge_mm"] = float(gt_inside[v, u] * px_to_mm(rendered.spec.rig, z_clean))
    approach = False
    p = outcome.grasp.point3d
    hit = vertical_hit(truth.spec, p[0], p[1])
    if hit is not None:
        z, (hx, hy) = hit
        n = truth.spec.local_normal(hx, hy)
        res["height_error_mm"] = abs(z - p[2]) * 1000.0
        res["normal_angle_deg"] = math.degrees(math.acos(min(1.0, abs(n[2]))))
        approach = (
            res["height_error_mm"] <= tol.max_height_error_m * 1000.0
            and res["normal_angle_deg"] <= tol.max_normal_angle_deg
        )
    flags = {
        "segmentation_ok": res["iou"] >= tol.min_iou,
        "grasp_in_mask": in_mask,
        "edge_margin_ok": res.get("gt_edge_mm", 0.0) >= cfg.grasp.edge_min_mm,
        "approach_ok": approach,
    }
    return res, flags


def run_trial(spec, index, cfg=Config(), stride=None, noise=False, oracle=True):
    rendered = render_scene(spec)
    scene = rendered.to_scene()
    digest = scene.digest
    trial = TrialResult(scene_id=spec.scene_id, index=index, noise=noise)
    t0 = time.perf_counter()
    try:
        outcome = run_pipeline(scene, cfg, stride=stride, trial_id=index)
    except LeafGraspError as exc:
        trial.error = exc.to_record()
        trial.report = error_report(scene.scene_id, exc, digest)
        trial.latency = {"total": time.perf_counter() - t0}
        return trial, rendered, None
    trial.latency = dict(outcome.latency, total=time.perf_counter() - t0)
    trial.report = outcome.report(digest)
    trial.selected_leaf = outcome.selected_leaf
    trial.grasp = trial.report["grasp"]
    trial.plan = trial.report["plan"]
    extra, flags = evaluate(rendered, outcome, cfg)
    flags["plan_ok"] = True
    trial.flags = flags
    for k, val in extra.items():
        setattr(trial, k, val)
    if oracle:
        best = brute_force_grasp(outcome.instance, scene.depth, scene.rig, outcome.field, cfg.grasp,
                                 stride=1, inside=outcome.instance.inside_dt)
        if best is not None:
            trial.oracle_pixel = list(best[0])
            trial.pixel_error_px = math.dist(best[0], outcome.grasp.pixel)
    return trial, rendered, outcome


def _suite(n, seed, noise):
    if noise:
        return bench_suite(n, seed, depth_noise_mm=DEFAULT_NOISE_MM, mask_erosion_px=DEFAULT_EROSION_PX)
    return bench_suite(n, seed)


def _job(args):
    spec, index, cfg, stride, noise, viz_dir = args
    trial, rendered, outcome = run_trial(spec, index, cfg, stride, noise)
    if viz_dir is not None and outcome is not None:
        from .viz import render_report_images

        render_report_images(rendered.to_scene(), trial.report, os.path.join(viz_dir, spec.scene_id), outcome.field)
    return trial


def run_bench(n=24, seed=42, cfg=Config(), noise=False, stride=None, workers=1, viz_dir=None):
    """Run the suite; trials come back ordered by index whatever ``workers`` is."""
    jobs = [(spec, i, cfg, stride, noise, viz_dir) for i, spec in enumerate(_suite(n, seed, noise))]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(_job, jobs))
    else:
        trials = [_job(j) for j in jobs]
    return sorted(trials, key=lambda t: t.index)


def success_rate(trials):
    return sum(t.success for t in trials) / len(trials) if trials else 0.0


def summarize(trials):
    errs = [t.pixel_error_px for t in trials if math.isfinite(t.pixel_error_px)]
    return {
        "n_trials": len(trials),
        "n_success": int(sum(t.success for t in trials)),
        "success_rate": success_rate(trials),
        "mean_pixel_error_px": float(np.mean(errs)) if errs else float("nan"),
        "max_pixel_error_px": float(np.max(errs)) if errs else float("nan"),
        "flag_rates": {k: sum(t.flags[k] for t in trials) / len(trials) for k in FLAGS} if trials else {},
    }


def write_results(out_dir, suites):
    """Write deterministic tables plus separate latency files.

    ``suites`` maps a label (``clean``/``noisy``) to a trial list.
    """
    os.makedirs(out_dir, exist_ok=True)
    rows, summary = [], {}
    for label, trials in suites.items():
        summary[label] = summarize(trials)
        for t in trials:
            rows.append(dict(suite=label, **t.row()))
    with open(os.path.join(out_dir, "bench_results.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["suite"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    with open(os.path.join(out_dir, "bench_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "bench_summary.md"), "w", encoding="utf-8") as fh:
        fh.write(summary_markdown(summary))
    for label, trials in suites.items():
        rdir = os.path.join(out_dir, "reports", label)
        os.makedirs(rdir, exist_ok=True)
        for t in trials:
            with open(os.path.join(rdir, f"{t.scene_id}.json"), "w", encoding="utf-8") as fh:
                json.dump(t.report, fh, indent=2, sort_keys=True)
                fh.write("\n")
    write_latency(out_dir, suites)
    return summary


def summary_markdown(summary):
    lines = [
        "# Bench summary",
        "",
        "| suite | trials | success | rate | mean px err | max px err |",
        "|---|---|---|---|---|---|",
    ]
    for label, s in summary.items():
        lines.append(
            f"| {label} | {s['n_trials']} | {s['n_success']} | {100 * s['success_rate']:.1f}% "
            f"| {s['mean_pixel_error_px']:.2f} | {s['max_pixel_error_px']:.2f} |"
        )
    lines += ["", "| suite | " + " | ".join(FLAGS) + " |", "|---" * (len(FLAGS) + 1) + "|"]
    for label, s in summary.items():
        lines.append(f"| {label} | " + " | ".join(f"{100 * s['flag_rates'].get(k, 0):.1f}%" for k in FLAGS) + " |")
    return "\n".join(lines) + "\n"


def write_latency(out_dir, suites):
    """Wall-clock timings; kept apart so the other outputs stay reproducible."""
    cols = list(STAGES) + ["total"]
    with open(os.path.join(out_dir, "latency.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["suite", "scene_id"] + [f"{c}_s" for c in cols])
        for label, trials in suites.items():
            for t in trials:
                w.writerow([label, t.scene_id] + [f"{t.latency.get(c, 0.0):.6f}" for c in cols])
    lines = ["# Per-stage latency (mean seconds)", "", "| suite | " + " | ".join(cols) + " |",
             "|---" * (len(cols) + 1) + "|"]
    for label, trials in suites.items():
        means = [np.mean([t.latency.get(c, 0.0) for t in trials]) if trials else 0.0 for c in cols]
        lines.append(f"| {label} | " + " | ".join(f"{m:.4f}" for m in means) + " |")
    with open(os.path.join(out_dir, "latency.md"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def trial_dict(t):
    d = asdict(t)
    d["success"] = t.success
    return d

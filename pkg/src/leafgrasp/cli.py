"""Command line entry point: ``plan``, ``viz``, ``bench`` and ``dump-config``.

Every failure is reported as a JSON error record on stderr and mapped to a
fixed exit status (see ``EXIT_CODES``).
"""

import argparse
import json
import logging
import os
import sys

from .config import load_config
from .errors import InputError, LeafGraspError
from .io import load_manifest

EXIT_CODES = {
    "ok": 0,
    "error": 1,
    "input_error": 2,
    "no_viable_leaf": 3,
    "no_graspable_point": 4,
    "workspace_error": 5,
    "planning_failure": 6,
    "protocol_violation": 7,
}

REPORT_FILE = "report.json"
TRAJECTORY_FILE = "trajectory.csv"
LATENCY_FILE = "latency.json"

log = logging.getLogger("leafgrasp")


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {what} {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} {path} is not valid JSON: {exc}") from None


def cmd_plan(args):
    from .pipeline import error_report, run_pipeline

    cfg = load_config(args.config)
    scene = load_manifest(args.manifest)
    os.makedirs(args.out_dir, exist_ok=True)
    try:
        outcome = run_pipeline(scene, cfg, stride=args.stride, trial_id=args.seed)
    except LeafGraspError as exc:
        _write_json(os.path.join(args.out_dir, REPORT_FILE), error_report(scene.scene_id, exc, scene.digest))
        raise
    report = outcome.report(scene.digest)
    _write_json(os.path.join(args.out_dir, REPORT_FILE), report)
    outcome.trajectory.write_csv(os.path.join(args.out_dir, TRAJECTORY_FILE))
    _write_json(os.path.join(args.out_dir, LATENCY_FILE), outcome.latency)
    g = report["grasp"]
    print(f"{scene.scene_id}: leaf {report['selected_leaf']} grasp at pixel {tuple(g['pixel'])} "
          f"score {g['scores']['total']:.4f}, trajectory {report['trajectory']['duration_s']:.2f} s")
    return 0


def cmd_viz(args):
    from .viz import render_report_images

    cfg = load_config(args.config)
    scene = load_manifest(args.manifest)
    report = _read_json(args.report, "report")
    for path in render_report_images(scene, report, args.out_dir, cfg=cfg):
        print(path)
    return 0


def cmd_bench(args):
    from .bench import run_bench, summary_markdown, write_results

    cfg = load_config(args.config)
    modes = {"off": (False,), "on": (True,), "both": (False, True)}[args.noise]
    suites = {}
    for noisy in modes:
        label = "noisy" if noisy else "clean"
        viz_dir = os.path.join(args.out_dir, "images", label) if args.viz else None
        suites[label] = run_bench(args.n, args.seed, cfg, noisy, args.stride, args.workers, viz_dir)
    summary = write_results(args.out_dir, suites)
    sys.stdout.write(summary_markdown(summary))
    return 0


def cmd_dump_config(args):
    sys.stdout.write(load_config(args.config).dumps())
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="leafgrasp", description=__doc__.splitlines()[0])
    p.add_argument("--dump-config", action="store_true", help="print the effective configuration and exit")
    p.add_argument("--config", help="JSON configuration overriding the defaults")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON configuration file")
    common.add_argument("--stride", type=int, default=None, help="grasp candidate stride in pixels")

    sp = sub.add_parser("plan", parents=[common], help="plan a grasp for one scene")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out-dir", default="out")
    sp.add_argument("--seed", type=int, default=0, help="trial id seeding the planner")
    sp.set_defaults(func=cmd_plan)

    sv = sub.add_parser("viz", parents=[common], help="overlay images for a plan report")
    sv.add_argument("--manifest", required=True)
    sv.add_argument("--report", required=True)
    sv.add_argument("--out-dir", default="out")
    sv.set_defaults(func=cmd_viz)

    sb = sub.add_parser("bench", parents=[common], help="run the synthetic bench suite")
    sb.add_argument("--n", type=int, default=24)
    sb.add_argument("--seed", type=int, default=42)
    sb.add_argument("--noise", choices=("off", "on", "both"), default="both")
    sb.add_argument("--out-dir", default="bench_out")
    sb.add_argument("--workers", type=int, default=1)
    sb.add_argument("--viz", action="store_true", help="also write overlay images per trial")
    sb.set_defaults(func=cmd_bench)

    sd = sub.add_parser("dump-config", parents=[common], help="print the effective configuration")
    sd.set_defaults(func=cmd_dump_config)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.dump_config:
        args.func = cmd_dump_config
    elif args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_CODES["input_error"]
    if getattr(args, "n", 1) < 1:
        parser.error("--n must be >= 1")
    if getattr(args, "stride", None) is not None and args.stride < 1:
        parser.error("--stride must be >= 1")
    try:
        return args.func(args)
    except LeafGraspError as exc:
        sys.stderr.write(json.dumps({"error": exc.to_record()}, sort_keys=True) + "\n")
        return exc.exit_code
    except Exception as exc:  # last-resort mapping keeps the exit-code contract
        log.debug("unhandled error", exc_info=True)
        sys.stderr.write(json.dumps({"error": {"kind": "error", "exit_code": 1, "message": repr(exc)}}) + "\n")
        return EXIT_CODES["error"]


if __name__ == "__main__":
    sys.exit(main())

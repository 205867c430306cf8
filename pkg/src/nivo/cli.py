"""Command-line entry point.

Exit codes: 0 success, 2 usage or configuration error, 3 load or data error.
Log level comes from ``NIVO_LOG_LEVEL`` (default WARNING).
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from . import evaluation as ev
from .config import RunConfig, config_header, load_config, with_overrides
from .errors import ConfigError, NivoError
from .io import load_sequence, read_trajectory, write_trajectory
from .pipeline import run_pipeline, write_diagnostics
from .synthetic import load_scene_file, render_synthetic

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

log = logging.getLogger("nivo")


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return with_overrides(cfg, getattr(args, "seed", None))


def cmd_run(args):
    cfg = _config(args)
    seq = load_sequence(args.dataset)
    log.info("%s: %d frames", args.dataset, len(seq))
    result = run_pipeline(seq, cfg.pipeline, single_thread=args.single_thread,
                          max_frames=args.max_frames)
    header = config_header(cfg)
    write_trajectory(result.trajectory, args.output, header=header[2:])
    if args.diagnostics:
        write_diagnostics(result.diagnostics, args.diagnostics, header)
    print(f"{len(result.trajectory)} poses written to {args.output}")


def cmd_synth(args):
    spec = load_scene_file(args.spec)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=int(args.seed))
    if args.max_frames is not None:
        n = args.max_frames
        spec = dataclasses.replace(spec, poses=spec.poses[:n], timestamps=spec.timestamps[:n])
    seq = render_synthetic(spec, args.out_dir)
    print(f"{len(seq)} frames written to {args.out_dir}")


def cmd_eval(args):
    est, gt = read_trajectory(args.estimate), read_trajectory(args.groundtruth)
    report = ev.evaluate(est, gt, align=not args.no_align)
    print(ev.format_report(report))
    print(f"  literal sqrt(mean e) {report.rmse_literal:.6f}")
    if args.report:
        ev.write_report_csv(report, args.report)


def cmd_drift(args):
    est, tags = read_trajectory(args.estimate), read_trajectory(args.tags)
    meters, degrees = ev.drift_from_trajectories(est, tags)
    print(f"drift {meters:.6f} m  rotation {degrees:.4f} deg")


def cmd_plot_data(args):
    trajs = [read_trajectory(p) for p in args.trajectories]
    labels = args.labels.split(",") if args.labels else [os.path.basename(p) for p in args.trajectories]
    if len(labels) != len(trajs):
        raise ConfigError(f"--labels has {len(labels)} names for {len(trajs)} trajectories")
    ref = read_trajectory(args.reference) if args.reference else None
    if ref is not None:
        trajs, labels = [ref] + trajs, ["reference"] + labels
    rows = ev.plot_rows(trajs, labels, reference=ref)
    ev.write_plot_csv(rows, args.output)
    print(f"{len(rows)} points written to {args.output}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nivo", description="Plane-normal / correlator RGB-D odometry.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run odometry over a sequence")
    r.add_argument("dataset", help="sequence directory or manifest.ini")
    r.add_argument("output", help="TUM trajectory to write")
    r.add_argument("--config", help="JSON config, or a diagnostics CSV to replay")
    r.add_argument("--seed", type=int)
    r.add_argument("--single-thread", action="store_true", help="run the stages sequentially")
    r.add_argument("--diagnostics", help="per-frame CSV")
    r.add_argument("--max-frames", type=int)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("synth", help="render a synthetic plane-world sequence")
    s.add_argument("spec", help="JSON scene description")
    s.add_argument("out_dir")
    s.add_argument("--seed", type=int, help="depth-noise seed (overrides the scene file)")
    s.add_argument("--max-frames", type=int)
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("eval", help="aligned position-error statistics")
    e.add_argument("estimate")
    e.add_argument("groundtruth")
    e.add_argument("--report", help="CSV with rmse, mean, median, std, sse")
    e.add_argument("--no-align", action="store_true")
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("drift", help="first-to-last drift against tag-anchored poses")
    d.add_argument("estimate")
    d.add_argument("tags", help="TUM file of camera poses in the tag frame")
    d.set_defaults(func=cmd_drift)

    pd = sub.add_parser("plot-data", help="trajectory polylines as CSV")
    pd.add_argument("trajectories", nargs="+")
    pd.add_argument("-o", "--output", required=True)
    pd.add_argument("--reference", help="ground truth; every input is aligned to it")
    pd.add_argument("--labels", help="comma-separated series names")
    pd.set_defaults(func=cmd_plot_data)
    return p


def main(argv=None) -> int:
    level = os.environ.get("NIVO_LOG_LEVEL", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        print(f"warning: unknown NIVO_LOG_LEVEL {level!r}, using WARNING", file=sys.stderr)
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "max_frames", None) is not None and args.max_frames < 1:
        print("error: --max-frames must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NivoError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

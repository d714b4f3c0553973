"""Command-line entry point: run, gaze, eval, synth, cluster, compare, dashboard."""
import argparse
import logging
import os
import subprocess
import sys
from pathlib import Path

from dotenv import load_dotenv

from errors import ConfigError, FormatError, LocalizerError, ValidationError
from evaluation.gaze_metrics import GazeGeometry
from evaluation.metrics import DEFAULT_SIGMAS
from pipeline.cluster import cmd_cluster
from pipeline.evaluate import EvalConfig, cmd_compare, cmd_eval
from pipeline.runner import cmd_run, run_suite
from settings.config import RUN_DIR_ENV, RunSection, load_config
from storage.records import write_records
from synth.generator import Background, SceneConfig, SpriteSpec, Trajectory, generate, write_sequence
from synth.suite import make_benchmark_suite

logger = logging.getLogger("actloc")

HINTS = {
    ConfigError: [
        "Check the TOML file given with --config (or ACTLOC_CONFIG)",
        "Overrides use --set section.key=value",
    ],
    FormatError: [
        "Inputs are a directory of numbered .ppm frames or an STF1 file",
        "Record files hold one JSON object per line",
    ],
    ValidationError: [
        "Video ids must match between predictions and ground truth",
    ],
}


def _config_args(parser):
    parser.add_argument("--config", help="TOML run configuration (default: $ACTLOC_CONFIG)")
    parser.add_argument("--profile", choices=["desk", "full"], default="desk", help="Built-in scale profile")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")


def _run_args(parser):
    _config_args(parser)
    parser.add_argument("--input", help="PPM frame directory, STF1 video or STF1 feature sequence")
    parser.add_argument("--output", help="Run directory")
    parser.add_argument("--video-id")
    parser.add_argument("--suite", help="Suite index.jsonl; runs every sequence into OUTPUT/<id>/")
    parser.add_argument("--subset", help="Suite subset to run")
    parser.add_argument("--resume", action="store_true", help="Continue from OUTPUT/checkpoint")
    parser.add_argument("--max-frames", type=int)
    parser.add_argument("--checkpoint-every", type=int)
    parser.add_argument("--save-saliency", action="store_true")
    parser.add_argument("--attention", choices=["error", "activation"])
    parser.add_argument("--seed", type=int, help="Predictor initialisation seed")


def build_parser():
    parser = argparse.ArgumentParser(prog="actloc", description="Self-supervised streaming action localization")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-q", "--quiet", action="store_true", help="Hide progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Stream a video through the engine")
    _run_args(run)
    run.add_argument("--mode", choices=["localize", "gaze"])
    gaze = sub.add_parser("gaze", help="Same as run with mode=gaze")
    _run_args(gaze)

    ev = sub.add_parser("eval", help="Score run directories against ground truth")
    ev.add_argument("--predictions", nargs="+", required=True, help="Run directories or tubes.jsonl files")
    ev.add_argument("--ground-truth", nargs="+", required=True)
    ev.add_argument("--out", default="metrics.jsonl")
    ev.add_argument("--xlsx", help="Also write a spreadsheet report")
    ev.add_argument("--mode", choices=["localize", "gaze", "all"], default="localize")
    ev.add_argument("--labels", choices=["gt", "clusters"], default="gt")
    ev.add_argument("--assignments", help="Cluster assignments for --labels clusters")
    ev.add_argument("--sigmas", type=float, nargs="+", default=list(DEFAULT_SIGMAS))
    ev.add_argument("--baseline", action="append", default=[], choices=["center", "uniform"])
    ev.add_argument("--viewing-distance", type=float, default=60.0)
    ev.add_argument("--screen-width", type=float, default=40.0)

    syn = sub.add_parser("synth", help="Generate synthetic sequences")
    syn.add_argument("--suite", action="store_true", help="Write the full benchmark suite")
    syn.add_argument("--out", required=True)
    syn.add_argument("--format", choices=["stf", "ppm"], default="stf")
    syn.add_argument("--trajectory", choices=[t.value for t in Trajectory], default="linear")
    syn.add_argument("--background", choices=[b.value for b in Background], default="flat")
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--length", type=int, default=60)
    syn.add_argument("--active", type=int, nargs=2, metavar=("START", "END"))
    syn.add_argument("--size", type=int, default=16)

    clu = sub.add_parser("cluster", help="k-means pseudo-labels from run features")
    clu.add_argument("runs", nargs="+", help="Run directories (searched recursively)")
    clu.add_argument("--out", required=True)
    k_group = clu.add_mutually_exclusive_group(required=True)
    k_group.add_argument("--k", type=int)
    k_group.add_argument("--k-from-gt", action="store_true")
    k_group.add_argument("--elbow", action="store_true")
    clu.add_argument("--ground-truth", nargs="+")
    clu.add_argument("--k-max", type=int, default=8)
    clu.add_argument("--seed", type=int, default=0)

    cmp_ = sub.add_parser("compare", help="Proposal and attention ablation on a suite subset")
    _config_args(cmp_)
    cmp_.add_argument("--suite", required=True, help="Suite index.jsonl")
    cmp_.add_argument("--subset", default="localization")
    cmp_.add_argument("--out", required=True)

    dash = sub.add_parser("dashboard", help="Open the results viewer")
    dash.add_argument("run_dir", nargs="?", help="Run directory (default: $ACTLOC_RUN_DIR)")
    return parser


def _run_config(args, mode=None):
    cfg = load_config(args.config, args.overrides, args.profile)
    run = cfg.run
    if args.input:
        run.input = args.input
    if args.output:
        run.output = args.output
    if args.video_id:
        run.video_id = args.video_id
    if args.max_frames is not None:
        run.max_frames = args.max_frames
    if args.checkpoint_every is not None:
        run.checkpoint_every = args.checkpoint_every
    if args.save_saliency:
        run.save_saliency = True
    if args.attention:
        run.attention_source = args.attention
    if args.seed is not None:
        cfg.predictor.seed = args.seed
    if mode or getattr(args, "mode", None):
        run.mode = mode or args.mode
    return cfg.validate()


def do_run(args, mode=None):
    cfg = _run_config(args, mode)
    if args.suite:
        if args.resume:
            raise ConfigError("--resume applies to single runs, not suites")
        summaries = run_suite(cfg, args.suite, args.subset, cfg.run.output, progress=not args.quiet)
        print(f"✅ {len(summaries)} sequences processed into {cfg.run.output}")
        return 0
    summary = cmd_run(cfg, resume=args.resume, progress=not args.quiet)
    print(f"✅ {summary.video_id}: {summary.records} frame records, {summary.tubes} tubes -> {summary.output_dir}")
    if summary.resumed_at is not None:
        print(f"ℹ️ resumed at frame {summary.resumed_at}")
    return 0


def do_eval(args):
    cfg = EvalConfig(
        sigmas=tuple(args.sigmas),
        label_source=args.labels,
        assignments_path=args.assignments,
        mode=args.mode,
        geometry=GazeGeometry(args.viewing_distance, args.screen_width),
        baselines=args.baseline,
    )
    records = cmd_eval(args.predictions, args.ground_truth, cfg)
    write_records(args.out, records)
    if args.xlsx:
        from dashboard.tables import metrics_frame, write_excel_report
        write_excel_report(args.xlsx, {"Metrics": metrics_frame(records)})
    for record in records:
        if record["metric"] in ("recall", "mAP") and record["sigma"] != 0.5:
            continue
        if "label" in record:
            continue
        sigma = f"@{record['sigma']}" if record["sigma"] is not None else ""
        baseline = f" ({record['baseline']})" if "baseline" in record else ""
        print(f"📊 {record['metric']}{sigma}{baseline}: {record['value']:.4f}")
    print(f"✅ {len(records)} metric records -> {args.out}")
    return 0


def do_synth(args):
    if args.suite:
        index = make_benchmark_suite(args.out, args.format, progress=not args.quiet)
        print(f"✅ {len(index)} sequences -> {args.out}")
        return 0
    active = tuple(args.active) if args.active else (0, args.length - 1)
    sprite = SpriteSpec(size=(args.size, args.size), texture_seed=args.seed, trajectory=Trajectory(args.trajectory), active=active)
    cfg = SceneConfig(background=Background(args.background), sprites=[sprite], rng_seed=args.seed, length=args.length)
    video_id = Path(args.out).name
    frames = write_sequence(generate(cfg), args.out, video_id, args.format)
    print(f"✅ {args.length} frames -> {frames}")
    return 0


def do_cluster(args):
    report = cmd_cluster(
        args.runs, args.out, k=args.k, ground_truth=args.ground_truth, k_from_gt=args.k_from_gt,
        elbow=args.elbow, k_range=range(1, args.k_max + 1), seed=args.seed, progress=not args.quiet,
    )
    print(f"✅ k={report.k} ({report.k_source}), inertia {report.result.inertia:.4g} -> {args.out}")
    if report.homogeneity is not None:
        print(f"📊 median homogeneity over {len(report.homogeneity_runs)} seeds: {report.homogeneity:.4f}")
    return 0


def do_compare(args):
    cfg = load_config(args.config, args.overrides, args.profile)
    records = cmd_compare(cfg, args.suite, args.out, args.subset, progress=not args.quiet)
    out = Path(args.out) / "compare.jsonl"
    write_records(out, records)
    for record in records:
        if record["metric"] == "recall" and record["sigma"] == 0.5:
            print(f"📊 {record['variant']}: recall@0.5 = {record['value']:.4f}")
    print(f"✅ comparison -> {out}")
    return 0


def do_dashboard(args):
    run_dir = args.run_dir or os.getenv(RUN_DIR_ENV) or RunSection().output
    app = Path(__file__).parent / "app.py"
    env = dict(os.environ, **{RUN_DIR_ENV: str(run_dir)})
    print(f"🚀 Opening dashboard for {run_dir}")
    return subprocess.call(["streamlit", "run", str(app)], env=env)


COMMANDS = {
    "run": do_run,
    "gaze": lambda args: do_run(args, mode="gaze"),
    "eval": do_eval,
    "synth": do_synth,
    "cluster": do_cluster,
    "compare": do_compare,
    "dashboard": do_dashboard,
}


def main(argv=None):
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except LocalizerError as e:
        print(f"❌ {e}", file=sys.stderr)
        for category, hints in HINTS.items():
            if isinstance(getattr(e, "cause", e), category):
                for hint in hints:
                    print(f"   - {hint}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())

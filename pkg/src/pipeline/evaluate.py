"""Batch evaluation of run directories against ground-truth manifests."""
import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from errors import ConfigError, FormatError, ValidationError
from evaluation.gaze_metrics import GazeGeometry, gaze_aae, gaze_auc
from evaluation.ground_truth import load_ground_truth, load_predicted_tubes
from evaluation.metrics import (
    DEFAULT_SIGMAS,
    auc_curve,
    cluster_to_class_labels,
    curve_area,
    map_at,
    mean_frame_iou,
    recall_by_class,
)
from localization.attention import center_bias_saliency
from pipeline.runner import RECORDS, SALIENCY, find_run_dirs, load_run_info, run_suite
from storage.records import read_records
from storage.stf import iter_tensor_sequence
from synth.suite import load_suite_index

logger = logging.getLogger(__name__)

BASELINES = ("center", "uniform")


@dataclass
class EvalConfig:
    sigmas: tuple = DEFAULT_SIGMAS
    # "gt": class-agnostic, each tube takes its video's gt label; "clusters": from an assignments file
    label_source: str = "gt"
    assignments_path: str = None
    mode: str = "localize"
    geometry: GazeGeometry = field(default_factory=GazeGeometry)
    baselines: list = field(default_factory=list)

    def validate(self):
        problems = []
        if not self.sigmas or any(not 0 < s <= 1 for s in self.sigmas):
            problems.append("overlap thresholds must lie in (0, 1]")
        if list(self.sigmas) != sorted(self.sigmas):
            problems.append("overlap thresholds must be ascending")
        if self.label_source not in ("gt", "clusters"):
            problems.append(f"unknown label source {self.label_source!r}")
        if self.label_source == "clusters" and not self.assignments_path:
            problems.append("label source 'clusters' needs an assignments file")
        if self.mode not in ("localize", "gaze", "all"):
            problems.append(f"unknown evaluation mode {self.mode!r}")
        unknown = [b for b in self.baselines if b not in BASELINES]
        if unknown:
            problems.append(f"unknown gaze baselines: {', '.join(unknown)}")
        if problems:
            raise ConfigError("Invalid evaluation settings:\n" + "\n".join(f"  - {p}" for p in problems))
        return self


def metric(name, sigma, value, **extra):
    return {"metric": name, "sigma": sigma, "value": float(value), **extra}


def load_ground_truth_files(paths):
    gt = []
    for path in paths:
        gt.extend(load_ground_truth(path))
    if not gt:
        raise ValidationError("no ground-truth tubes were found")
    return gt


def check_video_ids(predicted_ids, gt):
    known = {g.video_id for g in gt}
    unknown = sorted(set(predicted_ids) - known)
    if unknown:
        raise ValidationError("predictions for videos missing from the ground truth: " + ", ".join(unknown))


def label_predictions(predicted, gt, cfg: EvalConfig):
    video_labels = {}
    for g in gt:
        video_labels.setdefault(g.video_id, g.label)
    if cfg.label_source == "clusters":
        assignments = {str(r["video"]): int(r["cluster"]) for r in read_records(cfg.assignments_path)}
        video_labels = cluster_to_class_labels(assignments, video_labels)
    for p in predicted:
        p.label = video_labels.get(p.video_id)
    return predicted


def evaluate_localization(predicted, gt, cfg: EvalConfig):
    records = []
    curve = auc_curve(predicted, gt, cfg.sigmas)
    for sigma, value in curve:
        records.append(metric("recall", sigma, value))
    for sigma in cfg.sigmas:
        records.append(metric("mAP", sigma, map_at(predicted, gt, sigma)))
    records.append(metric("auc", None, curve_area(curve)))
    records.append(metric("mean_frame_iou", None, mean_frame_iou(predicted, gt)))
    for sigma in cfg.sigmas:
        for label, value in recall_by_class(predicted, gt, sigma).items():
            records.append(metric("class_recall", sigma, value, label=label))
    return records


def load_gaze_run(run_dir, gt_by_video):
    """Saliency maps, predicted and true points for frames that carry a fixation."""
    run_dir = Path(run_dir)
    info = load_run_info(run_dir)
    video_id = str(info["video"])
    saliency_path = run_dir / SALIENCY
    if not saliency_path.exists():
        raise FormatError(f"{run_dir}: gaze evaluation needs {SALIENCY} (run with mode gaze)")
    truth = gt_by_video.get(video_id, {})
    maps, predicted, fixations = [], [], []
    for record, saliency in zip(read_records(run_dir / RECORDS), iter_tensor_sequence(saliency_path)):
        frame = record["frame"]
        if frame not in truth:
            continue
        maps.append(saliency)
        predicted.append(record["gaze"])
        fixations.append(truth[frame])
    return video_id, maps, predicted, fixations


def evaluate_gaze(run_dirs, gt, cfg: EvalConfig):
    gt_by_video = {}
    for g in gt:
        if g.gaze:
            gt_by_video.setdefault(g.video_id, {}).update(g.gaze)
    maps, predicted, fixations = [], [], []
    for run_dir in run_dirs:
        _, m, p, f = load_gaze_run(run_dir, gt_by_video)
        maps.extend(m)
        predicted.extend(p)
        fixations.extend(f)
    if not maps:
        raise ValidationError("no evaluated frame carries a ground-truth fixation")
    height, width = maps[0].shape
    geometry = GazeGeometry(cfg.geometry.viewing_distance, cfg.geometry.screen_width, (width, height))
    records = [
        metric("gaze_auc", None, gaze_auc(maps, fixations)),
        metric("gaze_aae", None, gaze_aae(predicted, fixations, geometry)),
    ]
    if "center" in cfg.baselines:
        center = center_bias_saliency((width, height))
        records.append(metric("gaze_auc", None, gaze_auc([center] * len(fixations), fixations), baseline="center"))
        point = np.unravel_index(int(np.argmax(center)), center.shape)[::-1]
        records.append(metric("gaze_aae", None, gaze_aae([point] * len(fixations), fixations, geometry), baseline="center"))
    if "uniform" in cfg.baselines:
        uniform = np.full((height, width), 1.0 / (width * height))
        records.append(metric("gaze_auc", None, gaze_auc([uniform] * len(fixations), fixations), baseline="uniform"))
    return records


def cmd_eval(prediction_paths, ground_truth_paths, cfg: EvalConfig = None):
    """Metric records for the run directories (or tube files) in ``prediction_paths``."""
    cfg = (cfg or EvalConfig()).validate()
    gt = load_ground_truth_files(ground_truth_paths)
    predicted = load_predicted_tubes(prediction_paths)
    run_dirs = [p for p in map(Path, prediction_paths) if p.is_dir()]
    run_dirs = find_run_dirs(run_dirs) if run_dirs else []
    check_video_ids([p.video_id for p in predicted] + [str(load_run_info(d)["video"]) for d in run_dirs], gt)
    records = []
    if cfg.mode in ("localize", "all"):
        label_predictions(predicted, gt, cfg)
        records.extend(evaluate_localization(predicted, gt, cfg))
    if cfg.mode in ("gaze", "all"):
        records.extend(evaluate_gaze(run_dirs, gt, cfg))
    logger.info("evaluated %d predicted tubes against %d ground-truth tubes", len(predicted), len(gt))
    return records


DEFAULT_VARIANTS = {
    "framediff+grid": (["framediff", "grid"], "error"),
    "grid": (["grid"], "error"),
    "framediff": (["framediff"], "error"),
    "activation": (["framediff"], "activation"),
}


def cmd_compare(cfg, index_path, out_dir, subset="localization", variants=None, sigmas=DEFAULT_SIGMAS, progress=False):
    """Run a suite subset once per proposal/attention variant and compare recall."""
    variants = variants or DEFAULT_VARIANTS
    entries = load_suite_index(index_path, subset)
    gt_paths = sorted({e["ground_truth"] for e in entries})
    records = []
    for name, (strategies, attention_source) in variants.items():
        run_cfg = copy.deepcopy(cfg)
        run_cfg.proposals.strategies = list(strategies)
        run_cfg.run.attention_source = attention_source
        variant_dir = Path(out_dir) / name
        run_suite(run_cfg, index_path, subset, variant_dir, progress)
        eval_cfg = EvalConfig(sigmas=tuple(sigmas))
        for record in cmd_eval([variant_dir], gt_paths, eval_cfg):
            if record["metric"] in ("recall", "auc", "mean_frame_iou"):
                records.append({**record, "variant": name})
    return records

"""Pseudo-labelling of finished runs from their pooled video features."""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from clustering.kmeans import elbow_optimal_k, kmeans, median_homogeneity
from errors import FormatError, UsageError
from pipeline.evaluate import load_ground_truth_files
from pipeline.runner import FEATURE, find_run_dirs, load_run_info
from storage.records import write_records
from storage.stf import read_tensor, write_tensor

logger = logging.getLogger(__name__)

ASSIGNMENTS = "assignments.jsonl"
CENTROIDS = "centroids.stf"
DEFAULT_K_RANGE = range(1, 9)


@dataclass
class ClusterReport:
    k: int
    k_source: str
    result: object
    homogeneity: float = None
    homogeneity_runs: list = None


def load_video_features(paths):
    """``(video_ids, features)`` from the run directories under ``paths``."""
    ids, vectors = [], []
    for run_dir in find_run_dirs(paths):
        feature_path = run_dir / FEATURE
        if not feature_path.exists():
            raise FormatError(f"{run_dir} has no {FEATURE}")
        ids.append(str(load_run_info(run_dir)["video"]))
        vectors.append(read_tensor(feature_path).reshape(-1))
    if not vectors:
        raise FormatError("no run directories with video features were found")
    dims = {v.shape for v in vectors}
    if len(dims) != 1:
        raise FormatError(f"video features disagree in size: {sorted(dims)}")
    return ids, np.stack(vectors)


def cmd_cluster(paths, out_dir, k=None, ground_truth=None, k_from_gt=False, elbow=False,
                k_range=DEFAULT_K_RANGE, seed=0, seeds=(0, 1, 2, 3, 4), progress=False):
    chosen = sum(bool(x) for x in (k, k_from_gt, elbow))
    if chosen != 1:
        raise UsageError("choose exactly one of --k, --k-from-gt and --elbow")
    video_ids, features = load_video_features(paths)
    labels = None
    if ground_truth:
        labels = {}
        for g in load_ground_truth_files(ground_truth):
            labels.setdefault(g.video_id, g.label)
    if k_from_gt:
        if labels is None:
            raise UsageError("--k-from-gt needs a ground-truth manifest")
        k = len({labels[v] for v in video_ids if v in labels})
        source = "gt"
    elif elbow:
        k_range = [c for c in k_range if c <= len(video_ids)]
        k = elbow_optimal_k(features, k_range, seed, progress=progress)
        source = "elbow"
    else:
        source = "fixed"
    result = kmeans(features, k, seed, video_ids=video_ids)
    report = ClusterReport(k, source, result)
    if labels is not None:
        subset = {v: labels[v] for v in video_ids if v in labels}
        if len(subset) == len(video_ids):
            report.homogeneity, report.homogeneity_runs = median_homogeneity(features, subset, video_ids, k, seeds)
        else:
            logger.warning("%d videos have no ground-truth label; homogeneity skipped", len(video_ids) - len(subset))

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_records(out_dir / ASSIGNMENTS, ({"video": v, "cluster": c} for v, c in result.assignments.items()))
    write_tensor(out_dir / CENTROIDS, result.centroids.astype(np.float32))
    logger.info("k=%d (%s), inertia %.4g", k, source, result.inertia)
    return report

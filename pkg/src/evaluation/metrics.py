"""Localization metrics: IoU, tube IoU, recall@σ, mAP@σ and threshold curves."""
from collections import Counter, defaultdict

import numpy as np

from errors import ValidationError
from proposals.boxes import box_iou

DEFAULT_SIGMAS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6)


def iou(a, b):
    return box_iou(a, b)


def _boxes(tube):
    return tube if isinstance(tube, dict) else tube.boxes


def tube_iou(tube, gt_tube):
    """Mean per-frame IoU over the union of frames; a frame missing from either side scores 0."""
    a, b = _boxes(tube), _boxes(gt_tube)
    frames = set(a) | set(b)
    if not frames:
        return 0.0
    total = sum(iou(a[f], b[f]) for f in frames if f in a and f in b)
    return total / len(frames)


def _scored_ground_truth(gt):
    scored = [g for g in gt if g.boxes]
    if not scored:
        raise ValidationError("evaluation needs at least one ground-truth tube")
    return scored


def _by_video(predicted):
    grouped = defaultdict(list)
    for p in predicted:
        grouped[p.video_id].append(p)
    return grouped


def recall_at(predicted, gt, sigma):
    """Fraction of ground-truth tubes matched by a prediction with tube IoU ≥ σ."""
    gt = _scored_ground_truth(gt)
    grouped = _by_video(predicted)
    hits = sum(1 for g in gt if any(tube_iou(p, g) >= sigma for p in grouped.get(g.video_id, [])))
    return hits / len(gt)


def recall_by_class(predicted, gt, sigma):
    gt = _scored_ground_truth(gt)
    grouped = _by_video(predicted)
    hits, totals = Counter(), Counter()
    for g in gt:
        totals[g.label] += 1
        if any(tube_iou(p, g) >= sigma for p in grouped.get(g.video_id, [])):
            hits[g.label] += 1
    return {label: hits[label] / totals[label] for label in sorted(totals, key=str)}


def mean_frame_iou(predicted, gt):
    """Average over gt tubes of the best prediction's per-frame IoU on gt frames."""
    gt = _scored_ground_truth(gt)
    grouped = _by_video(predicted)
    scores = []
    for g in gt:
        best = 0.0
        for p in grouped.get(g.video_id, []):
            boxes = p.boxes
            score = sum(iou(boxes[f], b) for f, b in g.boxes.items() if f in boxes) / len(g.boxes)
            best = max(best, score)
        scores.append(best)
    return float(np.mean(scores))


def average_precision(recall, precision):
    """All-points interpolated AP."""
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(mpre.size - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])
    i = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[i + 1] - mrec[i]) * mpre[i + 1]))


def class_average_precision(detections, gts, sigma):
    """AP for one class; each detection claims the best still-unmatched gt in its video."""
    if not gts:
        return 0.0
    ranked = sorted(detections, key=lambda d: -d.confidence)
    matched = set()
    tp = np.zeros(len(ranked))
    for rank, det in enumerate(ranked):
        best, best_index = -1.0, None
        for index, g in enumerate(gts):
            if g.video_id != det.video_id or index in matched:
                continue
            overlap = tube_iou(det, g)
            if overlap > best:
                best, best_index = overlap, index
        if best_index is not None and best >= sigma:
            tp[rank] = 1
            matched.add(best_index)
    if not len(ranked):
        return 0.0
    cum_tp = np.cumsum(tp)
    recall = cum_tp / len(gts)
    precision = cum_tp / np.arange(1, len(ranked) + 1)
    return average_precision(recall, precision)


def map_at(predicted, gt, sigma):
    """Mean over ground-truth classes of AP with tube-IoU matching at σ.

    Each predicted tube must carry ``label``.
    """
    gt = _scored_ground_truth(gt)
    classes = sorted({g.label for g in gt}, key=str)
    aps = []
    for label in classes:
        gts = [g for g in gt if g.label == label]
        dets = [p for p in predicted if p.label == label]
        aps.append(class_average_precision(dets, gts, sigma))
    return float(np.mean(aps))


def auc_curve(predicted, gt, sigmas=DEFAULT_SIGMAS):
    """Recall-vs-overlap series ``[(σ, recall@σ), ...]``."""
    sigmas = list(sigmas)
    if sigmas != sorted(sigmas):
        raise ValidationError("overlap thresholds must be ascending")
    return [(s, recall_at(predicted, gt, s)) for s in sigmas]


def curve_area(points):
    """Trapezoidal area under a (σ, value) series, normalised by its σ span."""
    if len(points) < 2:
        return points[0][1] if points else 0.0
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    return float(np.sum((xs[1:] - xs[:-1]) * (ys[1:] + ys[:-1]) / 2.0) / (xs[-1] - xs[0]))


def temporal_iou(flags, interval, first_frame=0):
    """IoU between the flagged frames and an inclusive [t0, t1] interval."""
    flagged = {first_frame + i for i, f in enumerate(flags) if f}
    t0, t1 = interval
    truth = set(range(t0, t1 + 1))
    union = flagged | truth
    return len(flagged & truth) / len(union) if union else 1.0


def cluster_to_class_labels(assignments, video_labels):
    """Map each cluster to the majority ground-truth label of its videos."""
    votes = defaultdict(Counter)
    for video_id, cluster in assignments.items():
        if video_id in video_labels:
            votes[cluster][video_labels[video_id]] += 1
    mapping = {}
    for cluster, counter in votes.items():
        # most votes; ties go to the label that sorts first
        mapping[cluster] = sorted(counter.items(), key=lambda kv: (-kv[1], str(kv[0])))[0][0]
    return {video_id: mapping.get(cluster) for video_id, cluster in assignments.items()}

"""k-means pseudo-labelling, elbow selection and cluster purity."""
import logging
import statistics
from dataclasses import dataclass, field

import numpy as np
from sklearn.cluster import kmeans_plusplus
from sklearn.metrics import homogeneity_score
from tqdm import tqdm

from errors import ConfigError, ValidationError

logger = logging.getLogger(__name__)


@dataclass
class ClusteringResult:
    k: int
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    video_ids: list = field(default_factory=list)
    inertia_history: list = field(default_factory=list)
    iterations: int = 0

    @property
    def assignments(self):
        return {vid: int(c) for vid, c in zip(self.video_ids, self.labels)}


def _squared_distances(points, centroids):
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def kmeans(features, k, seed=0, max_iter=300, video_ids=None):
    """Lloyd iterations from k-means++ seeds until the assignment is a fixpoint."""
    points = np.asarray(features, dtype=np.float64)
    n = points.shape[0]
    if k < 1 or k > n:
        raise ConfigError(f"k={k} is not in [1, {n}]")
    centroids, _ = kmeans_plusplus(points, n_clusters=k, random_state=seed)
    distances = _squared_distances(points, centroids)
    labels = distances.argmin(axis=1)
    history = [float(distances[np.arange(n), labels].sum())]
    iterations = 0
    for iterations in range(1, max_iter + 1):
        centroids = centroids.copy()
        for j in range(k):
            members = points[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
        for j in range(k):
            if not np.any(labels == j):
                # reseed an empty cluster at the point farthest from its centroid
                own = ((points - centroids[labels]) ** 2).sum(axis=1)
                far = int(own.argmax())
                centroids[j] = points[far]
                labels[far] = j
        distances = _squared_distances(points, centroids)
        new_labels = distances.argmin(axis=1)
        history.append(float(distances[np.arange(n), new_labels].sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    ids = list(video_ids) if video_ids is not None else [str(i) for i in range(n)]
    return ClusteringResult(k, centroids, labels, history[-1], ids, history, iterations)


def elbow_optimal_k(features, k_range, seed=0, min_curvature=0.2, progress=False):
    """k with the largest discrete second difference of the inertia curve.

    A curve whose largest second difference is below ``min_curvature`` of the
    first inertia has no elbow; the smallest interior k is returned.
    """
    ks = sorted(k_range)
    n = len(features)
    if len(ks) < 3 or ks[0] < 1 or ks[-1] > n or ks != list(range(ks[0], ks[-1] + 1)):
        raise ConfigError(f"elbow needs a contiguous range of at least 3 values within [1, {n}]")
    inertias = [kmeans(features, k, seed).inertia for k in tqdm(ks, desc="elbow", disable=not progress)]
    best_k, best_curve = ks[1], -np.inf
    for i in range(1, len(ks) - 1):
        curve = inertias[i - 1] - 2 * inertias[i] + inertias[i + 1]
        if curve > best_curve:
            best_k, best_curve = ks[i], curve
    if inertias[0] > 0 and best_curve < min_curvature * inertias[0]:
        logger.info("no pronounced elbow (max curvature %.4g), using k=%d", best_curve, ks[1])
        return ks[1]
    return best_k


def homogeneity(assignments, ground_truth_labels):
    """1 - H(class | cluster) / H(class) over videos present in both maps."""
    if set(assignments) != set(ground_truth_labels):
        missing = sorted(set(assignments) ^ set(ground_truth_labels))
        raise ValidationError(f"cluster and label ids differ: {', '.join(map(str, missing[:10]))}")
    ids = sorted(assignments)
    return float(homogeneity_score([ground_truth_labels[i] for i in ids], [assignments[i] for i in ids]))


def median_homogeneity(features, labels_by_id, video_ids, k, seeds=(0, 1, 2, 3, 4)):
    scores = []
    for seed in seeds:
        result = kmeans(features, k, seed, video_ids=video_ids)
        scores.append(homogeneity(result.assignments, labels_by_id))
    return statistics.median(scores), scores

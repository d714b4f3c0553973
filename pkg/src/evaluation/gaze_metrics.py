"""Gaze evaluation: saliency ROC area and average angular error."""
from dataclasses import dataclass

import numpy as np
from sklearn.metrics import auc

from errors import ConfigError, ValidationError


@dataclass
class GazeGeometry:
    """Observer centred in front of the screen; distances share one unit (cm)."""
    viewing_distance: float = 60.0
    screen_width: float = 40.0
    resolution: tuple = (64, 64)


def _fixation_auc(saliency, points):
    s = saliency.ravel()
    height, width = saliency.shape
    values = []
    for x, y in points:
        xi, yi = int(round(x)), int(round(y))
        if not (0 <= xi < width and 0 <= yi < height):
            raise ValidationError(f"fixation ({x}, {y}) lies outside a {width}x{height} frame")
        values.append(saliency[yi, xi])
    tol = 1e-12 * max(float(np.abs(s).max()), 1.0)
    values = np.asarray(values)
    tpr, fpr = [0.0], [0.0]
    for threshold in sorted(set(values.tolist()), reverse=True):
        tpr.append(float(np.count_nonzero(values >= threshold - tol)) / values.size)
        fpr.append(float(np.count_nonzero(s >= threshold - tol)) / s.size)
    tpr.append(1.0)
    fpr.append(1.0)
    return auc(fpr, tpr)


def gaze_auc(saliency_maps, fixations):
    """Mean per-frame ROC area; one fixation (x, y) or a list of them per map."""
    saliency_maps = list(saliency_maps)
    fixations = list(fixations)
    if len(saliency_maps) != len(fixations):
        raise ValidationError(f"{len(saliency_maps)} saliency maps but {len(fixations)} fixations")
    if not saliency_maps:
        raise ValidationError("gaze_auc needs at least one saliency map")
    scores = []
    for saliency, points in zip(saliency_maps, fixations):
        if np.ndim(points) == 1:
            points = [points]
        scores.append(_fixation_auc(np.asarray(saliency, dtype=np.float64), points))
    return float(np.mean(scores))


def _rays(points, geometry):
    width_px, height_px = geometry.resolution
    pitch = geometry.screen_width / width_px
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    x = (points[:, 0] - width_px / 2.0) * pitch
    y = (points[:, 1] - height_px / 2.0) * pitch
    return np.stack([x, y, np.full_like(x, geometry.viewing_distance)], axis=1)


def gaze_aae(pred_points, gt_points, geometry):
    """Mean angle in degrees between predicted and true gaze rays."""
    if geometry is None:
        raise ConfigError("gaze_aae needs a viewing geometry")
    a = _rays(pred_points, geometry)
    b = _rays(gt_points, geometry)
    if a.shape != b.shape:
        raise ValidationError(f"{len(a)} predicted gaze points but {len(b)} ground-truth points")
    if not len(a):
        raise ValidationError("gaze_aae needs at least one point pair")
    cross = np.linalg.norm(np.cross(a, b), axis=1)
    dot = (a * b).sum(axis=1)
    return float(np.degrees(np.arctan2(cross, dot)).mean())

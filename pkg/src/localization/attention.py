"""Attention maps built from prediction error, and gaze saliency."""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from numerics.tensor import softmax2d


@dataclass
class AttentionMap:
    alpha: np.ndarray
    frame_index: int = 0

    @property
    def grid_shape(self):
        return self.alpha.shape

    def argmax(self):
        """(row, col) of the largest weight; first index wins ties."""
        return np.unravel_index(int(np.argmax(self.alpha)), self.alpha.shape)

    def argmax_pixel(self, frame_dims):
        """Pixel-space centre (x, y) of the argmax cell."""
        width, height = frame_dims
        rows, cols = self.alpha.shape
        r, c = self.argmax()
        return (c + 0.5) * width / cols, (r + 0.5) * height / rows


def error_attention(error_map, frame_index=0):
    return AttentionMap(softmax2d(error_map), frame_index)


def activation_attention(top_hidden, grid_shape, frame_index=0):
    """Baseline attention from hidden-state magnitude, ignoring prediction error."""
    norms = np.linalg.norm(top_hidden, axis=1).reshape(grid_shape)
    return AttentionMap(softmax2d(norms), frame_index)


def upsample(alpha, frame_dims):
    """Bilinear resampling with grid-cell centres aligned to pixel space."""
    width, height = frame_dims
    rows, cols = alpha.shape
    ys = (np.arange(height) + 0.5) * rows / height - 0.5
    xs = (np.arange(width) + 0.5) * cols / width - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return ndimage.map_coordinates(alpha.astype(np.float64), [yy, xx], order=1, mode="nearest")


def gaze_saliency(attention: AttentionMap, frame_dims):
    """Returns ``(saliency, (x, y))``; saliency is H×W and sums to 1."""
    width, height = frame_dims
    if np.ptp(attention.alpha) == 0:
        saliency = np.full((height, width), 1.0 / (width * height))
        return saliency, (0, 0)
    saliency = upsample(attention.alpha, frame_dims)
    total = saliency.sum()
    if total > 0:
        saliency = saliency / total
    else:
        saliency = np.full_like(saliency, 1.0 / saliency.size)
    y, x = np.unravel_index(int(np.argmax(saliency)), saliency.shape)
    return saliency, (int(x), int(y))


def center_bias_saliency(frame_dims, sigma_fraction=0.25):
    """Centred Gaussian saliency, the usual egocentric gaze baseline."""
    width, height = frame_dims
    ys = np.arange(height) + 0.5 - height / 2.0
    xs = np.arange(width) + 0.5 - width / 2.0
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    sx, sy = sigma_fraction * width, sigma_fraction * height
    saliency = np.exp(-0.5 * ((xx / sx) ** 2 + (yy / sy) ** 2))
    return saliency / saliency.sum()

"""Video-level representations pooled from the top recurrent layer."""
from dataclasses import dataclass

import numpy as np

from errors import ValidationError
from numerics.tensor import DTYPE, check_finite


@dataclass
class VideoFeature:
    video_id: str
    vector: np.ndarray


def _frame_pool(top_hidden, attention):
    weights = attention.alpha.reshape(-1, 1)
    if weights.shape[0] != top_hidden.shape[0]:
        raise ValidationError(
            f"attention has {weights.shape[0]} locations but the hidden state has {top_hidden.shape[0]}"
        )
    return (top_hidden * weights).max(axis=0)


def video_feature(per_frame, video_id=""):
    """Attention-scaled hidden vectors, max-pooled over locations and time."""
    per_frame = list(per_frame)
    if not per_frame:
        raise ValidationError(f"video {video_id!r} has no frames to pool")
    pooled = np.stack([_frame_pool(h, a) for h, a in per_frame]).max(axis=0)
    return VideoFeature(video_id, check_finite(pooled.astype(DTYPE), "video feature"))


class VideoFeatureAccumulator:
    """Running version of ``video_feature`` for the streaming loop."""

    def __init__(self):
        self.vector = None
        self.frames = 0

    def add(self, top_hidden, attention):
        pooled = _frame_pool(top_hidden, attention)
        self.vector = pooled if self.vector is None else np.maximum(self.vector, pooled)
        self.frames += 1

    def result(self, video_id=""):
        if self.vector is None:
            raise ValidationError(f"video {video_id!r} has no frames to pool")
        return VideoFeature(video_id, self.vector.astype(DTYPE))

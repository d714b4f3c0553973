"""Class-agnostic box proposal strategies."""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from errors import ConfigError, FormatError, ValidationError
from proposals.boxes import BoxProposal, ProposalSource, box_from_list, box_iou
from storage.records import iter_records

logger = logging.getLogger(__name__)

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass
class ProposalConfig:
    # grid anchors only when asked for, or when there are no pixels to difference
    strategies: list = field(default_factory=lambda: ["framediff"])
    grid_scales: list = field(default_factory=lambda: [16, 24, 32, 48])
    grid_stride_fraction: float = 0.5
    diff_threshold: int = 25
    min_area: int = 16
    dilation: float = 0.1
    external_path: str = None
    dedup_iou: float = 0.95
    cap: int = 100


def grid_proposals(width, height, scales, stride_fraction):
    """Multi-scale square anchor lattice."""
    if not scales:
        raise ConfigError("grid_proposals needs at least one scale")
    if stride_fraction <= 0:
        raise ConfigError("grid stride fraction must be positive")
    boxes = []
    for scale in scales:
        if scale < 1 or scale > min(width, height):
            raise ConfigError(f"grid scale {scale} does not fit a {width}x{height} frame")
        step = max(1, int(round(scale * stride_fraction)))
        for y in range(0, height - scale + 1, step):
            for x in range(0, width - scale + 1, step):
                boxes.append(BoxProposal(x, y, x + scale, y + scale, ProposalSource.GRID))
    return boxes


def motion_mask(prev_frame, cur_frame, diff_threshold):
    diff = np.abs(cur_frame.astype(np.int16) - prev_frame.astype(np.int16))
    if diff.ndim == 3:
        diff = diff.max(axis=2)
    return diff > diff_threshold


def framediff_proposals(prev_frame, cur_frame, diff_threshold=25, min_area=16, dilation=0.1):
    """Boxes around 8-connected components of the thresholded frame difference."""
    prev_frame = np.asarray(prev_frame)
    cur_frame = np.asarray(cur_frame)
    if prev_frame.shape != cur_frame.shape:
        raise ValidationError(f"frame shapes differ: {prev_frame.shape} vs {cur_frame.shape}")
    height, width = cur_frame.shape[:2]
    labels, count = ndimage.label(motion_mask(prev_frame, cur_frame, diff_threshold), structure=EIGHT_CONNECTED)
    if count == 0:
        return []
    areas = np.bincount(labels.ravel(), minlength=count + 1)[1:]
    boxes = []
    for label, slices in enumerate(ndimage.find_objects(labels), start=1):
        if slices is None or areas[label - 1] < min_area:
            continue
        rows, cols = slices
        x1, x2, y1, y2 = cols.start, cols.stop, rows.start, rows.stop
        pad_x = dilation * (x2 - x1)
        pad_y = dilation * (y2 - y1)
        boxes.append(BoxProposal(
            max(0.0, x1 - pad_x), max(0.0, y1 - pad_y),
            min(float(width), x2 + pad_x), min(float(height), y2 + pad_y),
            ProposalSource.FRAMEDIFF,
        ))
    return boxes


def load_external_proposals(path, width=None, height=None):
    """Read ``{"frame": n, "boxes": [[x1, y1, x2, y2], ...]}`` lines."""
    proposals = {}
    for line_number, record in iter_records(path):
        frame = record.get("frame")
        boxes = record.get("boxes")
        if not isinstance(frame, int) or frame < 0:
            raise FormatError(f"{path}:{line_number}: 'frame' must be a nonnegative integer")
        if not isinstance(boxes, list):
            raise FormatError(f"{path}:{line_number}: 'boxes' must be a list")
        for values in boxes:
            try:
                box = box_from_list(values).validate(width, height)
            except (TypeError, ValueError) as e:
                raise FormatError(f"{path}:{line_number}: bad box {values!r}") from e
            except ValidationError as e:
                raise ValidationError(f"{path}:{line_number}: {e}") from e
            proposals.setdefault(frame, []).append(box)
    return proposals


def combine_proposals(groups, dedup_iou=0.95, cap=100):
    kept = []
    for group in groups:
        for box in group:
            if any(box_iou(box, other) > dedup_iou for other in kept):
                continue
            kept.append(box)
            if len(kept) >= cap:
                return kept
    return kept


class ProposalGenerator:
    """Runs the configured strategies frame by frame.

    Holds the previous frame for the frame-difference strategy.
    """

    def __init__(self, cfg: ProposalConfig, width, height):
        unknown = [s for s in cfg.strategies if s not in {s.value for s in ProposalSource}]
        if unknown:
            raise ConfigError(f"unknown proposal strategies: {', '.join(unknown)}")
        self.cfg = cfg
        self.width = width
        self.height = height
        self.prev_frame = None
        self._grid = None
        self._warned_no_pixels = False
        self._external = {}
        if ProposalSource.EXTERNAL.value in cfg.strategies:
            if not cfg.external_path:
                raise ConfigError("the 'external' strategy needs proposals.external_path")
            self._external = load_external_proposals(cfg.external_path, width, height)

    def grid(self):
        if self._grid is None:
            self._grid = grid_proposals(self.width, self.height, self.cfg.grid_scales, self.cfg.grid_stride_fraction)
        return self._grid

    def motion_only(self):
        return all(s == ProposalSource.FRAMEDIFF.value for s in self.cfg.strategies)

    def propose(self, frame_index, frame=None):
        if frame is None and self.motion_only():
            if not self._warned_no_pixels:
                logger.warning("no pixel frames to difference; falling back to grid anchors")
                self._warned_no_pixels = True
            return combine_proposals([self.grid()], self.cfg.dedup_iou, self.cfg.cap)
        groups = []
        for strategy in self.cfg.strategies:
            if strategy == ProposalSource.GRID.value:
                groups.append(self.grid())
            elif strategy == ProposalSource.FRAMEDIFF.value:
                if frame is not None and self.prev_frame is not None:
                    groups.append(framediff_proposals(
                        self.prev_frame, frame, self.cfg.diff_threshold, self.cfg.min_area, self.cfg.dilation,
                    ))
            else:
                groups.append(self._external.get(frame_index, []))
        if frame is not None:
            self.prev_frame = frame
        return combine_proposals(groups, self.cfg.dedup_iou, self.cfg.cap)

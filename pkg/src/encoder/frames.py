"""Frame and feature sources.

Every source yields ``(frame_index, array)`` exactly once per frame and
counts how many frames it has read, so the single-pass contract of the
streaming loop can be checked.
"""
import re
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from encoder.conv_encoder import FeatureGrid
from errors import FormatError
from storage.stf import MAGIC, iter_tensor_sequence

_NUMBER = re.compile(r"(\d+)")


def read_ppm(path):
    with Image.open(path) as image:
        return np.asarray(image.convert("RGB"), dtype=np.uint8)


def write_ppm(path, frame):
    Image.fromarray(np.asarray(frame, dtype=np.uint8), "RGB").save(path, format="PPM")


def numbered_frames(directory):
    """PPM files of a directory, ordered by the last number in the name."""
    paths = []
    for path in Path(directory).iterdir():
        if path.suffix.lower() not in (".ppm", ".pnm"):
            continue
        numbers = _NUMBER.findall(path.stem)
        if not numbers:
            raise FormatError(f"frame file {path.name} carries no frame number")
        paths.append((int(numbers[-1]), path))
    return [p for _, p in sorted(paths)]


class FrameSource:
    def __init__(self, path, start=0):
        self.path = Path(path)
        self.start = start
        self.reads = 0

    def __iter__(self):
        raise NotImplementedError


class PpmDirectorySource(FrameSource):
    def __iter__(self):
        for index, path in enumerate(numbered_frames(self.path)):
            if index < self.start:
                continue
            frame = read_ppm(path)
            self.reads += 1
            yield index, frame


class VideoTensorSource(FrameSource):
    """A T×H×W×3 STF1 tensor read one frame at a time."""

    def __iter__(self):
        with open(self.path, "rb") as fh:
            header = fh.read(8)
            if len(header) != 8 or header[:4] != MAGIC:
                raise FormatError(f"{self.path} is not an STF1 file")
            (rank,) = struct.unpack("<I", header[4:])
            if rank != 4:
                raise FormatError(f"{self.path}: video tensor must have rank 4, got {rank}")
            dims = struct.unpack("<4I", fh.read(16))
            t, h, w, c = dims
            if c != 3:
                raise FormatError(f"{self.path}: video tensor must have 3 channels")
            frame_bytes = h * w * c * 4
            fh.seek(self.start * frame_bytes, 1)
            for index in range(self.start, t):
                payload = fh.read(frame_bytes)
                if len(payload) != frame_bytes:
                    raise FormatError(f"{self.path}: truncated at frame {index}")
                values = np.frombuffer(payload, dtype="<f4").reshape(h, w, c)
                self.reads += 1
                yield index, np.clip(np.rint(values), 0, 255).astype(np.uint8)


class FeatureSequenceSource(FrameSource):
    """Precomputed feature grids; bypasses the encoder."""

    def __iter__(self):
        for grid in load_feature_sequence(self.path, self.start):
            self.reads += 1
            yield grid.frame_index, grid


def load_feature_sequence(path, start=0):
    """Yield FeatureGrids from an STF1 sequence, checking dims stay fixed.

    Grids before ``start`` are skipped by header without being decoded.
    """
    dims = None
    for index, array in enumerate(iter_tensor_sequence(path, start), start=start):
        if array.ndim != 3:
            raise FormatError(f"frame {index}: feature grid must be rank 3, got shape {array.shape}")
        if dims is None:
            dims = array.shape
        elif array.shape != dims:
            raise FormatError(f"frame {index}: grid dims {array.shape} differ from {dims}")
        yield FeatureGrid(array, index)


def open_source(path, start=0):
    path = Path(path)
    if path.is_dir():
        return PpmDirectorySource(path, start)
    if not path.exists():
        raise FormatError(f"input {path} does not exist")
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head[:4] != MAGIC:
        raise FormatError(f"{path}: unsupported input (expected a PPM directory or STF1 file)")
    (rank,) = struct.unpack("<I", head[4:8])
    if rank == 4:
        return VideoTensorSource(path, start)
    return FeatureSequenceSource(path, start)

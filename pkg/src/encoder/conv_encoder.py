"""Frozen, seeded convolutional feature encoder.

Stands in for a pretrained backbone: strided convolutions with
orthogonal-ish random kernels keep spatial locality, so a moving object
changes exactly the grid cells whose receptive fields it touches.

The desk layers use even 4x4 kernels so that every cell's receptive field
is centred on the cell's own pixel centre, ((c + 0.5) * 8, (r + 0.5) * 8)
up to half a pixel.
"""
import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from errors import ConfigError, ShapeError
from numerics.tensor import DTYPE, check_finite
from storage.stf import iter_tensor_sequence, write_tensor_sequence

logger = logging.getLogger(__name__)

PIXEL_MEAN = 0.5
PIXEL_STD = 0.25


@dataclass
class FeatureGrid:
    """Per-frame feature tensor, stored row-major as (h_f, w_f, d_f)."""
    values: np.ndarray
    frame_index: int = 0

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def depth(self):
        return self.values.shape[2]

    @property
    def dims(self):
        return self.values.shape


@dataclass
class EncoderConfig:
    input_size: tuple = (64, 64)
    # (kernel, stride, channels) per layer
    conv_layers: list = field(default_factory=lambda: [(4, 2, 16), (4, 2, 32), (4, 2, 32)])
    pooling: list = field(default_factory=lambda: [1, 1, 1])
    grid_size: tuple = (8, 8)
    rng_seed: int = 7
    weights_path: str = None
    bias_std: float = 0.0

    @classmethod
    def full_scale(cls):
        return cls(
            input_size=(224, 224),
            conv_layers=[(3, 2, 64), (3, 2, 128), (3, 2, 512)],
            pooling=[1, 1, 2],
            grid_size=(14, 14),
        )

    def output_size(self):
        h, w = self.input_size
        for (kernel, stride, _), pool in zip(self.conv_layers, self.pooling):
            pad = (kernel - 1) // 2
            h = (h + 2 * pad - kernel) // stride + 1
            w = (w + 2 * pad - kernel) // stride + 1
            h, w = h // pool, w // pool
        return h, w

    @property
    def depth(self):
        return self.conv_layers[-1][2]

    def validate(self):
        problems = []
        if len(self.pooling) != len(self.conv_layers):
            problems.append("encoder.pooling needs one factor per conv layer")
        if not self.conv_layers:
            problems.append("encoder.conv_layers is empty")
        for kernel, stride, channels in self.conv_layers:
            if min(kernel, stride, channels) < 1:
                problems.append(f"bad conv layer {(kernel, stride, channels)}")
        if not problems and tuple(self.output_size()) != tuple(self.grid_size):
            problems.append(
                f"encoder produces a {self.output_size()} grid but grid_size is {tuple(self.grid_size)}"
            )
        if problems:
            raise ConfigError("\n".join(problems))


def receptive_field(cfg):
    """(size, jump, start) of an output cell in input pixels.

    Cell (r, c) sees rows ``start + r*jump .. start + r*jump + size - 1``.
    """
    size, jump, start = 1, 1, 0.0
    for (kernel, stride, _), pool in zip(cfg.conv_layers, cfg.pooling):
        pad = (kernel - 1) // 2
        size += (kernel - 1) * jump
        start -= pad * jump
        jump *= stride
        if pool > 1:
            size += (pool - 1) * jump
            jump *= pool
    return size, jump, int(start)


def _orthogonal_kernel(rng, kernel, c_in, c_out, dtype):
    fan_in = kernel * kernel * c_in
    gauss = rng.standard_normal((max(fan_in, c_out), min(fan_in, c_out)))
    q, r = np.linalg.qr(gauss)
    q = q * np.sign(np.diag(r))
    matrix = q if fan_in >= c_out else q.T
    return matrix.reshape(kernel, kernel, c_in, c_out).astype(dtype)


class ConvEncoder:
    def __init__(self, cfg: EncoderConfig):
        cfg.validate()
        self.cfg = cfg
        if cfg.weights_path:
            self.kernels, self.biases, self.feature_mean, self.feature_std = load_weights(cfg.weights_path, cfg)
            logger.info("loaded encoder weights from %s", cfg.weights_path)
        else:
            self._init_weights()

    def _init_weights(self):
        rng = np.random.default_rng(self.cfg.rng_seed)
        self.kernels, self.biases = [], []
        c_in = 3
        for kernel, _, channels in self.cfg.conv_layers:
            self.kernels.append(_orthogonal_kernel(rng, kernel, c_in, channels, DTYPE))
            self.biases.append((rng.standard_normal(channels) * self.cfg.bias_std).astype(DTYPE))
            c_in = channels
        # fixed per-channel standardization measured once on a seeded calibration image
        h, w = self.cfg.input_size
        calibration = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        raw = self._forward(calibration)
        self.feature_mean = raw.mean(axis=(0, 1)).astype(DTYPE)
        self.feature_std = np.maximum(raw.std(axis=(0, 1)), 1e-3).astype(DTYPE)

    def _forward(self, frame):
        x = (frame.astype(DTYPE) / 255.0 - PIXEL_MEAN) / PIXEL_STD
        last = len(self.kernels) - 1
        for n, ((kernel, stride, _), pool) in enumerate(zip(self.cfg.conv_layers, self.cfg.pooling)):
            pad = (kernel - 1) // 2
            padded = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
            windows = sliding_window_view(padded, (kernel, kernel), axis=(0, 1))[::stride, ::stride]
            # windows: (h, w, c, ki, kj); kernels: (ki, kj, c, out)
            x = np.tensordot(windows, self.kernels[n], axes=([2, 3, 4], [2, 0, 1])) + self.biases[n]
            if n != last:
                x = np.maximum(x, 0)
            if pool > 1:
                h, w, c = x.shape
                x = x[: h - h % pool, : w - w % pool]
                x = x.reshape(h // pool, pool, w // pool, pool, c).max(axis=(1, 3))
        return x.astype(DTYPE)

    def encode_frame(self, frame, frame_index=0):
        frame = np.asarray(frame)
        expected = (*self.cfg.input_size, 3)
        if frame.shape != expected:
            raise ShapeError(f"frame must be {expected}, got {frame.shape}")
        values = (self._forward(frame) - self.feature_mean) / self.feature_std
        return FeatureGrid(check_finite(values.astype(DTYPE), "encoder output"), frame_index)

    def checksum(self):
        digest = hashlib.sha256()
        for array in (*self.kernels, *self.biases, self.feature_mean, self.feature_std):
            digest.update(np.ascontiguousarray(array).tobytes())
        return digest.hexdigest()


def encode_frame(frame, cfg, encoder=None):
    return (encoder or ConvEncoder(cfg)).encode_frame(frame)


def save_weights(encoder, path):
    arrays = [*encoder.kernels, *encoder.biases, encoder.feature_mean, encoder.feature_std]
    write_tensor_sequence(path, arrays)


def load_weights(path, cfg):
    arrays = list(iter_tensor_sequence(path))
    n = len(cfg.conv_layers)
    if len(arrays) != 2 * n + 2:
        raise ConfigError(f"{path}: expected {2 * n + 2} tensors for {n} conv layers, found {len(arrays)}")
    kernels, biases = arrays[:n], arrays[n:2 * n]
    c_in = 3
    for (kernel, _, channels), k, b in zip(cfg.conv_layers, kernels, biases):
        if k.shape != (kernel, kernel, c_in, channels) or b.shape != (channels,):
            raise ConfigError(f"{path}: kernel shape {k.shape} does not match layer {(kernel, channels)}")
        c_in = channels
    return kernels, biases, arrays[-2], arrays[-1]

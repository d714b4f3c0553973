"""Deterministic moving-sprite videos with exact ground truth."""
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from encoder.frames import write_ppm
from errors import ConfigError
from evaluation.ground_truth import GroundTruthTube
from proposals.boxes import BoxProposal
from storage.records import write_records
from storage.stf import write_tensor


class Background(str, Enum):
    FLAT = "flat"
    NOISE = "noise-texture"
    SCROLLING = "scrolling-texture"


class Trajectory(str, Enum):
    LINEAR = "linear"
    CIRCULAR = "circular"
    ZIGZAG = "zigzag"
    STATIONARY = "stationary"


@dataclass
class SpriteSpec:
    size: tuple = (16, 16)
    texture_seed: int = 0
    trajectory: Trajectory = Trajectory.LINEAR
    speed: float = 2.0
    active: tuple = (0, 59)
    start: tuple = (10, 10)
    direction: tuple = (1.0, 0.0)
    # circular: radius; zigzag: vertical amplitude
    amplitude: float = 12.0
    period: int = 16


@dataclass
class SceneConfig:
    width: int = 64
    height: int = 64
    background: Background = Background.FLAT
    sprites: list = field(default_factory=list)
    rng_seed: int = 0
    length: int = 60
    background_level: int = 64

    def validate(self):
        problems = []
        for n, sprite in enumerate(self.sprites):
            w, h = sprite.size
            if w > self.width or h > self.height or w < 1 or h < 1:
                problems.append(f"sprite {n} of size {sprite.size} does not fit a {self.width}x{self.height} frame")
            t0, t1 = sprite.active
            if t0 > t1 or t0 < 0:
                problems.append(f"sprite {n} has an empty active interval {sprite.active}")
        if self.length < 1:
            problems.append("scene length must be positive")
        if problems:
            raise ConfigError("\n".join(problems))
        return self


@dataclass
class SceneSequence:
    frames: np.ndarray
    ground_truth: list
    config: SceneConfig


def reflect(value, low, high):
    """Fold ``value`` into [low, high] as if bouncing off both ends."""
    span = high - low
    if span <= 0:
        return low
    m = (value - low) % (2 * span)
    return low + (m if m <= span else 2 * span - m)


def sprite_position(sprite, t, width, height):
    """Top-left corner of ``sprite`` at frame ``t`` (integer pixels)."""
    w, h = sprite.size
    max_x, max_y = width - w, height - h
    k = t - sprite.active[0]
    x0, y0 = sprite.start
    if sprite.trajectory == Trajectory.STATIONARY:
        x, y = x0, y0
    elif sprite.trajectory == Trajectory.LINEAR:
        dx, dy = sprite.direction
        norm = math.hypot(dx, dy) or 1.0
        x = x0 + sprite.speed * k * dx / norm
        y = y0 + sprite.speed * k * dy / norm
    elif sprite.trajectory == Trajectory.CIRCULAR:
        radius = max(sprite.amplitude, 1.0)
        angle = sprite.speed * k / radius
        x = x0 + radius * math.cos(angle) - radius
        y = y0 + radius * math.sin(angle)
    else:
        phase = (k % sprite.period) / sprite.period
        triangle = 4 * phase - 1 if phase < 0.5 else 3 - 4 * phase
        x = x0 + sprite.speed * k
        y = y0 + sprite.amplitude * triangle
    return int(round(reflect(x, 0, max_x))), int(round(reflect(y, 0, max_y)))


def _background(cfg, rng):
    shape = (cfg.height, cfg.width, 3)
    if cfg.background == Background.FLAT:
        return np.full(shape, cfg.background_level, dtype=np.uint8)
    width = cfg.width * 2 if cfg.background == Background.SCROLLING else cfg.width
    noise = rng.integers(-16, 17, size=(cfg.height, width, 3))
    return np.clip(cfg.background_level + noise, 0, 255).astype(np.uint8)


TEXTURE_LEVELS = np.array([0, 112, 184, 255], dtype=np.uint8)


def _texture(sprite):
    """Per-channel random levels, each at least 32 away from any background value.

    A shifted copy differs from the original almost everywhere, so a moving
    sprite changes its whole footprint about as much as its edges.
    """
    rng = np.random.default_rng(sprite.texture_seed)
    w, h = sprite.size
    return rng.choice(TEXTURE_LEVELS, size=(h, w, 3))


def generate(cfg: SceneConfig):
    cfg.validate()
    rng = np.random.default_rng(cfg.rng_seed)
    background = _background(cfg, rng)
    textures = [_texture(s) for s in cfg.sprites]
    frames = np.empty((cfg.length, cfg.height, cfg.width, 3), dtype=np.uint8)
    tubes = [GroundTruthTube(video_id="", label=s.trajectory.value) for s in cfg.sprites]
    gaze = {}
    for t in range(cfg.length):
        if cfg.background == Background.SCROLLING:
            frame = np.roll(background, -t, axis=1)[:, : cfg.width].copy()
        else:
            frame = background.copy()
        placed = []
        for sprite, texture, tube in zip(cfg.sprites, textures, tubes):
            t0, t1 = sprite.active
            if not t0 <= t <= t1:
                continue
            x, y = sprite_position(sprite, t, cfg.width, cfg.height)
            w, h = sprite.size
            placed.append((x, y, w, h, texture))
            tube.boxes[t] = BoxProposal(x, y, x + w, y + h)
            if t not in gaze:
                gaze[t] = (x + w / 2.0, y + h / 2.0)
        # earlier sprites are drawn on top
        for x, y, w, h, texture in reversed(placed):
            frame[y:y + h, x:x + w] = texture
        frames[t] = frame
    if tubes:
        tubes[0].gaze = gaze
    return SceneSequence(frames, tubes, cfg)


def write_sequence(sequence, directory, video_id, frame_format="stf"):
    """Write frames and the ground-truth manifest; returns the frames path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if frame_format == "ppm":
        frames_path = directory / "frames"
        frames_path.mkdir(exist_ok=True)
        for t, frame in enumerate(sequence.frames):
            write_ppm(frames_path / f"frame_{t:05d}.ppm", frame)
    else:
        frames_path = directory / "frames.stf"
        write_tensor(frames_path, sequence.frames.astype(np.float32))
    for tube in sequence.ground_truth:
        tube.video_id = video_id
    write_records(directory / "gt.jsonl", (tube.to_record() for tube in sequence.ground_truth))
    return frames_path

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from encoder.conv_encoder import EncoderConfig  # noqa: E402
from predictor.stack import PredictorConfig  # noqa: E402
from proposals.generators import ProposalConfig  # noqa: E402
from settings.config import RunConfig  # noqa: E402
from synth.generator import SceneConfig, SpriteSpec, Trajectory, generate, write_sequence  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run suite-scale acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tiny_config(output=None, input_path=None):
    """32x32 frames, an 8x8x8 grid and d_h = 8: fast enough for unit tests."""
    cfg = RunConfig(
        encoder=EncoderConfig(input_size=(32, 32), conv_layers=[(4, 2, 8), (4, 2, 8)], pooling=[1, 1], grid_size=(8, 8)),
        predictor=PredictorConfig(hidden_size=8, bptt_window=4),
        proposals=ProposalConfig(grid_scales=[8, 16], min_area=4),
    )
    cfg.run.output = str(output) if output else cfg.run.output
    cfg.run.input = str(input_path) if input_path else None
    return cfg.validate()


@pytest.fixture
def tiny_cfg(tmp_path):
    return tiny_config(tmp_path / "run")


def tiny_scene(length=12, trajectory=Trajectory.LINEAR, seed=5, active=None, sprites=True):
    sprite = SpriteSpec(size=(8, 8), texture_seed=seed, trajectory=trajectory, speed=2.0,
                        active=active or (0, length - 1), start=(4, 6), amplitude=4.0, period=8)
    return SceneConfig(width=32, height=32, sprites=[sprite] if sprites else [], rng_seed=seed, length=length)


@pytest.fixture
def tiny_video(tmp_path):
    """A 12-frame moving-sprite STF1 video plus its ground truth."""
    sequence = generate(tiny_scene())
    frames = write_sequence(sequence, tmp_path / "video", "tiny")
    return frames, tmp_path / "video" / "gt.jsonl"

"""Run configuration: TOML file + environment + command-line overrides."""
import logging
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import tomli
from dotenv import load_dotenv

from encoder.conv_encoder import EncoderConfig
from errors import ConfigError
from localization.energy import EnergyConfig
from predictor.stack import LearningRateConfig, PredictorConfig
from proposals.generators import ProposalConfig

logger = logging.getLogger(__name__)

CONFIG_ENV = "ACTLOC_CONFIG"
RUN_DIR_ENV = "ACTLOC_RUN_DIR"


@dataclass
class TemporalConfig:
    k_std: float = 0.5
    ema_factor: float = 0.99
    warmup: int = 5


@dataclass
class TubeConfig:
    gap_tolerance: int = 5


@dataclass
class GazeConfig:
    viewing_distance: float = 60.0
    screen_width: float = 40.0


@dataclass
class RunSection:
    mode: str = "localize"
    input: str = None
    output: str = "runs/latest"
    video_id: str = None
    # "error" (prediction error) or "activation" (hidden-state baseline)
    attention_source: str = "error"
    save_saliency: bool = False
    checkpoint_every: int = 0
    max_frames: int = 0


@dataclass
class RunConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    learning_rate: LearningRateConfig = field(default_factory=LearningRateConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    proposals: ProposalConfig = field(default_factory=ProposalConfig)
    temporal: TemporalConfig = field(default_factory=TemporalConfig)
    tubes: TubeConfig = field(default_factory=TubeConfig)
    gaze: GazeConfig = field(default_factory=GazeConfig)
    run: RunSection = field(default_factory=RunSection)

    @classmethod
    def desk_scale(cls):
        return cls()

    @classmethod
    def full_scale(cls):
        return cls(
            encoder=EncoderConfig.full_scale(),
            predictor=PredictorConfig(hidden_size=512),
            proposals=ProposalConfig(grid_scales=[56, 112, 224], grid_stride_fraction=0.5, min_area=64),
        )

    @property
    def frame_dims(self):
        height, width = self.encoder.input_size
        return width, height

    def to_dict(self):
        return asdict(self)

    def validate(self):
        problems = []
        for check in (self.encoder.validate, self.energy.validate):
            try:
                check()
            except ConfigError as e:
                problems.extend(str(e).splitlines())
        positive = {
            "predictor.hidden_size": self.predictor.hidden_size,
            "predictor.num_layers": self.predictor.num_layers,
            "predictor.bptt_window": self.predictor.bptt_window,
            "predictor.clip_norm": self.predictor.clip_norm,
            "learning_rate.initial": self.learning_rate.initial,
            "learning_rate.surprise_scale": self.learning_rate.surprise_scale,
            "learning_rate.decay_scale": self.learning_rate.decay_scale,
            "learning_rate.min_lr": self.learning_rate.min_lr,
            "learning_rate.max_lr": self.learning_rate.max_lr,
            "proposals.cap": self.proposals.cap,
            "tubes.gap_tolerance": self.tubes.gap_tolerance,
            "gaze.viewing_distance": self.gaze.viewing_distance,
            "gaze.screen_width": self.gaze.screen_width,
        }
        for name, value in positive.items():
            if not value > 0:
                problems.append(f"{name} must be positive (got {value})")
        if not self.learning_rate.min_lr <= self.learning_rate.initial <= self.learning_rate.max_lr:
            problems.append("learning_rate.initial must lie within [min_lr, max_lr]")
        if self.run.mode not in ("localize", "gaze"):
            problems.append(f"run.mode must be 'localize' or 'gaze' (got {self.run.mode!r})")
        if self.run.attention_source not in ("error", "activation"):
            problems.append(f"run.attention_source must be 'error' or 'activation' (got {self.run.attention_source!r})")
        if problems:
            raise ConfigError("Invalid configuration:\n" + "\n".join(f"  - {p}" for p in problems))
        return self


def _coerce(value, default, name):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise TypeError(f"{name} expects true/false")
        return value
    if isinstance(default, int) and not isinstance(value, bool):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if not isinstance(value, int):
            raise TypeError(f"{name} expects an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError(f"{name} expects a number")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise TypeError(f"{name} expects an array")
        return tuple(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise TypeError(f"{name} expects an array")
        return [tuple(v) if isinstance(v, list) else v for v in value]
    return value


def apply_values(cfg, values, problems, origin):
    for section_name, section_values in values.items():
        section = getattr(cfg, section_name, None)
        if not is_dataclass(section) or not isinstance(section_values, dict):
            problems.append(f"{origin}: unknown section [{section_name}]")
            continue
        known = {f.name for f in fields(section)}
        for key, value in section_values.items():
            if key not in known:
                problems.append(f"{origin}: unknown key {section_name}.{key}")
                continue
            try:
                setattr(section, key, _coerce(value, getattr(section, key), f"{section_name}.{key}"))
            except TypeError as e:
                problems.append(f"{origin}: {e}")


def parse_override(text):
    """``section.key=value`` with a TOML value; bare words become strings."""
    if "=" not in text or "." not in text.split("=", 1)[0]:
        raise ConfigError(f"override {text!r} must look like section.key=value")
    dotted, raw = text.split("=", 1)
    section, key = dotted.strip().split(".", 1)
    try:
        value = tomli.loads(f"v = {raw.strip()}")["v"]
    except tomli.TOMLDecodeError:
        value = raw.strip()
    return {section: {key: value}}


def default_config_path():
    load_dotenv()
    return os.getenv(CONFIG_ENV)


def load_config(path=None, overrides=(), profile="desk"):
    """Build a RunConfig from a profile, a TOML file and overrides (in that order)."""
    cfg = RunConfig.full_scale() if profile == "full" else RunConfig.desk_scale()
    problems = []
    path = path or default_config_path()
    if path:
        try:
            with open(path, "rb") as fh:
                values = tomli.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except tomli.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}")
        apply_values(cfg, values, problems, Path(path).name)
        logger.debug("loaded config %s", path)
    for text in overrides:
        apply_values(cfg, parse_override(text), problems, "override")
    if problems:
        raise ConfigError("Invalid configuration:\n" + "\n".join(f"  - {p}" for p in problems))
    return cfg.validate()

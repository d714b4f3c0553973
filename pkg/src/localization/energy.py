"""Box energies and top-k selection."""
import math
from dataclasses import dataclass

from errors import ConfigError, ValidationError


@dataclass
class EnergyConfig:
    k: int = 10
    w_alpha: float = 0.75
    w_t: float = 0.0

    def validate(self):
        if self.k < 1:
            raise ConfigError("energy.k must be at least 1")
        if not 0.0 <= self.w_alpha <= 1.0:
            raise ConfigError("energy.w_alpha must lie in [0, 1]")
        if self.w_t < 0:
            raise ConfigError("energy.w_t must be nonnegative")
        return self


def _distance(p, q):
    return math.hypot(p[0] - q[0], p[1] - q[1])


def box_energy(box, attention, prev_selected, cfg: EnergyConfig, frame_dims):
    """w_alpha * (distance to error focus) + w_t * (distance to nearest previous box).

    Both distances are measured between centres and divided by the frame
    diagonal. No previous boxes means no temporal cost.
    """
    width, height = frame_dims
    box.validate(width, height)
    diagonal = math.hypot(width, height)
    center = box.center
    phi = _distance(center, attention.argmax_pixel(frame_dims)) / diagonal
    delta = 0.0
    if prev_selected:
        delta = min(_distance(center, prev.center) for prev in prev_selected) / diagonal
    return cfg.w_alpha * phi + cfg.w_t * delta


def select_topk(proposals, attention, prev_selected, cfg: EnergyConfig, frame_dims):
    """Lowest-energy boxes first; ties go to the smaller box, then input order."""
    if not proposals:
        return []
    scored = []
    for index, box in enumerate(proposals):
        try:
            energy = box_energy(box, attention, prev_selected, cfg, frame_dims)
        except ValidationError as e:
            raise ValidationError(f"proposal {index}: {e}") from e
        scored.append((energy, box.area, index, box))
    scored.sort(key=lambda item: item[:3])
    return [(box, energy) for energy, _, _, box in scored[: cfg.k]]

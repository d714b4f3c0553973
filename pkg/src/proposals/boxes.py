from dataclasses import dataclass
from enum import Enum

from errors import ValidationError


class ProposalSource(str, Enum):
    GRID = "grid"
    FRAMEDIFF = "framediff"
    EXTERNAL = "external"


@dataclass(frozen=True)
class BoxProposal:
    """Pixel rectangle, inclusive-exclusive: ``[x1, x2) × [y1, y2)``."""
    x1: float
    y1: float
    x2: float
    y2: float
    source: ProposalSource = ProposalSource.GRID
    score: float = None

    @property
    def center(self):
        return (self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0

    @property
    def area(self):
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_list(self):
        return [self.x1, self.y1, self.x2, self.y2]

    def validate(self, width=None, height=None):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValidationError(f"degenerate box {self.as_list()}")
        if self.x1 < 0 or self.y1 < 0:
            raise ValidationError(f"box {self.as_list()} starts outside the frame")
        if width is not None and self.x2 > width:
            raise ValidationError(f"box {self.as_list()} exceeds frame width {width}")
        if height is not None and self.y2 > height:
            raise ValidationError(f"box {self.as_list()} exceeds frame height {height}")
        return self


def box_from_list(values, source=ProposalSource.EXTERNAL, score=None):
    if len(values) != 4:
        raise ValidationError(f"a box needs 4 coordinates, got {values!r}")
    x1, y1, x2, y2 = (float(v) for v in values)
    return BoxProposal(x1, y1, x2, y2, ProposalSource(source), score)


def box_iou(a, b):
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)

"""Streaming tube linking and temporal action flags."""
from dataclasses import dataclass, field

from predictor.stack import ErrorHistory
from proposals.boxes import box_from_list


@dataclass
class TubeEntry:
    frame_index: int
    box: object
    energy: float
    carried: bool = False


@dataclass
class ActionTube:
    tube_id: int
    entries: list = field(default_factory=list)

    @property
    def start(self):
        return self.entries[0].frame_index

    @property
    def end(self):
        return self.entries[-1].frame_index

    def __len__(self):
        return len(self.entries)

    def mean_energy(self):
        return sum(e.energy for e in self.entries) / len(self.entries)

    def boxes_by_frame(self):
        return {e.frame_index: e.box for e in self.entries}

    def to_record(self, video_id):
        return {
            "video": video_id,
            "tube": self.tube_id,
            "energy": self.mean_energy(),
            "frames": [
                {"frame": e.frame_index, "box": e.box.as_list(), "energy": e.energy, "carried": e.carried}
                for e in self.entries
            ],
        }

    @classmethod
    def from_record(cls, record):
        entries = [
            TubeEntry(int(f["frame"]), box_from_list(f["box"]), float(f.get("energy", 0.0)), bool(f.get("carried", False)))
            for f in record["frames"]
        ]
        return cls(int(record.get("tube", 0)), entries)


class TubeLinker:
    """Extends a primary tube with the rank-1 box of every frame.

    Gaps shorter than ``gap_tolerance`` frames are bridged by holding the
    last box so tube frames stay contiguous; a gap of ``gap_tolerance``
    empty frames closes the tube.
    """

    def __init__(self, gap_tolerance=5):
        self.gap_tolerance = gap_tolerance
        self.active = None
        self.closed = []
        self.gap = 0
        self.next_id = 0

    def extend(self, selected, frame_index):
        if not selected:
            if self.active is not None:
                self.gap += 1
                if self.gap >= self.gap_tolerance:
                    self._close()
            return self.tubes()
        box, energy = selected[0]
        if self.active is None:
            self.active = ActionTube(self.next_id)
            self.next_id += 1
        else:
            last = self.active.entries[-1]
            for missing in range(last.frame_index + 1, frame_index):
                self.active.entries.append(TubeEntry(missing, last.box, last.energy, carried=True))
        self.active.entries.append(TubeEntry(frame_index, box, energy))
        self.gap = 0
        return self.tubes()

    def _close(self):
        self.closed.append(self.active)
        self.active = None
        self.gap = 0

    def finish(self):
        if self.active is not None:
            self._close()
        return self.closed

    def tubes(self):
        return self.closed + ([self.active] if self.active is not None else [])

    def to_state(self, video_id):
        return {
            "gap_tolerance": self.gap_tolerance,
            "gap": self.gap,
            "next_id": self.next_id,
            "active": self.active.to_record(video_id) if self.active is not None else None,
            "closed": [t.to_record(video_id) for t in self.closed],
        }

    @classmethod
    def from_state(cls, state):
        linker = cls(state["gap_tolerance"])
        linker.gap = state["gap"]
        linker.next_id = state["next_id"]
        if state["active"] is not None:
            linker.active = ActionTube.from_record(state["active"])
        linker.closed = [ActionTube.from_record(r) for r in state["closed"]]
        return linker


def extend_tubes(linker, selected, frame_index):
    return linker.extend(selected, frame_index)


class TemporalActionDetector:
    """Flags frames whose error exceeds mean + k·std of its running statistics."""

    def __init__(self, k_std=0.5, ema_factor=0.99, warmup=5):
        self.k_std = k_std
        self.ema_factor = ema_factor
        self.warmup = warmup
        self.history = ErrorHistory()
        self.seen = 0

    def update(self, error):
        active = self.seen >= self.warmup and error > self.history.mean + self.k_std * self.history.std
        self.history = self.history.updated(error, self.ema_factor)
        self.seen += 1
        return bool(active)

    def to_state(self):
        return {"mean": self.history.mean, "var": self.history.var, "count": self.history.count, "seen": self.seen}

    def load_state(self, state):
        self.history = ErrorHistory(state["mean"], state["var"], state["count"])
        self.seen = state["seen"]


def temporal_action_mask(errors, k_std=0.5, ema_factor=0.99, warmup=5):
    detector = TemporalActionDetector(k_std, ema_factor, warmup)
    return [detector.update(e) for e in errors]

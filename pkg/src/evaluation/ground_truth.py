"""Ground-truth and prediction files for evaluation."""
from dataclasses import dataclass, field
from pathlib import Path

from errors import FormatError, ValidationError
from localization.tubes import ActionTube
from proposals.boxes import box_from_list
from storage.records import iter_records


@dataclass
class GroundTruthTube:
    video_id: str
    label: object
    boxes: dict = field(default_factory=dict)
    gaze: dict = field(default_factory=dict)

    def to_record(self):
        return {
            "video": self.video_id,
            "label": self.label,
            "tubes": [{"frame": f, "box": b.as_list()} for f, b in sorted(self.boxes.items())],
            "gaze": [[f, x, y] for f, (x, y) in sorted(self.gaze.items())],
        }


@dataclass
class PredictedTube:
    video_id: str
    tube: ActionTube
    label: object = None

    @property
    def boxes(self):
        return self.tube.boxes_by_frame()

    @property
    def confidence(self):
        # no classifier score exists; lower mean energy ranks higher
        return -self.tube.mean_energy()


def validate_ground_truth_record(record, where="record"):
    problems = []
    if not isinstance(record.get("video"), (str, int)):
        problems.append("'video' must be a string or integer")
    if "label" not in record:
        problems.append("'label' is missing")
    tubes = record.get("tubes", [])
    if not isinstance(tubes, list):
        problems.append("'tubes' must be a list")
        tubes = []
    last = None
    for entry in tubes:
        if not isinstance(entry, dict) or not isinstance(entry.get("frame"), int) or "box" not in entry:
            problems.append(f"bad tube entry {entry!r}")
            continue
        if last is not None and entry["frame"] <= last:
            problems.append(f"tube frames must increase (frame {entry['frame']} after {last})")
        last = entry["frame"]
        try:
            box_from_list(entry["box"]).validate()
        except (ValidationError, TypeError, ValueError) as e:
            problems.append(f"frame {entry['frame']}: {e}")
    gaze = record.get("gaze", [])
    if not isinstance(gaze, list) or any(not isinstance(g, list) or len(g) != 3 for g in gaze):
        problems.append("'gaze' must be a list of [frame, x, y] triples")
    if problems:
        raise ValidationError(f"{where}: " + "; ".join(problems))
    return record


def ground_truth_from_record(record):
    return GroundTruthTube(
        video_id=str(record["video"]),
        label=record["label"],
        boxes={int(e["frame"]): box_from_list(e["box"]) for e in record.get("tubes", [])},
        gaze={int(g[0]): (float(g[1]), float(g[2])) for g in record.get("gaze", [])},
    )


def load_ground_truth(path):
    tubes = []
    for line_number, record in iter_records(path):
        validate_ground_truth_record(record, f"{Path(path).name}:{line_number}")
        tubes.append(ground_truth_from_record(record))
    return tubes


def load_predicted_tubes(paths):
    """Tube records (``tubes.jsonl``) from one or more run directories or files."""
    predicted = []
    for path in paths:
        path = Path(path)
        files = sorted(path.rglob("tubes.jsonl")) if path.is_dir() else [path]
        for file in files:
            for line_number, record in iter_records(file):
                if "video" not in record or "frames" not in record:
                    raise FormatError(f"{file}:{line_number}: tube record needs 'video' and 'frames'")
                if record["frames"]:
                    predicted.append(PredictedTube(str(record["video"]), ActionTube.from_record(record)))
    return predicted

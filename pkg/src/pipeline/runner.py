"""Single-pass streaming loop: encode, propose, predict, score, learn, emit.

Records carry a one-frame delay: the loss for the prediction made at frame
t is known only when frame t+1 arrives, so frame t+1 is the record's
``frame``. A T-frame input yields T-1 records.
"""
import copy
import itertools
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from tqdm import tqdm

from clustering.features import VideoFeatureAccumulator
from encoder.conv_encoder import ConvEncoder, FeatureGrid
from encoder.frames import open_source
from errors import ConfigError, FormatError, FrameError, LocalizerError
from localization.attention import activation_attention, error_attention, gaze_saliency
from localization.energy import select_topk
from localization.tubes import TemporalActionDetector, TubeLinker, extend_tubes
from predictor.stack import Predictor, zoh_loss
from proposals.boxes import box_from_list
from proposals.generators import ProposalGenerator
from storage.checkpoint import load_checkpoint, save_checkpoint
from storage.records import RecordWriter, write_records
from storage.stf import encode_tensor, write_tensor
from synth.suite import load_suite_index

logger = logging.getLogger(__name__)

RECORDS = "records.jsonl"
TUBES = "tubes.jsonl"
FEATURE = "feature.stf"
SALIENCY = "saliency.stf"
CHECKPOINT = "checkpoint"
RUN_INFO = "run.json"


@dataclass
class FrameRecord:
    frame: int
    error: float
    active: bool
    boxes: list
    gaze: tuple
    alpha: np.ndarray = field(default=None, repr=False)
    saliency: np.ndarray = field(default=None, repr=False)

    def to_record(self):
        return {
            "frame": self.frame,
            "E": self.error,
            "active": self.active,
            "boxes": [[*box.as_list(), float(energy)] for box, energy in self.boxes],
            "gaze": [int(self.gaze[0]), int(self.gaze[1])],
        }


@dataclass
class RunSummary:
    video_id: str
    output_dir: Path
    frames_read: int = 0
    records: int = 0
    tubes: int = 0
    peak_nbytes: int = 0
    resumed_at: int = None


class StreamProcessor:
    """Per-stream state. ``step`` consumes one frame (or feature grid)."""

    def __init__(self, cfg, video_id=""):
        self.cfg = cfg
        self.video_id = video_id
        self.frame_dims = cfg.frame_dims
        self.encoder = ConvEncoder(cfg.encoder)
        width, height = self.frame_dims
        self.proposer = ProposalGenerator(cfg.proposals, width, height)
        self.linker = TubeLinker(cfg.tubes.gap_tolerance)
        self.detector = TemporalActionDetector(cfg.temporal.k_std, cfg.temporal.ema_factor, cfg.temporal.warmup)
        self.accumulator = VideoFeatureAccumulator()
        self.predictor = None
        self.prev_grid = None
        self.prev_selected = []
        self.next_frame = 0
        self.peak_nbytes = 0

    def encode(self, frame_index, item):
        if isinstance(item, FeatureGrid):
            return item, None
        return self.encoder.encode_frame(item, frame_index), item

    def step(self, frame_index, item):
        grid, frame = self.encode(frame_index, item)
        proposals = self.proposer.propose(frame_index, frame)
        if self.predictor is None:
            self.predictor = Predictor.create(grid.dims, self.cfg.predictor, self.cfg.learning_rate)
        record = None
        if self.predictor.pending is not None:
            record = self._score(frame_index, grid, proposals)
        self.predictor.predict(grid)
        self.prev_grid = grid
        self.next_frame = frame_index + 1
        self.peak_nbytes = max(self.peak_nbytes, self.nbytes())
        return record

    def _score(self, frame_index, grid, proposals):
        outcome = zoh_loss(self.predictor.pending, grid, self.prev_grid)
        top_hidden = self.predictor.top_hidden
        if self.cfg.run.attention_source == "activation":
            attention = activation_attention(top_hidden, grid.dims[:2], frame_index)
        else:
            attention = error_attention(outcome.error_map, frame_index)
        selected = select_topk(proposals, attention, self.prev_selected, self.cfg.energy, self.frame_dims)
        extend_tubes(self.linker, selected, frame_index)
        active = self.detector.update(outcome.error_scalar)
        self.predictor.learn(outcome)
        self.accumulator.add(top_hidden, attention)
        saliency, gaze = gaze_saliency(attention, self.frame_dims)
        self.prev_selected = [box for box, _ in selected]
        return FrameRecord(frame_index, outcome.error_scalar, active, selected, gaze, attention.alpha, saliency)

    def nbytes(self):
        """Bytes held by streaming state; grows with the BPTT window, never with T."""
        total = self.predictor.nbytes() if self.predictor is not None else 0
        if self.prev_grid is not None:
            total += self.prev_grid.values.nbytes
        if self.proposer.prev_frame is not None:
            total += self.proposer.prev_frame.nbytes
        if self.accumulator.vector is not None:
            total += self.accumulator.vector.nbytes
        return total

    def finish(self):
        return self.linker.finish()

    def to_checkpoint(self):
        tensors, extras = self.predictor.to_tensors()
        tensors["stream/prev_grid"] = self.prev_grid.values
        if self.proposer.prev_frame is not None:
            tensors["stream/prev_frame"] = self.proposer.prev_frame
        if self.accumulator.vector is not None:
            tensors["stream/feature"] = self.accumulator.vector
        extras.update({
            "video_id": self.video_id,
            "next_frame": self.next_frame,
            "prev_grid_frame": self.prev_grid.frame_index,
            "prev_selected": [box.as_list() for box in self.prev_selected],
            "linker": self.linker.to_state(self.video_id),
            "detector": self.detector.to_state(),
            "feature_frames": self.accumulator.frames,
            "encoder_checksum": self.encoder.checksum(),
            "peak_nbytes": self.peak_nbytes,
        })
        return tensors, extras

    def restore(self, tensors, extras):
        if extras.get("encoder_checksum") != self.encoder.checksum():
            raise ConfigError("checkpoint was written with different encoder weights")
        self.predictor = Predictor.from_tensors(tensors, extras, self.cfg.predictor, self.cfg.learning_rate)
        self.prev_grid = FeatureGrid(tensors["stream/prev_grid"], int(extras["prev_grid_frame"]))
        if "stream/prev_frame" in tensors:
            self.proposer.prev_frame = tensors["stream/prev_frame"].astype(np.uint8)
        if "stream/feature" in tensors:
            self.accumulator.vector = tensors["stream/feature"]
        self.accumulator.frames = int(extras["feature_frames"])
        self.prev_selected = [box_from_list(b) for b in extras["prev_selected"]]
        self.linker = TubeLinker.from_state(extras["linker"])
        self.detector.load_state(extras["detector"])
        self.next_frame = int(extras["next_frame"])
        self.peak_nbytes = int(extras.get("peak_nbytes", 0))


def _truncate(path, size):
    if path.exists():
        os.truncate(path, size)


def _write_checkpoint(processor, out_dir, records_path, saliency_path):
    tensors, extras = processor.to_checkpoint()
    extras["records_bytes"] = records_path.stat().st_size
    extras["saliency_bytes"] = saliency_path.stat().st_size if saliency_path.exists() else 0
    save_checkpoint(out_dir / CHECKPOINT, tensors, extras)
    logger.debug("checkpoint at frame %d", processor.next_frame)


def cmd_run(cfg, resume=False, progress=False):
    """Stream one input through the engine into ``cfg.run.output``."""
    if not cfg.run.input:
        raise ConfigError("run.input is not set")
    input_path = Path(cfg.run.input)
    if not input_path.exists():
        raise ConfigError(f"input {input_path} does not exist")
    out_dir = Path(cfg.run.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    video_id = cfg.run.video_id or input_path.stem
    save_saliency = cfg.run.save_saliency or cfg.run.mode == "gaze"
    records_path = out_dir / RECORDS
    saliency_path = out_dir / SALIENCY

    processor = StreamProcessor(cfg, video_id)
    summary = RunSummary(video_id, out_dir)
    if resume:
        tensors, extras = load_checkpoint(out_dir / CHECKPOINT)
        if extras.get("video_id") != video_id:
            raise ConfigError(f"checkpoint belongs to video {extras.get('video_id')!r}, not {video_id!r}")
        processor.restore(tensors, extras)
        # drop anything written after the checkpoint
        _truncate(records_path, int(extras["records_bytes"]))
        _truncate(saliency_path, int(extras["saliency_bytes"]))
        summary.resumed_at = processor.next_frame
        logger.info("resuming %s at frame %d", video_id, processor.next_frame)
    elif saliency_path.exists():
        saliency_path.unlink()

    source = open_source(input_path, start=processor.next_frame)
    frames = iter(source)
    if cfg.run.max_frames:
        frames = itertools.islice(frames, max(cfg.run.max_frames - processor.next_frame, 0))
    saliency_fh = open(saliency_path, "ab") if save_saliency else None
    try:
        with RecordWriter(records_path, append=resume) as writer:
            for frame_index, item in tqdm(frames, desc=video_id, disable=not progress, leave=False):
                try:
                    record = processor.step(frame_index, item)
                except FrameError:
                    raise
                except LocalizerError as e:
                    raise FrameError(frame_index, e) from e
                if record is not None:
                    writer.write(record.to_record())
                    if saliency_fh is not None:
                        saliency_fh.write(encode_tensor(record.saliency.astype(np.float32)))
                every = cfg.run.checkpoint_every
                if every and processor.next_frame % every == 0:
                    writer.flush()
                    if saliency_fh is not None:
                        saliency_fh.flush()
                    _write_checkpoint(processor, out_dir, records_path, saliency_path)
            writer.flush()
            if saliency_fh is not None:
                saliency_fh.flush()
            if processor.predictor is None:
                raise FormatError(f"{input_path} holds no frames")
            _write_checkpoint(processor, out_dir, records_path, saliency_path)
    finally:
        if saliency_fh is not None:
            saliency_fh.close()

    tubes = processor.finish()
    write_records(out_dir / TUBES, (t.to_record(video_id) for t in tubes))
    if processor.accumulator.vector is not None:
        write_tensor(out_dir / FEATURE, processor.accumulator.result(video_id).vector)
    else:
        logger.warning("%s: a single frame gives no video feature", video_id)

    summary.frames_read = source.reads
    with open(records_path, encoding="utf-8") as fh:
        summary.records = sum(1 for line in fh if line.strip())
    summary.tubes = len(tubes)
    summary.peak_nbytes = processor.peak_nbytes
    write_run_info(out_dir, summary, cfg)
    logger.info("%s: %d frames read, %d records, %d tubes", video_id, summary.frames_read, summary.records, summary.tubes)
    return summary


def run_suite(cfg, index_path, subset=None, out_dir=None, progress=False):
    """Run every sequence of a suite (or one subset) into ``out_dir/<id>/``."""
    entries = load_suite_index(index_path, subset)
    if not entries:
        raise ConfigError(f"{index_path} lists no sequences" + (f" in subset {subset!r}" if subset else ""))
    out_dir = Path(out_dir or cfg.run.output)
    summaries = []
    for entry in tqdm(entries, desc=subset or "suite", disable=not progress):
        run_cfg = copy.deepcopy(cfg)
        run_cfg.run.input = entry["frames"]
        run_cfg.run.video_id = entry["id"]
        run_cfg.run.output = str(out_dir / entry["id"])
        summaries.append(cmd_run(run_cfg))
    return summaries


def write_run_info(out_dir, summary, cfg):
    info = {
        "video": summary.video_id,
        "frames_read": summary.frames_read,
        "records": summary.records,
        "tubes": summary.tubes,
        "peak_nbytes": summary.peak_nbytes,
        "resumed_at": summary.resumed_at,
        "config": cfg.to_dict(),
    }
    (Path(out_dir) / RUN_INFO).write_text(json.dumps(info, indent=2), encoding="utf-8")


def load_run_info(run_dir):
    path = Path(run_dir) / RUN_INFO
    if not path.exists():
        raise FormatError(f"{run_dir} is not a run directory (no {RUN_INFO})")
    return json.loads(path.read_text(encoding="utf-8"))


def find_run_dirs(paths):
    """Run directories under ``paths``, sorted; a path may itself be one."""
    found = []
    for path in paths:
        path = Path(path)
        if (path / RUN_INFO).exists():
            found.append(path)
        elif path.is_dir():
            found.extend(sorted(p.parent for p in path.rglob(RUN_INFO)))
        else:
            raise FormatError(f"{path} is not a directory")
    return found

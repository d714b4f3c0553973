"""The fixed acceptance corpus."""
import logging
from pathlib import Path

from tqdm import tqdm

from evaluation.ground_truth import validate_ground_truth_record
from storage.records import read_records, write_records
from synth.generator import Background, SceneConfig, SpriteSpec, Trajectory, generate, write_sequence

logger = logging.getLogger(__name__)

SUITE_VERSION = 2
LENGTH = 60
CLASSES = (Trajectory.LINEAR, Trajectory.CIRCULAR, Trajectory.ZIGZAG)
SPRITE_SIZE = 24
# every clustering video wears the same texture; only the motion tells classes apart
CLUSTER_TEXTURE = 77
CLUSTER_SPRITE_SIZE = 16


def _sprite(trajectory, seed, active=(0, LENGTH - 1), size=SPRITE_SIZE):
    # start positions and headings vary with the seed but stay reproducible
    start = (8 + (seed * 7) % 24, 8 + (seed * 11) % 24)
    direction = ((1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (-1.0, 0.5))[seed % 4]
    # zigzag climbs amplitude * 4 / period = 2 px a frame, the same as its forward speed
    return SpriteSpec(
        size=(size, size), texture_seed=seed, trajectory=trajectory,
        speed=2.0, active=active, start=start, direction=direction,
        amplitude=12.0, period=24,
    )


def _cluster_sprite(trajectory, n):
    """Grid-aligned starts and one motion profile per class."""
    common = dict(size=(CLUSTER_SPRITE_SIZE, CLUSTER_SPRITE_SIZE), texture_seed=CLUSTER_TEXTURE,
                  trajectory=trajectory, active=(0, LENGTH - 1))
    if trajectory == Trajectory.LINEAR:
        return SpriteSpec(**common, speed=3.0, direction=(1.0, 0.0), start=(8 * (n % 7), 8 + 8 * (n % 5)))
    if trajectory == Trajectory.ZIGZAG:
        return SpriteSpec(**common, speed=1.0, amplitude=12.0, period=12, start=(8 * (n % 5), (16, 24, 32)[n % 3]))
    return SpriteSpec(**common, speed=2.0, amplitude=12.0, start=((24, 32, 40, 48)[n % 4], (16, 24, 32)[n % 3]))


def localization_scenes():
    scenes = []
    for n in range(20):
        seed = 1000 + n
        trajectory = CLASSES[n % 3]
        background = Background.FLAT if n % 2 == 0 else Background.NOISE
        scenes.append((f"loc_{n:02d}", SceneConfig(background=background, sprites=[_sprite(trajectory, seed)], rng_seed=seed, length=LENGTH)))
    return scenes


def clustering_scenes():
    scenes = []
    for c, trajectory in enumerate(CLASSES):
        for n in range(10):
            seed = 2000 + 10 * c + n
            scenes.append((f"clu_{trajectory.value}_{n:02d}", SceneConfig(sprites=[_cluster_sprite(trajectory, n)], rng_seed=seed, length=LENGTH)))
    return scenes


def gaze_scenes():
    scenes = []
    for n in range(10):
        seed = 3000 + n
        sprites = [_sprite(CLASSES[n % 3], seed)]
        if n % 2:
            # a smaller stationary distractor; gaze follows the leading sprite
            sprites.append(SpriteSpec(size=(8, 8), texture_seed=seed + 500, trajectory=Trajectory.STATIONARY,
                                      active=(0, LENGTH - 1), start=(48, 48)))
        background = Background.FLAT if n < 5 else Background.NOISE
        scenes.append((f"gaze_{n:02d}", SceneConfig(background=background, sprites=sprites, rng_seed=seed, length=LENGTH)))
    return scenes


def temporal_scenes(count=20, interval=(20, 40)):
    """Sequences whose single actor exists only inside ``interval``."""
    scenes = []
    for n in range(count):
        seed = 4000 + n
        background = Background.FLAT if n % 2 == 0 else Background.NOISE
        sprite = _sprite(CLASSES[n % 3], seed, active=interval)
        scenes.append((f"tmp_{n:02d}", SceneConfig(background=background, sprites=[sprite], rng_seed=seed, length=LENGTH)))
    return scenes


SUBSETS = {
    "localization": localization_scenes,
    "clustering": clustering_scenes,
    "gaze": gaze_scenes,
}


def make_benchmark_suite(out_dir, frame_format="stf", progress=False):
    """Write every subset plus ``index.jsonl``; returns the index records."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = []
    for subset, scenes in SUBSETS.items():
        subset_dir = out_dir / subset
        gt_records = []
        for video_id, cfg in tqdm(scenes(), desc=subset, disable=not progress):
            sequence = generate(cfg)
            frames_path = write_sequence(sequence, subset_dir / video_id, video_id, frame_format)
            records = [validate_ground_truth_record(t.to_record(), video_id) for t in sequence.ground_truth]
            gt_records.extend(records)
            index.append({
                "id": video_id,
                "subset": subset,
                "seed": cfg.rng_seed,
                "label": cfg.sprites[0].trajectory.value,
                "frames": str(frames_path.relative_to(out_dir)),
                "ground_truth": str((subset_dir / video_id / "gt.jsonl").relative_to(out_dir)),
                "version": SUITE_VERSION,
            })
        write_records(subset_dir / "ground_truth.jsonl", gt_records)
    write_records(out_dir / "index.jsonl", index)
    logger.info("wrote %d sequences to %s", len(index), out_dir)
    return index


def load_suite_index(path, subset=None):
    path = Path(path)
    root = path.parent
    entries = []
    for record in read_records(path):
        if subset and record["subset"] != subset:
            continue
        record = dict(record)
        record["frames"] = str(root / record["frames"])
        record["ground_truth"] = str(root / record["ground_truth"])
        entries.append(record)
    return entries

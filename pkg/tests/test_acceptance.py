"""Suite-scale checks on the synthetic benchmark. Run with ``pytest --runslow``."""
import numpy as np
import pytest

from clustering.kmeans import elbow_optimal_k, median_homogeneity
from evaluation.gaze_metrics import gaze_auc
from evaluation.ground_truth import PredictedTube
from evaluation.metrics import recall_at, temporal_iou
from pipeline.runner import StreamProcessor
from settings.config import RunConfig
from storage.records import read_records
from synth.generator import SceneConfig, SpriteSpec, Trajectory, generate
from synth.suite import clustering_scenes, gaze_scenes, localization_scenes, make_benchmark_suite, temporal_scenes

pytestmark = pytest.mark.slow

WARMUP = 10


def stream(cfg, video_id, sequence):
    processor = StreamProcessor(cfg, video_id)
    records = [processor.step(t, frame) for t, frame in enumerate(sequence.frames)]
    return processor, [r for r in records if r is not None]


def inside(point, box):
    x, y = point
    return box.x1 <= x < box.x2 and box.y1 <= y < box.y2


def test_localization_suite():
    cfg = RunConfig()
    hits = total = 0
    predicted, gt = [], []
    for video_id, scene in localization_scenes():
        sequence = generate(scene)
        truth = sequence.ground_truth[0]
        truth.video_id = video_id
        gt.append(truth)
        processor, records = stream(cfg, video_id, sequence)
        for record in records:
            alpha = record.alpha
            if record.frame < WARMUP or record.frame not in truth.boxes:
                continue
            rows, cols = alpha.shape
            r, c = np.unravel_index(int(np.argmax(alpha)), alpha.shape)
            centre = ((c + 0.5) * scene.width / cols, (r + 0.5) * scene.height / rows)
            hits += inside(centre, truth.boxes[record.frame])
            total += 1
        predicted.extend(PredictedTube(video_id, tube) for tube in processor.finish())
    assert hits / total >= 0.8
    assert recall_at(predicted, gt, 0.5) >= 0.7


def test_temporal_extent_of_actions():
    cfg = RunConfig()
    good = 0
    for video_id, scene in temporal_scenes():
        _, records = stream(cfg, video_id, generate(scene))
        flags = [r.active for r in records]
        if temporal_iou(flags, (20, 40), first_frame=records[0].frame) >= 0.5:
            good += 1
    assert good >= 15


def test_clustering_suite_finds_three_pure_classes():
    cfg = RunConfig()
    ids, vectors, labels = [], [], {}
    for video_id, scene in clustering_scenes():
        processor, _ = stream(cfg, video_id, generate(scene))
        ids.append(video_id)
        vectors.append(processor.accumulator.result(video_id).vector)
        labels[video_id] = scene.sprites[0].trajectory.value
    features = np.stack(vectors)
    assert elbow_optimal_k(features, range(1, 9)) == 3
    median, _ = median_homogeneity(features, labels, ids, 3)
    assert median == pytest.approx(1.0)


def test_gaze_suite():
    cfg = RunConfig()
    maps, fixations = [], []
    for video_id, scene in gaze_scenes():
        sequence = generate(scene)
        gaze = sequence.ground_truth[0].gaze
        _, records = stream(cfg, video_id, sequence)
        for record in records:
            if record.frame in gaze:
                maps.append(record.saliency)
                fixations.append(gaze[record.frame])
    score = gaze_auc(maps, fixations)
    chance = gaze_auc([np.full_like(maps[0], 1.0 / maps[0].size)] * len(maps), fixations)
    assert chance == pytest.approx(0.5, abs=0.01)
    assert score >= 0.85
    assert score >= chance + 0.3


def test_state_memory_is_flat_over_600_frames():
    cfg = RunConfig()
    sizes = []
    for length in (60, 600):
        sprite = SpriteSpec(trajectory=Trajectory.CIRCULAR, active=(0, length - 1), texture_seed=3)
        processor, _ = stream(cfg, "mem", generate(SceneConfig(sprites=[sprite], length=length)))
        sizes.append(processor.nbytes())
    assert sizes[0] == sizes[1]


def test_every_attention_map_of_a_full_run_is_normalised():
    _, records = stream(RunConfig(), "norm", generate(localization_scenes()[0][1]))
    assert len(records) == 59
    for record in records:
        assert record.alpha.sum() == pytest.approx(1.0, abs=1e-6)


def test_full_scale_profile_runs_ten_frames():
    cfg = RunConfig.full_scale().validate()
    assert (cfg.energy.k, cfg.energy.w_alpha) == (10, 0.75)
    assert (cfg.learning_rate.initial, cfg.learning_rate.surprise_scale, cfg.learning_rate.decay_scale) == (1e-8, 1e-2, 1e-3)
    sprite = SpriteSpec(size=(48, 48), trajectory=Trajectory.LINEAR, speed=6.0, active=(0, 9), start=(40, 80))
    sequence = generate(SceneConfig(width=224, height=224, sprites=[sprite], length=10))
    processor, records = stream(cfg, "full", sequence)
    assert processor.prev_grid.dims == (14, 14, 512)
    assert len(records) == 9
    for record in records:
        assert np.isfinite(record.error) and record.error >= 0
        assert record.alpha.shape == (14, 14)
        assert record.alpha.sum() == pytest.approx(1.0, abs=1e-6)
        assert 1 <= len(record.boxes) <= 10
    assert all(np.all(np.isfinite(a)) for a in processor.predictor.state.param_arrays())


def test_benchmark_suite_on_disk(tmp_path):
    index = make_benchmark_suite(tmp_path / "suite")
    assert len(index) == 60
    assert {e["label"] for e in index if e["subset"] == "clustering"} == {"linear", "circular", "zigzag"}
    assert len(read_records(tmp_path / "suite" / "index.jsonl")) == 60

import numpy as np
import pytest

from errors import ConfigError, FormatError, ValidationError
from proposals.boxes import BoxProposal, ProposalSource, box_iou
from proposals.generators import (
    ProposalConfig,
    ProposalGenerator,
    combine_proposals,
    framediff_proposals,
    grid_proposals,
    load_external_proposals,
)
from synth.generator import SceneConfig, SpriteSpec, Trajectory, generate


def test_full_frame_scale_gives_one_box():
    boxes = grid_proposals(64, 64, [64], 0.5)
    assert [b.as_list() for b in boxes] == [[0, 0, 64, 64]]


def test_grid_count_formula():
    assert len(grid_proposals(64, 64, [32], 0.5)) == 9
    boxes = grid_proposals(64, 48, [16, 24], 0.5)
    expected = sum(((64 - s) // round(s / 2) + 1) * ((48 - s) // round(s / 2) + 1) for s in (16, 24))
    assert len(boxes) == expected


def test_grid_boxes_respect_bounds(rng):
    for _ in range(20):
        w, h = (int(v) for v in rng.integers(8, 80, size=2))
        scales = sorted({int(s) for s in rng.integers(1, min(w, h) + 1, size=3)})
        boxes = grid_proposals(w, h, scales, float(rng.uniform(0.2, 1.0)))
        for box in boxes:
            box.validate(w, h)


def test_grid_is_deterministic():
    assert grid_proposals(64, 64, [16, 32], 0.5) == grid_proposals(64, 64, [16, 32], 0.5)


def test_oversized_scale_is_a_config_error():
    with pytest.raises(ConfigError):
        grid_proposals(32, 32, [48], 0.5)


def test_identical_frames_give_no_boxes(rng):
    frame = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
    assert framediff_proposals(frame, frame.copy()) == []


def test_moved_sprite_box_covers_old_and_new_position():
    sprite = SpriteSpec(size=(12, 12), texture_seed=3, trajectory=Trajectory.LINEAR, speed=4.0, start=(20, 20))
    sequence = generate(SceneConfig(sprites=[sprite], length=2))
    old, new = sequence.ground_truth[0].boxes[0], sequence.ground_truth[0].boxes[1]
    union = BoxProposal(min(old.x1, new.x1), min(old.y1, new.y1), max(old.x2, new.x2), max(old.y2, new.y2))
    boxes = framediff_proposals(sequence.frames[0], sequence.frames[1])
    assert boxes
    assert max(box_iou(b, union) for b in boxes) >= 0.5
    for box in boxes:
        box.validate(64, 64)
        assert box.source == ProposalSource.FRAMEDIFF


def test_two_separated_sprites_give_two_components():
    prev = np.full((64, 64, 3), 64, dtype=np.uint8)
    cur = prev.copy()
    cur[5:13, 5:13] = 220
    cur[40:50, 44:56] = 200
    boxes = framediff_proposals(prev, cur, min_area=16, dilation=0.0)
    assert sorted(b.as_list() for b in boxes) == [[5, 5, 13, 13], [44, 40, 56, 50]]


def test_small_components_are_dropped():
    prev = np.zeros((16, 16, 3), dtype=np.uint8)
    cur = prev.copy()
    cur[2:4, 2:4] = 255
    assert framediff_proposals(prev, cur, min_area=16) == []


def test_external_proposals_load_per_frame(tmp_path):
    path = tmp_path / "ext.jsonl"
    lines = [f'{{"frame": {t}, "boxes": [' + ", ".join(f"[{i}, 0, {i + 10}, 10]" for i in range(10)) + "]}" for t in range(5)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    proposals = load_external_proposals(path, 64, 64)
    assert sorted(proposals) == [0, 1, 2, 3, 4]
    assert sum(len(b) for b in proposals.values()) == 50


def test_external_single_record(tmp_path):
    path = tmp_path / "ext.jsonl"
    path.write_text('{"frame": 0, "boxes": [[0, 0, 10, 10]]}\n', encoding="utf-8")
    proposals = load_external_proposals(path, 64, 64)
    assert [b.as_list() for b in proposals[0]] == [[0, 0, 10, 10]]


def test_external_degenerate_box_is_rejected_with_line(tmp_path):
    path = tmp_path / "ext.jsonl"
    path.write_text('{"frame": 0, "boxes": [[0, 0, 10, 10]]}\n{"frame": 1, "boxes": [[10, 0, 10, 10]]}\n', encoding="utf-8")
    with pytest.raises(ValidationError, match=":2"):
        load_external_proposals(path, 64, 64)


def test_external_malformed_line_is_a_format_error(tmp_path):
    path = tmp_path / "ext.jsonl"
    path.write_text('{"frame": 0, "boxes": [[0, 0, 10, 10]]\n', encoding="utf-8")
    with pytest.raises(FormatError, match=":1"):
        load_external_proposals(path, 64, 64)


def test_combine_dedups_and_caps():
    a = BoxProposal(0, 0, 10, 10)
    near = BoxProposal(0, 0, 10, 10.2)
    b = BoxProposal(20, 20, 30, 30)
    assert combine_proposals([[a], [near, b]], dedup_iou=0.95, cap=100) == [a, b]
    many = [BoxProposal(i, 0, i + 1, 1) for i in range(50)]
    assert len(combine_proposals([many, many], cap=30)) == 30


def test_generator_has_no_motion_boxes_on_a_static_stream():
    generator = ProposalGenerator(ProposalConfig(strategies=["framediff"]), 32, 32)
    frame = np.full((32, 32, 3), 100, dtype=np.uint8)
    assert all(generator.propose(t, frame) == [] for t in range(4))


def test_generator_rejects_unknown_strategy():
    with pytest.raises(ConfigError):
        ProposalGenerator(ProposalConfig(strategies=["ssd"]), 32, 32)


def test_default_strategies_propose_only_motion_boxes():
    generator = ProposalGenerator(ProposalConfig(min_area=4), 32, 32)
    still = np.full((32, 32, 3), 64, dtype=np.uint8)
    moved = still.copy()
    moved[8:16, 8:16] = 255
    assert generator.propose(0, still) == []
    boxes = generator.propose(1, moved)
    assert len(boxes) == 1
    assert boxes[0].source == ProposalSource.FRAMEDIFF


def test_feature_input_falls_back_to_grid_anchors(caplog):
    generator = ProposalGenerator(ProposalConfig(grid_scales=[16]), 32, 32)
    with caplog.at_level("WARNING", logger="proposals.generators"):
        first = generator.propose(0)
        second = generator.propose(1)
    assert first == second
    assert {b.source for b in first} == {ProposalSource.GRID}
    assert len(first) == 9
    assert sum("grid anchors" in r.message for r in caplog.records) == 1

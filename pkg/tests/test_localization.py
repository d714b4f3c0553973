import math

import numpy as np
import pytest

from errors import ConfigError, ValidationError
from localization.attention import (
    AttentionMap,
    activation_attention,
    center_bias_saliency,
    error_attention,
    gaze_saliency,
    upsample,
)
from localization.energy import EnergyConfig, box_energy, select_topk
from localization.tubes import ActionTube, TemporalActionDetector, TubeLinker, extend_tubes, temporal_action_mask
from proposals.boxes import BoxProposal


def test_uniform_errors_give_uniform_attention():
    attention = error_attention(np.full((8, 8), 3.0))
    assert np.allclose(attention.alpha, 1 / 64)


def test_single_hot_error_dominates():
    errors = np.zeros((8, 8))
    errors[2, 5] = 20.0
    attention = error_attention(errors)
    assert attention.alpha[2, 5] > 0.999
    assert attention.argmax() == (2, 5)


def test_attention_sums_to_one(rng):
    for _ in range(10):
        alpha = error_attention(rng.exponential(size=(8, 8)) * 10).alpha
        assert alpha.sum() == pytest.approx(1.0, abs=1e-6)


def test_activation_attention_follows_hidden_norms():
    hidden = np.zeros((4, 3))
    hidden[3] = 10.0
    attention = activation_attention(hidden, (2, 2))
    assert attention.argmax() == (1, 1)
    assert attention.alpha.sum() == pytest.approx(1.0)


def attention_at(row, col, shape=(8, 8)):
    alpha = np.zeros(shape)
    alpha[row, col] = 1.0
    return AttentionMap(alpha)


def test_box_on_the_focus_has_zero_energy():
    attention = attention_at(3, 3)
    box = BoxProposal(20, 20, 36, 36)  # centre (28, 28) = centre of cell (3, 3)
    assert box_energy(box, attention, [], EnergyConfig(), (64, 64)) == 0.0


def test_energy_arithmetic_example():
    attention = attention_at(0, 0, shape=(4, 4))  # cell centre at pixel (8, 8)
    energy = box_energy(BoxProposal(24, 24, 40, 40), attention, [], EnergyConfig(w_alpha=0.75, w_t=0.0), (64, 64))
    expected = 0.75 * math.hypot(24, 24) / math.hypot(64, 64)
    assert energy == pytest.approx(expected)
    assert energy == pytest.approx(0.281, abs=1e-3)


def test_temporal_term_uses_nearest_previous_box():
    attention = attention_at(0, 0, shape=(4, 4))
    box = BoxProposal(0, 0, 16, 16)
    prev = [BoxProposal(48, 48, 64, 64), BoxProposal(16, 0, 32, 16)]
    energy = box_energy(box, attention, prev, EnergyConfig(w_alpha=0.0, w_t=1.0), (64, 64))
    assert energy == pytest.approx(16 / math.hypot(64, 64))


def test_without_temporal_weight_ranking_follows_focus_distance(rng):
    attention = attention_at(5, 2)
    focus = attention.argmax_pixel((64, 64))
    boxes = []
    for _ in range(30):
        x, y = (int(v) for v in rng.integers(0, 48, size=2))
        boxes.append(BoxProposal(x, y, x + 16, y + 16))
    selected = select_topk(boxes, attention, [], EnergyConfig(k=30), (64, 64))
    distances = [math.hypot(b.center[0] - focus[0], b.center[1] - focus[1]) for b, _ in selected]
    assert distances == sorted(distances)


def test_select_returns_all_when_fewer_than_k():
    boxes = [BoxProposal(0, 0, 8, 8), BoxProposal(8, 8, 16, 16), BoxProposal(0, 8, 8, 16)]
    assert len(select_topk(boxes, attention_at(0, 0), [], EnergyConfig(k=10), (64, 64))) == 3
    assert select_topk([], attention_at(0, 0), [], EnergyConfig(), (64, 64)) == []


def test_ties_go_to_smaller_then_earlier_boxes():
    attention = attention_at(3, 3)
    big = BoxProposal(12, 12, 44, 44)
    small_a = BoxProposal(24, 24, 32, 32)
    small_b = BoxProposal(24, 24, 32, 32, score=0.5)
    selected = select_topk([big, small_a, small_b], attention, [], EnergyConfig(), (64, 64))
    assert [b for b, _ in selected] == [small_a, small_b, big]
    assert selected == select_topk([big, small_a, small_b], attention, [], EnergyConfig(), (64, 64))


def test_out_of_frame_proposal_is_rejected():
    with pytest.raises(ValidationError, match="proposal 0"):
        select_topk([BoxProposal(0, 0, 80, 8)], attention_at(0, 0), [], EnergyConfig(), (64, 64))


def test_energy_config_validation():
    with pytest.raises(ConfigError):
        EnergyConfig(w_alpha=1.5).validate()
    with pytest.raises(ConfigError):
        EnergyConfig(k=0).validate()


def _select(frame):
    return [(BoxProposal(frame % 40, 0, frame % 40 + 8, 8), 0.1)]


def test_continuous_selection_builds_one_tube():
    linker = TubeLinker()
    for t in range(30):
        extend_tubes(linker, _select(t), t)
    tubes = linker.finish()
    assert len(tubes) == 1
    assert len(tubes[0]) == 30
    assert (tubes[0].start, tubes[0].end) == (0, 29)


def test_six_frame_gap_closes_the_tube():
    linker = TubeLinker(gap_tolerance=5)
    for t in range(10):
        linker.extend(_select(t), t)
    for t in range(10, 16):
        linker.extend([], t)
    linker.extend(_select(16), 16)
    tubes = linker.finish()
    assert [(tube.start, tube.end) for tube in tubes] == [(0, 9), (16, 16)]
    assert tubes[1].tube_id == 1


def test_short_gaps_are_bridged_contiguously():
    linker = TubeLinker(gap_tolerance=5)
    frames = [0, 1, 2, 6, 7, 11]
    for t in range(12):
        linker.extend(_select(t) if t in frames else [], t)
    (tube,) = linker.finish()
    indices = [e.frame_index for e in tube.entries]
    assert indices == list(range(12))
    assert [e.carried for e in tube.entries].count(True) == 6


def test_tube_records_round_trip():
    linker = TubeLinker()
    for t in range(3):
        linker.extend(_select(t), t)
    record = linker.tubes()[0].to_record("vid")
    tube = ActionTube.from_record(record)
    assert record["video"] == "vid"
    assert [e.frame_index for e in tube.entries] == [0, 1, 2]
    restored = TubeLinker.from_state(linker.to_state("vid"))
    assert restored.to_state("vid") == linker.to_state("vid")


def test_constant_error_has_no_active_frames():
    assert not any(temporal_action_mask([2.0] * 40))


def test_error_step_is_flagged():
    flags = temporal_action_mask([1.0] * 10 + [5.0] + [1.0] * 5)
    assert flags[10]
    assert not any(flags[:10])


def test_detector_waits_for_warmup():
    detector = TemporalActionDetector(warmup=5)
    assert [detector.update(e) for e in (0.0, 10.0, 20.0, 30.0, 40.0)] == [False] * 5
    assert detector.update(1000.0)


def test_one_hot_attention_puts_gaze_on_the_cell():
    saliency, (x, y) = gaze_saliency(attention_at(2, 5), (64, 64))
    assert saliency.shape == (64, 64)
    assert saliency.sum() == pytest.approx(1.0, abs=1e-5)
    assert abs(x - (5 * 8 + 4)) <= 1
    assert abs(y - (2 * 8 + 4)) <= 1


def test_uniform_attention_gives_uniform_saliency():
    saliency, point = gaze_saliency(AttentionMap(np.full((8, 8), 1 / 64)), (64, 48))
    assert saliency.shape == (48, 64)
    assert np.all(saliency == saliency[0, 0])
    assert point == (0, 0)


def test_saliency_sums_to_one(rng):
    attention = error_attention(rng.exponential(size=(8, 8)))
    saliency, _ = gaze_saliency(attention, (64, 64))
    assert saliency.sum() == pytest.approx(1.0, abs=1e-5)


def test_upsample_keeps_cell_values_at_cell_centres():
    alpha = np.arange(4.0).reshape(2, 2)
    up = upsample(alpha, (4, 4))
    assert up.shape == (4, 4)
    assert up[0, 0] == pytest.approx(alpha[0, 0])
    assert up[3, 3] == pytest.approx(alpha[1, 1])


def test_center_bias_peaks_in_the_middle():
    saliency = center_bias_saliency((64, 64))
    assert saliency.sum() == pytest.approx(1.0)
    y, x = np.unravel_index(int(np.argmax(saliency)), saliency.shape)
    assert (x, y) in {(31, 31), (31, 32), (32, 31), (32, 32)}

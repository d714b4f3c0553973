import math

import numpy as np
import pytest

from clustering.features import VideoFeatureAccumulator, video_feature
from clustering.kmeans import elbow_optimal_k, homogeneity, kmeans, median_homogeneity
from errors import ConfigError, ValidationError
from localization.attention import AttentionMap


def one_hot(index, shape=(1, 2)):
    alpha = np.zeros(shape)
    alpha.flat[index] = 1.0
    return AttentionMap(alpha)


def test_one_hot_frame_feature_is_that_hidden_vector():
    hidden = np.array([[1.0, -2.0, 3.0], [4.0, 5.0, -6.0]])
    feature = video_feature([(hidden, one_hot(1))], "v")
    # the other location contributes zeros to the max
    assert feature.vector.tolist() == [4.0, 5.0, 0.0]


def test_repeated_frames_do_not_change_the_feature(rng):
    hidden = rng.standard_normal((4, 3))
    attention = AttentionMap(np.full((2, 2), 0.25))
    once = video_feature([(hidden, attention)]).vector
    twice = video_feature([(hidden, attention), (hidden, attention)]).vector
    assert np.array_equal(once, twice)


def test_two_frame_hand_case():
    frames = [
        (np.array([[1.0, 2.0], [3.0, -1.0]]), AttentionMap(np.array([[0.25, 0.75]]))),
        (np.array([[2.0, 0.0], [1.0, 4.0]]), AttentionMap(np.array([[0.5, 0.5]]))),
    ]
    expected = []
    for d in range(2):
        expected.append(max(alpha * h[loc, d] for h, a in frames for loc, alpha in enumerate(a.alpha.ravel())))
    assert video_feature(frames).vector == pytest.approx(expected)


def test_accumulator_matches_batch_pooling(rng):
    frames = [(rng.standard_normal((4, 3)), AttentionMap(rng.dirichlet(np.ones(4)).reshape(2, 2))) for _ in range(5)]
    acc = VideoFeatureAccumulator()
    for hidden, attention in frames:
        acc.add(hidden, attention)
    assert np.allclose(acc.result("v").vector, video_feature(frames).vector)
    with pytest.raises(ValidationError):
        VideoFeatureAccumulator().result("empty")


def test_mismatched_attention_is_rejected():
    with pytest.raises(ValidationError):
        video_feature([(np.zeros((3, 2)), one_hot(0))])


def test_identical_features_have_zero_inertia():
    result = kmeans(np.ones((6, 3)), 1, seed=0)
    assert result.inertia == 0.0


def blobs(rng, centres, n=10):
    points, labels = [], []
    for label, centre in enumerate(centres):
        points.append(rng.standard_normal((n, len(centre))) + np.asarray(centre, dtype=float))
        labels += [label] * n
    return np.vstack(points), labels


def test_two_blobs_are_recovered(rng):
    points, labels = blobs(rng, [(0.0, 0.0), (20.0, 0.0)])
    ids = [f"v{i}" for i in range(len(points))]
    result = kmeans(points, 2, seed=3, video_ids=ids)
    truth = dict(zip(ids, labels))
    assert homogeneity(result.assignments, truth) == pytest.approx(1.0)
    assert len(set(result.labels[:10])) == 1 and len(set(result.labels[10:])) == 1


def test_lloyd_inertia_never_increases(rng):
    points = rng.standard_normal((60, 4))
    result = kmeans(points, 5, seed=1)
    history = result.inertia_history
    assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))


def test_k_outside_range_is_a_config_error():
    with pytest.raises(ConfigError):
        kmeans(np.zeros((3, 2)), 4)


def test_elbow_finds_three_blobs(rng):
    points, _ = blobs(rng, [(0.0, 0.0), (20.0, 0.0), (0.0, 20.0)])
    assert elbow_optimal_k(points, range(1, 9), seed=0) == 3


def test_single_blob_falls_back_to_smallest_interior_k(rng):
    points = rng.standard_normal((30, 2))
    assert elbow_optimal_k(points, range(1, 9), seed=0) == 2


def test_elbow_needs_a_contiguous_range(rng):
    with pytest.raises(ConfigError):
        elbow_optimal_k(rng.standard_normal((10, 2)), [1, 3, 5])


def test_homogeneity_extremes():
    labels = {"a": "x", "b": "x", "c": "y", "d": "y"}
    assert homogeneity({"a": 0, "b": 0, "c": 1, "d": 1}, labels) == 1.0
    assert homogeneity({"a": 0, "b": 0, "c": 0, "d": 0}, labels) == pytest.approx(0.0)


def test_homogeneity_matches_entropy_by_hand():
    # cluster 0 holds one x and one y; cluster 1 holds two x
    labels = {"a": "x", "b": "y", "c": "x", "d": "x"}
    assignments = {"a": 0, "b": 0, "c": 1, "d": 1}
    p_x, p_y = 3 / 4, 1 / 4
    h_class = -(p_x * math.log(p_x) + p_y * math.log(p_y))
    h_class_given_cluster = 0.5 * math.log(2)
    assert homogeneity(assignments, labels) == pytest.approx(1 - h_class_given_cluster / h_class)


def test_homogeneity_needs_matching_ids():
    with pytest.raises(ValidationError):
        homogeneity({"a": 0}, {"b": "x"})


def test_median_over_seeds(rng):
    points, labels = blobs(rng, [(0.0, 0.0), (30.0, 0.0), (0.0, 30.0)])
    ids = [str(i) for i in range(len(points))]
    median, runs = median_homogeneity(points, dict(zip(ids, labels)), ids, 3)
    assert len(runs) == 5
    assert median == pytest.approx(1.0)

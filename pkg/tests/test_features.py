import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gazex.errors import InvalidInputError, WrongModeError
from gazex.features import (GazeMode, ScenarioContext, Traffic, all_contexts, build_features, context_from_vector,
                            context_vector, distance_features, eye_representation, gaze_width, semantic_encoding)
from gazex.preproc import Label, preprocess_trial


class FakeTrial:
    def __init__(self, eye, head, walk):
        n = len(eye)
        self.t = np.arange(n) * 0.05
        self.eye_yaw = np.asarray(eye, float)
        self.head_yaw = np.asarray(head, float)
        self.walking_dir = np.asarray(walk, float)


def test_orientation_examples():
    pt = FakeTrial([30.0], [20.0], [0.0])
    assert eye_representation(pt, GazeMode.EYE_IN_WALKING)[0, 0] == pytest.approx(30)
    np.testing.assert_allclose(eye_representation(pt, GazeMode.EYE_VISLET)[0],
                               [np.cos(np.radians(30)), np.sin(np.radians(30))])
    np.testing.assert_allclose(eye_representation(pt, GazeMode.EYE_PLUS_HEAD)[0], [20, 10])
    assert eye_representation(pt, GazeMode.NONE).shape == (1, 0)
    with pytest.raises(WrongModeError):
        eye_representation(pt, GazeMode.GAZE_EVENTS)


@given(st.lists(st.floats(-179, 179), min_size=1, max_size=10), st.floats(-90, 90))
def test_eye_in_walking_rotation_invariant(eye, rot):
    from gazex.geometry import wrap_angle

    eye = np.array(eye)
    walk = np.zeros_like(eye) + 10.0
    a = eye_representation(FakeTrial(eye, eye, walk), GazeMode.EYE_IN_WALKING)
    b = eye_representation(FakeTrial(wrap_angle(eye + rot), eye, wrap_angle(walk + rot)), GazeMode.EYE_IN_WALKING)
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_semantic_examples():
    lab = np.array([Label.LEADER, Label.SACCADE, Label.NOISE, Label.GOAL], dtype=np.int8)
    np.testing.assert_array_equal(semantic_encoding(lab, GazeMode.ATTENTION_DISTRIBUTION)[0], [1, 0, 0, 0])
    np.testing.assert_array_equal(semantic_encoding(lab, GazeMode.GAZE_EVENTS)[1], [0, 1, 0])
    np.testing.assert_array_equal(semantic_encoding(lab, GazeMode.ATTENTION_PRESENCE)[2], [0])
    np.testing.assert_array_equal(semantic_encoding(lab, GazeMode.ATTENTION_ON_TRAFFIC)[3], [0, 1])
    with pytest.raises(WrongModeError):
        semantic_encoding(lab, GazeMode.EYE_VISLET)


@given(st.lists(st.sampled_from(list(Label)[:6]), min_size=1, max_size=20))
def test_semantic_rows_sum_to_0_or_1(labels):
    lab = np.array(labels, dtype=np.int8)
    for mode in (GazeMode.GAZE_EVENTS, GazeMode.ATTENTION_PRESENCE, GazeMode.ATTENTION_ON_TRAFFIC,
                 GazeMode.ATTENTION_DISTRIBUTION):
        assert set(semantic_encoding(lab, mode).sum(axis=1)) <= {0.0, 1.0}


def test_context_examples():
    np.testing.assert_array_equal(context_vector(ScenarioContext(1, 0, 90, Traffic.SINGLE)), [1, 0, 0, 1, 0, 1, 0, 0])
    np.testing.assert_array_equal(context_vector(ScenarioContext(0, 1, 45, Traffic.TWO_GAP5)), [0, 1, 1, 0, 0, 0, 0, 1])
    np.testing.assert_array_equal(context_vector(ScenarioContext(1, 1, 135, Traffic.TWO_GAP3)), [1, 1, 0, 0, 1, 0, 1, 0])


def test_context_bijection():
    ctxs = all_contexts()
    assert len(ctxs) == 36
    vecs = {tuple(context_vector(c)) for c in ctxs}
    assert len(vecs) == 36
    assert all(context_from_vector(context_vector(c)) == c for c in ctxs)


def test_context_validation():
    with pytest.raises(InvalidInputError):
        ScenarioContext(2, 0, 90, Traffic.SINGLE)
    with pytest.raises(InvalidInputError):
        ScenarioContext(0, 0, 60, Traffic.SINGLE)


def test_distance_examples():
    ped = np.zeros((1, 2))
    d = distance_features(ped, [np.array([[3.0, 4.0]])])
    np.testing.assert_allclose(d[0], [5, 1, 30, 0])
    d = distance_features(ped, [np.array([[42.0, 0.0]])])
    assert d[0, 0] == 30 and d[0, 1] == 1
    d = distance_features(ped, [np.array([[3.0, 4.0]]), np.array([[1.0, 0.0]])], [[True], [False]])
    np.testing.assert_allclose(d[0], [5, 1, 30, 0])


def test_gaze_mode_parse():
    assert GazeMode.parse("eye-vislet") is GazeMode.EYE_VISLET
    assert GazeMode.parse("EYE_VISLET") is GazeMode.EYE_VISLET
    assert GazeMode.parse(GazeMode.NONE) is GazeMode.NONE
    with pytest.raises(InvalidInputError):
        GazeMode.parse("eye-pupil")


@pytest.mark.parametrize("mode", list(GazeMode))
def test_build_features_widths(small_trials, mode):
    tf = build_features(preprocess_trial(small_trials[0]), mode)
    n = len(small_trials[0].t)
    assert tf.motion.shape == (n, 6)
    assert tf.distance.shape == (n, 4)
    expected = gaze_width(mode) - (1 if mode.is_orientation else 0)
    assert tf.gaze.shape == (n, expected)
    if mode is GazeMode.EYE_VISLET:
        ok = tf.gaze_valid
        np.testing.assert_allclose(np.hypot(*tf.gaze[ok].T), 1, atol=1e-9)

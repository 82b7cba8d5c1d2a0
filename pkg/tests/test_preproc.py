import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazex.errors import InvalidInputError, NoValleyError
from gazex.preproc import (Label, SemanticLabelSeries, SpeedThresholds, TimeSeries, clean_semantic_targets,
                           detect_initiations, detect_saccades, estimate_thresholds, gaussian_smooth,
                           histogram_threshold, interpolate_gaps, preprocess_trial)

L, F, G, E, N = Label.LEADER, Label.FOLLOWER, Label.GOAL, Label.ENVIRONMENT, Label.NONE


def truncated_kernel(sigma=4.0, truncate=4.0):
    r = int(truncate * sigma + 0.5)
    x = np.arange(-r, r + 1)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def test_smooth_constant():
    s = gaussian_smooth(TimeSeries(np.full(50, 3.7)))
    np.testing.assert_allclose(s.values, 3.7, atol=1e-12)


def test_smooth_impulse_matches_hand_kernel():
    x = np.zeros(101)
    x[50] = 1.0
    out = gaussian_smooth(TimeSeries(x)).values
    k = truncated_kernel()
    r = len(k) // 2
    np.testing.assert_allclose(out[50 - r:50 + r + 1], k, atol=1e-12)
    assert out.sum() == pytest.approx(1.0, abs=1e-9)


def test_smooth_ramp_interior_unchanged():
    x = np.linspace(0, 10, 200)
    out = gaussian_smooth(TimeSeries(x)).values
    np.testing.assert_allclose(out[20:-20], x[20:-20], atol=1e-6)


def test_smooth_empty_raises():
    with pytest.raises(InvalidInputError):
        gaussian_smooth(TimeSeries(np.zeros(0)))


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=60))
def test_smooth_preserves_mean(vals):
    x = np.array(vals)
    assert gaussian_smooth(TimeSeries(x)).values.mean() == pytest.approx(x.mean(), abs=1e-6)


def test_interpolate_example():
    v = np.array([9, 9, 0, np.nan, np.nan, np.nan, 4, 9, 9], dtype=float)
    out = interpolate_gaps(TimeSeries(v))
    np.testing.assert_allclose(out.values, [9, 9, 0, 1, 2, 3, 4, 9, 9])
    np.testing.assert_array_equal(out.valid_mask, [1, 0, 0, 1, 1, 1, 0, 0, 1])


def test_interpolate_identity_and_leading_gap():
    v = np.arange(6.0)
    out = interpolate_gaps(TimeSeries(v))
    np.testing.assert_array_equal(out.values, v)
    assert out.valid_mask.all()
    lead = interpolate_gaps(TimeSeries(np.array([np.nan, np.nan, 2, 3, 4, 5, 6.0])))
    assert not lead.valid_mask[:4].any()
    assert np.isnan(lead.values[:2]).all()
    assert lead.valid_mask[4:].all()


@given(st.lists(st.one_of(st.floats(-50, 50), st.just(float("nan"))), min_size=1, max_size=40))
def test_interpolate_never_changes_valid_values(vals):
    v = np.array(vals)
    out = interpolate_gaps(TimeSeries(v))
    ok = np.isfinite(v)
    np.testing.assert_array_equal(out.values[ok], v[ok])


def test_saccade_examples():
    slow = TimeSeries(np.arange(10) * 4.0)
    fast = TimeSeries(np.arange(10) * 6.0)
    assert not detect_saccades(slow).any()
    sac = detect_saccades(fast)
    assert not sac[0] and sac[1:].all()
    assert not detect_saccades(TimeSeries(np.full(10, 33.0))).any()


def test_saccade_across_wrap():
    s = TimeSeries(np.array([178.0, -179.0, -176.0]))
    assert not detect_saccades(s).any()


@given(st.lists(st.floats(-179, 179), min_size=2, max_size=30), st.floats(-90, 90))
def test_saccade_offset_invariant(vals, c):
    from gazex.geometry import wrap_angle

    a = np.array(vals)
    np.testing.assert_array_equal(detect_saccades(TimeSeries(a)), detect_saccades(TimeSeries(wrap_angle(a + c))))


def clean(labels, sacc=None):
    lab = np.array(labels, dtype=np.int8)
    sacc = np.zeros(len(lab), bool) if sacc is None else np.asarray(sacc, bool)
    return clean_semantic_targets(SemanticLabelSeries(lab), sacc).labels


def test_clean_isolated_label():
    np.testing.assert_array_equal(clean([L, L, G, L, L]), [L] * 5)


def test_clean_short_gap_filled():
    np.testing.assert_array_equal(clean([L, L] + [N] * 6 + [L, L]), [L] * 10)


def test_clean_long_gap_becomes_noise():
    out = clean([L, L] + [N] * 8 + [L, L])
    np.testing.assert_array_equal(out[2:10], [Label.NOISE] * 8)


def test_clean_one_frame_run_becomes_noise():
    out = clean([L, L, L, G, E, E, E])
    assert out[3] == Label.NOISE


def test_clean_saccade_frames():
    out = clean([L, L, L, G, G, G], [0, 0, 0, 1, 0, 0])
    assert out[3] == Label.SACCADE


@settings(max_examples=200)
@given(st.lists(st.sampled_from([L, F, G, E, N]), min_size=1, max_size=40),
       st.lists(st.booleans(), min_size=40, max_size=40))
def test_clean_no_short_fixation_runs(labels, sac):
    out = clean(labels, sac[:len(labels)])
    assert not np.isin(out, [N]).any()
    runs = np.split(out, np.flatnonzero(np.diff(out)) + 1)
    for r in runs:
        if r[0] in (L, F, G, E):
            assert len(r) >= 2


def test_histogram_threshold_bimodal(rng):
    s = np.concatenate([rng.normal(0.05, 0.02, 400), rng.normal(1.3, 0.1, 600)])
    th = histogram_threshold(s)
    assert 0.1 < th < 1.2


def test_histogram_threshold_errors():
    with pytest.raises(NoValleyError):
        histogram_threshold(np.full(200, 0.7))
    with pytest.raises(InvalidInputError):
        histogram_threshold(np.array([]))


def test_estimate_thresholds_fallback(rng):
    s = np.concatenate([rng.normal(0.02, 0.02, 400), rng.normal(1.3, 0.1, 600)])
    th = estimate_thresholds(s)
    assert th.backward_threshold == -0.1
    assert 0.1 < th.initiation_threshold < 1.2


def test_initiations_and_backward():
    th = SpeedThresholds(0.5, -0.1)
    v = np.concatenate([np.zeros(5), np.ones(10), np.zeros(5), np.ones(10)])
    init, back = detect_initiations(TimeSeries(v), th)
    assert len(init) == 2 and back == []
    assert init[0] == pytest.approx(0.25)
    assert detect_initiations(TimeSeries(np.zeros(20)), th) == ([], [])
    v = np.concatenate([np.zeros(5), np.full(5, -0.3), np.zeros(5)])
    assert len(detect_initiations(TimeSeries(v), th)[1]) == 1


def test_speed_thresholds_validate():
    with pytest.raises(InvalidInputError):
        SpeedThresholds(0.0)
    with pytest.raises(InvalidInputError):
        SpeedThresholds(0.5, 0.1)


def test_preprocess_trial_shapes(small_trials):
    tr = small_trials[0]
    pt = preprocess_trial(tr)
    n = len(tr.t)
    assert pt.positions.shape == (n, 2)
    assert pt.labels.labels.shape == (n,)
    assert not np.isin(pt.labels.labels, [Label.NONE]).any()

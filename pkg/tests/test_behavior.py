import math

import numpy as np
import pytest

from gazex.behavior import (FACTORS, Gap, compute_trial_metrics, dataset_thresholds, descriptive_table,
                            write_metrics_csv, write_table_csv)
from gazex.dataset import Trial
from gazex.errors import IncompleteTrialError, InvalidInputError
from gazex.features import ScenarioContext, Traffic
from gazex.preproc import Label, SpeedThresholds

TH = SpeedThresholds(0.5, -0.1)
CTX = ScenarioContext(1, 0, 90, Traffic.SINGLE)


def scripted_trial(speeds, shuttle_fn=None, y=0.0, fixation=Label.GOAL, ctx=CTX):
    """Pedestrian walking +x from (-5, y) with the given per-frame speeds."""
    speeds = np.asarray(speeds, dtype=float)
    x = -5 + np.concatenate([[0], np.cumsum(speeds[:-1] * 0.05)])
    n = len(x)
    ped = np.column_stack([x, np.full(n, y)])
    t = np.arange(n) * 0.05
    shuttles = np.zeros((n, 2, 2))
    present = np.zeros((n, 2), dtype=bool)
    if shuttle_fn is not None:
        shuttles[:, 0] = shuttle_fn(t)
        present[:, 0] = True
    return Trial("T", "P", ctx, t, ped, np.zeros(n), np.zeros(n), np.ones(n, bool), np.full(n, fixation, np.int8),
                 shuttles, present, start=np.array([-5.0, y]), goal=np.array([x[-1], y]))


def walk_to_goal(profile):
    """Extend a speed profile with a 1.3 m/s walk until 10 m are covered."""
    out = list(profile)
    while sum(out) * 0.05 < 10:
        out.append(1.3)
    return out


def test_straight_walk_yielding_shuttle_behind():
    # shuttle stopped 3 m short of the crossing, on the vertical line x = 0
    trial = scripted_trial(walk_to_goal([0.0] * 10), lambda t: np.column_stack([np.zeros_like(t), -3 - 0 * t]))
    m = compute_trial_metrics(trial, TH)
    assert m.mean_deviation == pytest.approx(0, abs=1e-9)
    assert m.max_deviation == pytest.approx(0, abs=1e-9)
    assert m.backward_count == 0
    assert m.gap_selection is Gap.BEFORE_FIRST


def test_pause_and_retreat():
    prof = [0.0] * 10 + [1.3] * 40 + [0.0] * 20 + [-0.3] * 20 + [0.0] * 20
    m = compute_trial_metrics(scripted_trial(walk_to_goal(prof)), TH)
    assert m.initiation_count == 2
    assert m.backward_count == 1


def test_lateral_clearance_120cm():
    # pedestrian waits 1.2 m short of the shuttle path x = 0 while the shuttle passes along +y
    def shuttle(t):
        return np.column_stack([np.zeros_like(t), 8.0 * (t - 6.8)])
    m = compute_trial_metrics(scripted_trial(walk_to_goal([1.0] * 76 + [0.0] * 120), shuttle), TH)
    assert m.lateral_clearance == pytest.approx(120.0, abs=1e-6)
    assert m.gap_selection is Gap.AFTER_LAST


def test_gap_after_leader():
    # fast shuttle passes the crossing line x = 0 well before the pedestrian arrives
    def shuttle(t):
        return np.column_stack([np.zeros_like(t), -17.3 + 8.0 * t])
    m = compute_trial_metrics(scripted_trial(walk_to_goal([1.3] * 5), shuttle), TH)
    assert m.gap_selection is Gap.AFTER_LAST


def test_gaze_times():
    tr = scripted_trial(walk_to_goal([0.0] * 40), fixation=Label.LEADER)
    m = compute_trial_metrics(tr, TH)
    dur = len(tr.t) * 0.05
    assert m.pre_gaze_time + m.during_gaze_time == pytest.approx(dur)
    assert m.pre_gaze_time == pytest.approx(m.waiting_time)


def test_incomplete_trial():
    tr = scripted_trial(walk_to_goal([1.3]))
    tr.goal = tr.goal + [2.0, 0.0]
    with pytest.raises(IncompleteTrialError):
        compute_trial_metrics(tr, TH)


def test_rigid_motion_invariance(small_trials):
    th = dataset_thresholds(small_trials)
    tr = small_trials[3]
    a = np.radians(37)
    R = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    shift = np.array([4.0, -2.5])
    moved = Trial(tr.trial_id, tr.participant_id, tr.ctx, tr.t, tr.ped @ R.T + shift, tr.head_yaw, tr.eye_yaw,
                  tr.eye_valid, tr.fixation, tr.shuttles @ R.T + shift, tr.shuttle_present,
                  tr.start @ R.T + shift, tr.goal @ R.T + shift)
    m1, m2 = compute_trial_metrics(tr, th), compute_trial_metrics(moved, th)
    assert m1.gap_selection is m2.gap_selection
    for k in ("waiting_time", "initiation_count", "backward_count", "mean_deviation", "max_deviation",
              "pre_gaze_time", "during_gaze_time", "lateral_clearance"):
        assert getattr(m1, k) == pytest.approx(getattr(m2, k), abs=1e-6)


def test_invariants_on_synthetic(small_trials):
    th = dataset_thresholds(small_trials)
    for tr in small_trials:
        m = compute_trial_metrics(tr, th)
        assert m.initiation_count >= 0 and m.backward_count >= 0
        assert m.waiting_time >= 0 and m.max_deviation >= m.mean_deviation
        assert m.pre_gaze_time + m.during_gaze_time <= len(tr.t) * 0.05 + 1e-9


def test_descriptive_table(small_trials, tmp_path):
    th = dataset_thresholds(small_trials)
    ms = [compute_trial_metrics(t, th) for t in small_trials]
    for f in FACTORS:
        rows = descriptive_table(ms, f)
        assert sum(r["n"] for r in rows) == len(ms)
        assert all(r["BeforeFirst"] + r["Between"] + r["AfterLast"] == r["n"] for r in rows)
    one = descriptive_table(ms[:1], "angle")[0]
    assert one["waiting_time_mean"] == ms[0].waiting_time and one["waiting_time_sd"] == 0
    with pytest.raises(InvalidInputError):
        descriptive_table(ms, "weather")
    with pytest.raises(InvalidInputError):
        descriptive_table([], "angle")
    write_table_csv(descriptive_table(ms, "traffic"), tmp_path / "t.csv")
    write_metrics_csv(ms, tmp_path / "m.csv")
    assert len((tmp_path / "m.csv").read_text().splitlines()) == len(ms) + 1


def test_clearance_is_finite(small_trials):
    th = dataset_thresholds(small_trials)
    assert all(math.isfinite(compute_trial_metrics(t, th).lateral_clearance) for t in small_trials)

"""Per-trial behavioural indicators and grouped descriptive statistics."""
import csv
import enum
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import DT
from .errors import IncompleteTrialError, InvalidInputError
from .geometry import lateral_offset, unit
from .preproc import Label, detect_initiations, estimate_thresholds, preprocess_trial, speed_toward_goal

SHUTTLE_HALF_WIDTH = 0.8  # m
GOAL_TOLERANCE = 0.5  # m
FACTORS = ("yielding", "ehmi", "angle", "traffic")
CONTINUOUS = (
    "waiting_time", "initiation_count", "backward_count", "mean_deviation", "max_deviation",
    "pre_gaze_time", "during_gaze_time", "lateral_clearance",
)


class Gap(enum.Enum):
    BEFORE_FIRST = "BeforeFirst"
    BETWEEN = "Between"
    AFTER_LAST = "AfterLast"


@dataclass
class TrialMetrics:
    trial_id: str
    ctx: object
    gap_selection: Gap
    waiting_time: float  # s
    initiation_count: int
    backward_count: int
    mean_deviation: float  # cm
    max_deviation: float  # cm
    pre_gaze_time: float  # s
    during_gaze_time: float  # s
    lateral_clearance: float  # cm


@dataclass
class _ShuttleTrack:
    pos: np.ndarray  # (n, 2) front centre, NaN when absent
    heading: np.ndarray
    origin: np.ndarray  # intersection with the pedestrian's start-goal line


def _tracks(trial):
    """Straight-line tracks of the shuttles that appear in the trial."""
    start, goal = trial.start, trial.goal
    out = []
    for j in range(trial.shuttles.shape[1]):
        here = trial.shuttle_present[:, j] & np.all(np.isfinite(trial.shuttles[:, j]), axis=1)
        if here.sum() < 2:
            continue
        p = np.where(here[:, None], trial.shuttles[:, j], np.nan)
        first, last = p[here][0], p[here][-1]
        if np.hypot(*(last - first)) < 1e-6:
            continue
        h = unit(last - first)
        d = unit(goal - start)
        # solve first + a*h == start + b*d
        m = np.column_stack([h, -d])
        if abs(np.linalg.det(m)) < 1e-9:
            continue
        a, _ = np.linalg.solve(m, start - first)
        out.append(_ShuttleTrack(p, h, first + a * h))
    return out


def _along(track, pts):
    return (pts - track.origin) @ track.heading


def _perp(track, pts):
    h = track.heading
    r = pts - track.origin
    return r[..., 0] * h[1] - r[..., 1] * h[0]


def _passage_frame(track, ped):
    """First frame at which the shuttle front reaches the pedestrian's projection."""
    ahead = _along(track, track.pos) >= _along(track, ped)
    ok = np.isfinite(track.pos[:, 0]) & ahead
    return int(np.argmax(ok)) if ok.any() else None


def _crossing_frame(track, ped):
    """First frame at which the pedestrian is past the shuttle's centre line."""
    side = np.sign(_perp(track, ped))
    s0 = side[0] if side[0] != 0 else 1.0
    past = side != s0
    return int(np.argmax(past)) if past.any() else None


def compute_trial_metrics(trial, thresholds):
    """All behavioural indicators of one completed trial.

    Parameters
    ----------
    trial : Trial
    thresholds : SpeedThresholds
        Initiation and backward thresholds on the toward-goal speed.

    Notes
    -----
    The crossing stage starts at the last initiation before the pedestrian
    first enters a shuttle's swept path; gaze time before that instant is
    ``pre_gaze_time`` and from it to the end of the trial is
    ``during_gaze_time``.
    """
    if np.hypot(*(trial.ped[-1] - trial.goal)) > GOAL_TOLERANCE:
        raise IncompleteTrialError(f"trial {trial.trial_id} ends {np.hypot(*(trial.ped[-1] - trial.goal)):.2f} m from the goal")
    pt = preprocess_trial(trial)
    ped = pt.positions
    n = len(ped)
    tracks = _tracks(trial)

    inside = np.zeros(n, dtype=bool)
    for tr in tracks:
        inside |= np.abs(_perp(tr, ped)) < SHUTTLE_HALF_WIDTH
    entry = int(np.argmax(inside)) if inside.any() else n

    speed = speed_toward_goal(trial.ped, trial.start, trial.goal)
    init_t, back_t = detect_initiations(speed, thresholds)
    frames = np.rint(np.asarray(init_t) / DT).astype(int)
    before = frames[frames <= entry]
    boundary = int(before[-1]) if len(before) else (int(frames[0]) if len(frames) else 0)

    crossing = None
    passes = []
    for tr in tracks:
        c = _crossing_frame(tr, ped)
        if c is not None:
            crossing = c if crossing is None else min(crossing, c)
        passes.append(_passage_frame(tr, ped))
    if crossing is None:
        crossing = n
    passes = [math.inf if p is None else p for p in passes]
    gap = Gap.AFTER_LAST
    if not passes or crossing < passes[0]:
        gap = Gap.BEFORE_FIRST
    elif len(passes) > 1 and crossing < passes[1]:
        gap = Gap.BETWEEN

    clearance = math.nan
    gaps = []
    for tr, p in zip(tracks, passes):
        if p is not math.inf:
            gaps.append(abs(_perp(tr, ped[p:p + 1])[0]))
    if gaps:
        clearance = min(gaps)
    elif tracks:
        d = [np.nanmin(np.hypot(*(tr.pos - ped).T)) for tr in tracks]
        clearance = float(min(d))

    dev = np.abs(lateral_offset(ped, trial.start, trial.goal))
    shuttle_gaze = np.isin(pt.labels.labels, [Label.LEADER, Label.FOLLOWER])
    return TrialMetrics(
        trial_id=trial.trial_id, ctx=trial.ctx, gap_selection=gap,
        waiting_time=float(boundary * DT), initiation_count=len(init_t), backward_count=len(back_t),
        mean_deviation=float(dev.mean() * 100), max_deviation=float(dev.max() * 100),
        pre_gaze_time=float(shuttle_gaze[:boundary].sum() * DT),
        during_gaze_time=float(shuttle_gaze[boundary:].sum() * DT),
        lateral_clearance=float(clearance * 100),
    )


def dataset_thresholds(trials):
    """Speed thresholds estimated from the pooled toward-goal speeds of ``trials``."""
    speeds = [speed_toward_goal(t.ped, t.start, t.goal).values for t in trials]
    if not speeds:
        raise InvalidInputError("no trials to estimate thresholds from")
    return estimate_thresholds(np.concatenate(speeds))


def _level(ctx, factor):
    v = getattr(ctx, factor)
    return v.value if isinstance(v, enum.Enum) else v


def descriptive_table(metrics, factor):
    """Gap-choice counts and mean/SD of every indicator per level of ``factor``."""
    if factor not in FACTORS:
        raise InvalidInputError(f"unknown factor {factor!r}; expected one of {FACTORS}")
    if not metrics:
        raise InvalidInputError("no trial metrics to summarise")
    levels = sorted({_level(m.ctx, factor) for m in metrics}, key=str)
    rows = []
    for lv in levels:
        group = [m for m in metrics if _level(m.ctx, factor) == lv]
        row = {"factor": factor, "level": lv, "n": len(group)}
        for g in Gap:
            row[g.value] = sum(m.gap_selection is g for m in group)
        for key in CONTINUOUS:
            v = np.array([getattr(m, key) for m in group], dtype=float)
            v = v[np.isfinite(v)]
            row[f"{key}_mean"] = float(v.mean()) if len(v) else math.nan
            row[f"{key}_sd"] = float(v.std(ddof=1)) if len(v) > 1 else 0.0
        rows.append(row)
    return rows


def write_table_csv(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = list(rows[0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([f"{r[c]:.4f}" if isinstance(r[c], float) else r[c] for c in cols])


def write_metrics_csv(metrics, path):
    """Per-trial indicators, one row per trial."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        keys = ["trial_id"] + list(FACTORS) + ["gap_selection"] + list(CONTINUOUS)
        w.writerow(keys)
        for m in metrics:
            d = asdict(m)
            w.writerow([m.trial_id] + [_level(m.ctx, f) for f in FACTORS] + [m.gap_selection.value]
                       + [f"{d[k]:.4f}" if isinstance(d[k], float) else d[k] for k in CONTINUOUS])

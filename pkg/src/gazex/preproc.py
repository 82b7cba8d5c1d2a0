"""Signal conditioning of raw trial logs.

Covers trajectory smoothing, gaze gap repair, I-VT saccade detection,
semantic fixation cleaning and the speed thresholds used to find crossing
initiations and backward steps.
"""
import enum
import logging
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.signal import find_peaks

from . import DT
from .errors import InvalidInputError, NoValleyError
from .geometry import angle_diff, unit, walking_direction, wrap_angle

log = logging.getLogger(__name__)

SMOOTH_SIGMA = 4.0
KERNEL_TRUNCATE = 4.0
SACCADE_THRESHOLD = 100.0  # deg/s
GAP_TRIM = 0.1  # s
BLINK_GAP = 0.4  # s
MIN_FIXATION = 0.1  # s
HIST_BIN = 0.05  # m/s
DEFAULT_BACKWARD_THRESHOLD = -0.1  # m/s


@dataclass
class TimeSeries:
    values: np.ndarray
    dt: float = DT
    valid_mask: np.ndarray = None
    t0: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.valid_mask is None:
            self.valid_mask = np.isfinite(self.values)
            if self.valid_mask.ndim > 1:
                self.valid_mask = self.valid_mask.all(axis=tuple(range(1, self.values.ndim)))
        self.valid_mask = np.asarray(self.valid_mask, dtype=bool)
        if len(self.valid_mask) != len(self.values):
            raise InvalidInputError("values and valid_mask differ in length")
        if not self.dt > 0:
            raise InvalidInputError("dt must be positive")

    def __len__(self):
        return len(self.values)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(len(self.values))


class Label(enum.IntEnum):
    LEADER = 0
    FOLLOWER = 1
    GOAL = 2
    ENVIRONMENT = 3
    SACCADE = 4
    NOISE = 5
    NONE = 6  # raw tracker output only: no fixation detected


FIXATIONS = (Label.LEADER, Label.FOLLOWER, Label.GOAL, Label.ENVIRONMENT)
_FIX = np.array([int(x) for x in FIXATIONS])


@dataclass
class SemanticLabelSeries:
    labels: np.ndarray
    dt: float = DT

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int8)

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class SpeedThresholds:
    initiation_threshold: float
    backward_threshold: float = DEFAULT_BACKWARD_THRESHOLD

    def __post_init__(self):
        if not self.initiation_threshold > 0:
            raise InvalidInputError("initiation threshold must be positive")
        if not self.backward_threshold < 0:
            raise InvalidInputError("backward threshold must be negative")


def gaussian_smooth(s, sigma=SMOOTH_SIGMA):
    """Gaussian filter along time.

    The kernel is truncated at ``4 * sigma`` samples and renormalised;
    boundaries use half-sample reflection.  Multi-column values are
    filtered column by column.
    """
    if len(s) == 0:
        raise InvalidInputError("cannot smooth an empty series")
    if not sigma > 0:
        raise InvalidInputError("sigma must be positive")
    out = gaussian_filter1d(s.values, sigma, axis=0, mode="reflect", truncate=KERNEL_TRUNCATE)
    return TimeSeries(out, s.dt, s.valid_mask.copy(), s.t0)


def _runs(mask):
    """(start, stop) pairs of True runs in a boolean array."""
    m = np.concatenate([[False], np.asarray(mask, dtype=bool), [False]])
    d = np.diff(m.astype(np.int8))
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def interpolate_gaps(s, trim=GAP_TRIM):
    """Fill interior gaps linearly, then invalidate ``trim`` seconds around each.

    Originally valid values are never altered, only re-masked.  Gaps touching
    either end of the series have a single anchor and stay invalid.
    """
    values = s.values.copy()
    valid = s.valid_mask.copy()
    n_trim = int(round(trim / s.dt))
    gaps = _runs(~s.valid_mask)
    n = len(values)
    for a, b in gaps:
        if a > 0 and b < n:
            left, right = values[a - 1], values[b]
            w = (np.arange(a, b) - (a - 1)) / (b - (a - 1))
            if values.ndim > 1:
                w = w[:, None]
            values[a:b] = left + w * (right - left)
            valid[a:b] = True
        else:
            values[a:b] = np.nan
    for a, b in gaps:
        valid[max(0, a - n_trim):a] = False
        valid[b:min(n, b + n_trim)] = False
    return TimeSeries(values, s.dt, valid, s.t0)


def interpolate_angle_gaps(s, trim=GAP_TRIM):
    """``interpolate_gaps`` for yaw angles: unwrap, fill, rewrap."""
    values = s.values.copy()
    ok = s.valid_mask & np.isfinite(values)
    if ok.any():
        values[ok] = np.degrees(np.unwrap(np.radians(values[ok])))
    filled = interpolate_gaps(TimeSeries(values, s.dt, ok, s.t0), trim)
    finite = np.isfinite(filled.values)
    filled.values[finite] = wrap_angle(filled.values[finite])
    return filled


def detect_saccades(eye_dir, threshold=SACCADE_THRESHOLD):
    """I-VT: flag frame ``t`` when the wrapped yaw step into it exceeds ``threshold`` deg/s."""
    v = np.asarray(eye_dir.values, dtype=float)
    flags = np.zeros(len(v), dtype=bool)
    if len(v) < 2:
        return flags
    step = np.abs(angle_diff(v[1:], v[:-1])) / eye_dir.dt
    with np.errstate(invalid="ignore"):
        flags[1:] = step > threshold
    return flags


def clean_semantic_targets(raw, saccades):
    """Turn raw tracker fixations into a cleaned attention label series.

    Rules are applied in order: saccade frames become ``SACCADE``; a single
    fixation frame between two equal fixation neighbours takes their label;
    non-fixation gaps shorter than 0.4 s between equal labels are filled;
    whatever is left unlabeled, and fixation runs shorter than 0.1 s,
    become ``NOISE``.
    """
    lab = np.asarray(raw.labels, dtype=np.int8).copy()
    saccades = np.asarray(saccades, dtype=bool)
    if len(lab) != len(saccades):
        raise InvalidInputError("label and saccade series differ in length")
    n = len(lab)
    lab[saccades] = Label.SACCADE

    src = lab.copy()
    if n >= 3:
        mid, left, right = src[1:-1], src[:-2], src[2:]
        iso = (np.isin(mid, _FIX) & np.isin(left, _FIX) & (left == right) & (mid != left))
        lab[1:-1][iso] = left[iso]

    max_gap = int(round(BLINK_GAP / raw.dt))
    for a, b in _runs(lab == Label.NONE):
        if a > 0 and b < n and b - a < max_gap and lab[a - 1] == lab[b] and lab[a - 1] in _FIX:
            lab[a:b] = lab[a - 1]

    lab[lab == Label.NONE] = Label.NOISE
    min_run = int(round(MIN_FIXATION / raw.dt))
    for code in _FIX:
        for a, b in _runs(lab == code):
            if b - a < min_run:
                lab[a:b] = Label.NOISE
    return SemanticLabelSeries(lab, raw.dt)


def histogram_threshold(speeds, bin_width=HIST_BIN):
    """Speed at the deepest histogram valley between the two dominant modes.

    Modes are local maxima of a fixed-width histogram over ``[min, max]``;
    the two with the largest topographic prominence (and not in adjacent
    bins) are taken as the standing and walking modes.
    """
    s = np.asarray(speeds, dtype=float).ravel()
    s = s[np.isfinite(s)]
    if s.size == 0:
        raise InvalidInputError("no speed samples")
    lo, hi = s.min(), s.max()
    nbins = int(np.ceil((hi - lo) / bin_width))
    if nbins < 3:
        raise NoValleyError("speed range too narrow for two modes")
    edges = lo + bin_width * np.arange(nbins + 1)
    edges[-1] = max(edges[-1], hi)
    counts, _ = np.histogram(s, edges)
    padded = np.concatenate([[0], counts, [0]])
    peaks, props = find_peaks(padded, prominence=1)
    peaks = peaks - 1
    order = np.lexsort((-counts[peaks], -props["prominences"]))
    ranked = peaks[order]
    if len(ranked) < 2:
        raise NoValleyError("histogram is unimodal")
    first = ranked[0]
    second = next((p for p in ranked[1:] if abs(p - first) > 1), None)
    if second is None:
        raise NoValleyError("no two non-adjacent modes")
    i, j = sorted((first, second))
    k = i + 1 + int(np.argmin(counts[i + 1:j]))
    return float(lo + (k + 0.5) * bin_width)


def estimate_thresholds(speeds):
    """Initiation and backward thresholds from pooled toward-goal speeds.

    The backward threshold reuses the valley rule on the negated slow
    samples; if no backward mode exists it falls back to -0.1 m/s.
    """
    s = np.asarray(speeds, dtype=float).ravel()
    s = s[np.isfinite(s)]
    init = histogram_threshold(s)
    backward = DEFAULT_BACKWARD_THRESHOLD
    slow = s[s < init]
    try:
        v = -histogram_threshold(-slow)
        if v < 0:
            backward = v
        else:
            log.warning("backward valley at %.3f m/s is not negative; using %.2f", v, backward)
    except (NoValleyError, InvalidInputError):
        log.warning("no backward-speed mode found; using %.2f m/s", backward)
    return SpeedThresholds(init, backward)


def detect_initiations(speed_toward_goal, th):
    """Times at which the toward-goal speed enters the walking and backward regimes.

    An initiation is the first frame of every run above the initiation
    threshold, including a run already under way at the first frame.  A
    backward event is the first frame of every run below the backward
    threshold.
    """
    v = np.asarray(speed_toward_goal.values, dtype=float)
    times = speed_toward_goal.times
    with np.errstate(invalid="ignore"):
        above = v > th.initiation_threshold
        below = v < th.backward_threshold
    init = [float(times[a]) for a, _ in _runs(above)]
    back = [float(times[a]) for a, _ in _runs(below)]
    return init, back


def smooth_positions(positions, dt=DT, sigma=SMOOTH_SIGMA):
    return gaussian_smooth(TimeSeries(positions, dt), sigma).values


def velocities(positions, dt=DT):
    """Finite-difference velocity of an ``(n, 2)`` trajectory."""
    p = np.asarray(positions, dtype=float)
    if len(p) < 2:
        return np.zeros_like(p)
    return np.gradient(p, dt, axis=0)


def speed_toward_goal(positions, start, goal, dt=DT, sigma=SMOOTH_SIGMA):
    """Smoothed speed projected on the start-to-goal axis."""
    p = smooth_positions(positions, dt, sigma)
    axis = unit(np.asarray(goal, dtype=float) - np.asarray(start, dtype=float))
    v = velocities(p, dt) @ axis
    return gaussian_smooth(TimeSeries(v, dt), sigma)


@dataclass
class ProcessedTrial:
    trial_id: str
    participant_id: str
    ctx: object
    t: np.ndarray
    positions: np.ndarray  # smoothed
    velocity: np.ndarray
    walking_dir: np.ndarray
    eye_yaw: np.ndarray  # gap-filled, wrapped
    eye_valid: np.ndarray
    head_yaw: np.ndarray
    head_valid: np.ndarray
    saccades: np.ndarray
    labels: SemanticLabelSeries
    shuttles: np.ndarray  # (n, 2, 2) raw positions
    shuttle_present: np.ndarray  # (n, 2)
    start: np.ndarray
    goal: np.ndarray


def preprocess_trial(trial):
    """Run the full signal-conditioning chain on one parsed trial."""
    dt = trial.dt
    pos = smooth_positions(trial.ped, dt)
    vel = velocities(pos, dt)
    axis = np.asarray(trial.goal, dtype=float) - np.asarray(trial.start, dtype=float)
    initial = np.degrees(np.arctan2(axis[1], axis[0])) if np.any(axis) else 0.0
    walk = walking_direction(vel, initial)

    eye = interpolate_angle_gaps(TimeSeries(trial.eye_yaw, dt, trial.eye_valid & np.isfinite(trial.eye_yaw)))
    head_ok = np.isfinite(trial.head_yaw)
    head = interpolate_angle_gaps(TimeSeries(trial.head_yaw, dt, head_ok), trim=0.0) if not head_ok.all() \
        else TimeSeries(wrap_angle(trial.head_yaw), dt, head_ok)
    sacc = detect_saccades(eye)
    labels = clean_semantic_targets(SemanticLabelSeries(trial.fixation, dt), sacc)
    return ProcessedTrial(
        trial.trial_id, trial.participant_id, trial.ctx, trial.t, pos, vel, walk,
        eye.values, eye.valid_mask, head.values, head.valid_mask, sacc, labels,
        trial.shuttles, trial.shuttle_present,
        np.asarray(trial.start, dtype=float), np.asarray(trial.goal, dtype=float),
    )

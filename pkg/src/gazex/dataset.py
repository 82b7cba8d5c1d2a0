"""Trial ingestion, sliding windows, participant splits, and normalisation.

On-disk layout of a dataset directory::

    scenarios.csv          one row per trial: context and start/goal
    trials/<trial_id>.csv  one file per trial, 20 Hz rows
    manifest.json          written by the simulator

Trial CSV columns (header required)::

    trial_id, participant_id, t, ped_x, ped_y, head_yaw_deg, eye_yaw_deg,
    eye_valid, fixation_target, s1_x, s1_y, s1_present, s2_x, s2_y, s2_present

``fixation_target`` is one of leader, follower, goal, environment, none.
Scenario CSV columns: trial_id, yielding, ehmi, angle_deg, traffic (single,
two_gap3, two_gap5); optional participant_id, start_x, start_y, goal_x,
goal_y, completed.
"""
import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import DT
from .errors import InvalidInputError, ParseError
from .features import (
    GazeMode, ScenarioContext, Traffic, build_features, gaze_scaled_channels, gaze_width,
)
from .preproc import Label, preprocess_trial

T_PAST = 40
T_FUTURE = 40
STRIDE = 4
STD_FLOOR = 1e-6

TRIAL_COLUMNS = (
    "trial_id", "participant_id", "t", "ped_x", "ped_y", "head_yaw_deg", "eye_yaw_deg",
    "eye_valid", "fixation_target", "s1_x", "s1_y", "s1_present", "s2_x", "s2_y", "s2_present",
)
SCENARIO_COLUMNS = ("trial_id", "yielding", "ehmi", "angle_deg", "traffic")
SCENARIO_EXTRA = ("participant_id", "start_x", "start_y", "goal_x", "goal_y", "completed")

FIXATION_TOKENS = {
    "leader": Label.LEADER, "follower": Label.FOLLOWER, "goal": Label.GOAL,
    "environment": Label.ENVIRONMENT, "none": Label.NONE,
}
_TOKEN_OF = {v: k for k, v in FIXATION_TOKENS.items()}


@dataclass
class Trial:
    trial_id: str
    participant_id: str
    ctx: ScenarioContext
    t: np.ndarray
    ped: np.ndarray  # (n, 2)
    head_yaw: np.ndarray
    eye_yaw: np.ndarray
    eye_valid: np.ndarray
    fixation: np.ndarray  # raw Label codes
    shuttles: np.ndarray  # (n, 2, 2): frame, slot, xy
    shuttle_present: np.ndarray  # (n, 2)
    start: np.ndarray = None
    goal: np.ndarray = None
    completed: bool = True

    def __post_init__(self):
        if self.start is None:
            self.start = self.ped[0].copy()
        if self.goal is None:
            self.goal = self.ped[-1].copy()
        self.start = np.asarray(self.start, dtype=float)
        self.goal = np.asarray(self.goal, dtype=float)

    @property
    def dt(self):
        return DT

    def __len__(self):
        return len(self.t)


# ---------------------------------------------------------------------------
# CSV I/O

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _float(row, key, path, line):
    text = row[key].strip()
    try:
        return float(text) if text else math.nan
    except ValueError:
        raise ParseError(path, line, f"column {key!r}: not a number: {text!r}") from None


def _flag(row, key, path, line):
    text = row[key].strip()
    if text not in ("0", "1"):
        raise ParseError(path, line, f"column {key!r}: expected 0 or 1, got {text!r}")
    return text == "1"


def parse_trial_csv(path, ctx=None, start=None, goal=None, completed=True):
    """Read one trial file, validating columns, tokens and timestamps."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(path, 1, "missing header")
        missing = [c for c in TRIAL_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ParseError(path, 1, f"missing column(s): {', '.join(missing)}")
        rows = []
        trial_id = participant_id = None
        prev_t = -math.inf
        for line, row in enumerate(reader, start=2):
            if None in row or any(v is None for v in row.values()):
                raise ParseError(path, line, "wrong number of fields")
            if trial_id is None:
                trial_id, participant_id = row["trial_id"], row["participant_id"]
            elif row["trial_id"] != trial_id:
                raise ParseError(path, line, f"trial_id changes to {row['trial_id']!r}")
            t = _float(row, "t", path, line)
            if not math.isfinite(t) or t <= prev_t:
                raise ParseError(path, line, f"time {t} is not strictly increasing")
            if rows and abs((t - prev_t) - DT) > 1e-3:
                raise ParseError(path, line, f"irregular sampling step {t - prev_t:.4f} s")
            prev_t = t
            token = row["fixation_target"].strip().lower()
            if token not in FIXATION_TOKENS:
                raise ParseError(path, line, f"unknown fixation_target {token!r}")
            ped = (_float(row, "ped_x", path, line), _float(row, "ped_y", path, line))
            if not all(map(math.isfinite, ped)):
                raise ParseError(path, line, "pedestrian position must be finite")
            rows.append((
                t, ped[0], ped[1], _float(row, "head_yaw_deg", path, line),
                _float(row, "eye_yaw_deg", path, line), _flag(row, "eye_valid", path, line),
                FIXATION_TOKENS[token],
                _float(row, "s1_x", path, line), _float(row, "s1_y", path, line), _flag(row, "s1_present", path, line),
                _float(row, "s2_x", path, line), _float(row, "s2_y", path, line), _flag(row, "s2_present", path, line),
            ))
    if not rows:
        raise ParseError(path, 2, "no data rows")
    cols = list(zip(*rows))
    arr = lambda i, dtype=float: np.array(cols[i], dtype=dtype)  # noqa: E731
    shuttles = np.stack([np.column_stack([arr(7), arr(8)]), np.column_stack([arr(10), arr(11)])], axis=1)
    return Trial(
        trial_id=trial_id, participant_id=participant_id, ctx=ctx, t=arr(0),
        ped=np.column_stack([arr(1), arr(2)]), head_yaw=arr(3), eye_yaw=arr(4),
        eye_valid=arr(5, bool), fixation=arr(6, np.int8), shuttles=shuttles,
        shuttle_present=np.column_stack([arr(9, bool), arr(12, bool)]),
        start=start, goal=goal, completed=completed,
    )


def write_trial_csv(trial, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_COLUMNS)
        for i in range(len(trial.t)):
            s1, s2 = trial.shuttles[i]
            w.writerow([
                trial.trial_id, trial.participant_id, _fmt(trial.t[i]),
                _fmt(trial.ped[i, 0]), _fmt(trial.ped[i, 1]),
                _fmt(trial.head_yaw[i]), _fmt(trial.eye_yaw[i]), _fmt(bool(trial.eye_valid[i])),
                _TOKEN_OF[Label(int(trial.fixation[i]))],
                _fmt(s1[0]), _fmt(s1[1]), _fmt(bool(trial.shuttle_present[i, 0])),
                _fmt(s2[0]), _fmt(s2[1]), _fmt(bool(trial.shuttle_present[i, 1])),
            ])


def write_scenarios_csv(trials, path):
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCENARIO_COLUMNS + SCENARIO_EXTRA)
        for tr in trials:
            c = tr.ctx
            w.writerow([
                tr.trial_id, c.yielding, c.ehmi, c.angle, c.traffic.value, tr.participant_id,
                _fmt(tr.start[0]), _fmt(tr.start[1]), _fmt(tr.goal[0]), _fmt(tr.goal[1]),
                _fmt(bool(tr.completed)),
            ])


def parse_scenario_csv(path):
    """Map trial_id -> dict(ctx, start, goal, completed, participant_id)."""
    path = Path(path)
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(path, 1, "missing header")
        missing = [c for c in SCENARIO_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ParseError(path, 1, f"missing column(s): {', '.join(missing)}")
        has_geom = all(c in reader.fieldnames for c in ("start_x", "start_y", "goal_x", "goal_y"))
        for line, row in enumerate(reader, start=2):
            try:
                ctx = ScenarioContext(int(row["yielding"]), int(row["ehmi"]), int(float(row["angle_deg"])),
                                      Traffic(row["traffic"].strip().lower()))
            except (ValueError, InvalidInputError) as exc:
                raise ParseError(path, line, str(exc)) from None
            entry = {"ctx": ctx, "start": None, "goal": None, "completed": True,
                     "participant_id": row.get("participant_id")}
            if has_geom:
                entry["start"] = np.array([_float(row, "start_x", path, line), _float(row, "start_y", path, line)])
                entry["goal"] = np.array([_float(row, "goal_x", path, line), _float(row, "goal_y", path, line)])
            if row.get("completed") not in (None, ""):
                entry["completed"] = _flag(row, "completed", path, line)
            out[row["trial_id"]] = entry
    return out


def load_dataset(data_dir, include_incomplete=False):
    """Load every trial listed in ``scenarios.csv`` (sorted by trial_id)."""
    data_dir = Path(data_dir)
    scen_path = data_dir / "scenarios.csv"
    if not scen_path.is_file():
        raise FileNotFoundError(f"no scenarios.csv in {data_dir}")
    scen = parse_scenario_csv(scen_path)
    trials = []
    for tid in sorted(scen):
        e = scen[tid]
        if not e["completed"] and not include_incomplete:
            continue
        trials.append(parse_trial_csv(data_dir / "trials" / f"{tid}.csv", e["ctx"], e["start"], e["goal"],
                                      e["completed"]))
    return trials


# ---------------------------------------------------------------------------
# Windows

@dataclass
class Sample:
    motion: np.ndarray  # (T_p, 6)
    distance: np.ndarray  # (T_p, 4)
    gaze: np.ndarray  # (T_p, w) including validity flag for orientation modes
    ctx: np.ndarray  # (8,)
    anchor: np.ndarray  # (2,) last observed position
    future: np.ndarray  # (T_f, 2) per-step displacements
    trial_id: str = ""
    participant_id: str = ""
    start: int = 0

    def future_positions(self):
        return self.anchor + np.cumsum(self.future, axis=0)


def _fill_gaze(gaze, valid):
    """Forward- then backward-fill invalid gaze rows inside a window."""
    g = gaze.copy()
    idx = np.where(valid, np.arange(len(valid)), -1)
    np.maximum.accumulate(idx, out=idx)
    first = np.argmax(valid) if valid.any() else None
    if first is None:
        return np.zeros_like(g)
    idx[idx < 0] = first
    return g[idx]


def window_count(n, t_past=T_PAST, t_future=T_FUTURE, stride=STRIDE):
    if n < t_past + t_future:
        return 0
    return (n - t_past - t_future) // stride + 1


def make_windows(tf, t_past=T_PAST, t_future=T_FUTURE, stride=STRIDE):
    """Slice a trial's features into past/future samples with delta targets."""
    n = len(tf.positions)
    mode = tf.mode
    out = []
    for s in range(0, n - t_past - t_future + 1, stride):
        past = slice(s, s + t_past)
        a = s + t_past - 1
        gaze = tf.gaze[past]
        if mode.is_orientation:
            valid = tf.gaze_valid[past]
            gaze = np.column_stack([_fill_gaze(gaze, valid), valid.astype(float)])
        fut = tf.positions[a:a + t_future + 1]
        out.append(Sample(
            motion=tf.motion[past], distance=tf.distance[past], gaze=gaze, ctx=tf.ctx,
            anchor=tf.positions[a].copy(), future=np.diff(fut, axis=0),
            trial_id=tf.trial_id, participant_id=tf.participant_id, start=s,
        ))
    return out


@dataclass
class SampleBatch:
    """Stacked samples; the unit consumed by the network and evaluators."""

    motion: np.ndarray
    distance: np.ndarray
    gaze: np.ndarray
    ctx: np.ndarray
    anchor: np.ndarray
    future: np.ndarray
    trial_ids: np.ndarray = field(default=None)
    participant_ids: np.ndarray = field(default=None)
    starts: np.ndarray = field(default=None)
    normalized: bool = False

    def __len__(self):
        return len(self.motion)

    def subset(self, idx):
        idx = np.asarray(idx)
        pick = lambda a: None if a is None else a[idx]  # noqa: E731
        return replace(
            self, motion=self.motion[idx], distance=self.distance[idx], gaze=self.gaze[idx],
            ctx=self.ctx[idx], anchor=self.anchor[idx], future=self.future[idx],
            trial_ids=pick(self.trial_ids), participant_ids=pick(self.participant_ids),
            starts=pick(self.starts),
        )

    def future_positions(self):
        if self.normalized:
            raise InvalidInputError("denormalize before reconstructing positions")
        return self.anchor[:, None, :] + np.cumsum(self.future, axis=1)

    @property
    def gaze_width(self):
        return self.gaze.shape[-1]


def stack_samples(samples, gaze_w=None):
    if not samples:
        raise InvalidInputError("no samples to stack")
    t_p = samples[0].motion.shape[0]
    w = samples[0].gaze.shape[1] if gaze_w is None else gaze_w
    return SampleBatch(
        motion=np.stack([s.motion for s in samples]),
        distance=np.stack([s.distance for s in samples]),
        gaze=np.stack([s.gaze for s in samples]) if w else np.zeros((len(samples), t_p, 0)),
        ctx=np.stack([s.ctx for s in samples]),
        anchor=np.stack([s.anchor for s in samples]),
        future=np.stack([s.future for s in samples]),
        trial_ids=np.array([s.trial_id for s in samples]),
        participant_ids=np.array([s.participant_id for s in samples]),
        starts=np.array([s.start for s in samples]),
    )


def build_samples(trials, mode, t_past=T_PAST, t_future=T_FUTURE, stride=STRIDE):
    """Preprocess, featurise and window a list of trials into one batch."""
    samples = []
    for tr in trials:
        tf = build_features(preprocess_trial(tr), mode)
        samples.extend(make_windows(tf, t_past, t_future, stride))
    if not samples:
        raise InvalidInputError("no trial is long enough for a single window")
    return stack_samples(samples, gaze_width(mode))


# ---------------------------------------------------------------------------
# Splits

def _largest_remainder(n, ratio):
    ratio = np.asarray(ratio, dtype=float)
    exact = n * ratio / ratio.sum()
    counts = np.floor(exact).astype(int)
    rem = exact - counts
    for i in sorted(range(len(ratio)), key=lambda i: (-rem[i], i))[: n - counts.sum()]:
        counts[i] += 1
    # every part gets at least one participant
    for i in range(len(counts)):
        if counts[i] == 0:
            counts[int(np.argmax(counts))] -= 1
            counts[i] = 1
    return counts


def split_by_participant(items, ratio=(6, 1, 3), seed=0):
    """Partition trials (or anything with ``participant_id``) by participant."""
    pids = sorted({it.participant_id for it in items})
    if len(pids) < len(ratio):
        raise InvalidInputError(f"need at least {len(ratio)} participants, got {len(pids)}")
    order = np.random.default_rng(seed).permutation(len(pids))
    counts = _largest_remainder(len(pids), ratio)
    bounds = np.concatenate([[0], np.cumsum(counts)])
    groups = [{pids[k] for k in order[bounds[i]:bounds[i + 1]]} for i in range(len(ratio))]
    return tuple([it for it in items if it.participant_id in g] for g in groups)


# ---------------------------------------------------------------------------
# Normalisation

@dataclass
class Normalizer:
    """Per-channel z-scoring of inputs and of the delta targets.

    Binary channels (presence flags, gaze validity, one-hot gaze) and the
    context vector are passed through unchanged.
    """

    motion_mean: np.ndarray
    motion_std: np.ndarray
    distance_mean: np.ndarray
    distance_std: np.ndarray
    gaze_mean: np.ndarray
    gaze_std: np.ndarray
    target_mean: np.ndarray
    target_std: np.ndarray

    def to_dict(self):
        return {k: np.asarray(v).tolist() for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: np.asarray(v, dtype=float) for k, v in d.items()})

    def denormalize_deltas(self, mu):
        return self.target_mean + self.target_std * mu


def _stats(x, mask):
    flat = x.reshape(-1, x.shape[-1]) if x.shape[-1] else np.zeros((0, 0))
    mean = np.zeros(x.shape[-1])
    std = np.ones(x.shape[-1])
    if flat.size:
        mean[mask] = flat[:, mask].mean(axis=0)
        std[mask] = np.maximum(flat[:, mask].std(axis=0), STD_FLOOR)
    return mean, std


def fit_normalizer(train, mode):
    if len(train) == 0:
        raise InvalidInputError("cannot fit a normalizer on an empty training set")
    mm, ms = _stats(train.motion, np.ones(train.motion.shape[-1], dtype=bool))
    dm, ds = _stats(train.distance, np.array([True, False, True, False]))
    gm, gs = _stats(train.gaze, gaze_scaled_channels(mode) if mode is not GazeMode.NONE else np.zeros(0, bool))
    tm, ts = _stats(train.future, np.ones(2, dtype=bool))
    return Normalizer(mm, ms, dm, ds, gm, gs, tm, ts)


def apply_normalizer(n, batch):
    if batch.normalized:
        raise InvalidInputError("batch is already normalized")
    return replace(
        batch, motion=(batch.motion - n.motion_mean) / n.motion_std,
        distance=(batch.distance - n.distance_mean) / n.distance_std,
        gaze=(batch.gaze - n.gaze_mean) / n.gaze_std,
        future=(batch.future - n.target_mean) / n.target_std, normalized=True,
    )


def invert_normalizer(n, batch):
    if not batch.normalized:
        raise InvalidInputError("batch is not normalized")
    return replace(
        batch, motion=batch.motion * n.motion_std + n.motion_mean,
        distance=batch.distance * n.distance_std + n.distance_mean,
        gaze=batch.gaze * n.gaze_std + n.gaze_mean,
        future=batch.future * n.target_std + n.target_mean, normalized=False,
    )

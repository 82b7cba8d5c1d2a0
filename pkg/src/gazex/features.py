"""Model input streams: motion, shuttle distances, gaze, and static context."""
import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, WrongModeError
from .geometry import angle_diff, vislet_of
from .preproc import Label

DISTANCE_SENTINEL = 30.0  # m
MOTION_CHANNELS = ("x", "y", "dx", "dy", "vx", "vy")
DISTANCE_CHANNELS = ("d1", "present1", "d2", "present2")
CONTEXT_CHANNELS = (
    "yielding", "ehmi", "angle_45", "angle_90", "angle_135",
    "traffic_single", "traffic_two_gap3", "traffic_two_gap5",
)


class GazeMode(enum.Enum):
    EYE_IN_SPACE = "eye-in-space"
    EYE_IN_WALKING = "eye-in-walking"
    EYE_VISLET = "eye-vislet"
    EYE_PLUS_HEAD = "eye-head"
    HEAD_IN_SPACE = "head-in-space"
    HEAD_IN_WALKING = "head-in-walking"
    HEAD_VISLET = "head-vislet"
    GAZE_EVENTS = "gaze-events"
    ATTENTION_PRESENCE = "attention-presence"
    ATTENTION_ON_TRAFFIC = "attention-on-traffic"
    ATTENTION_DISTRIBUTION = "attention-distribution"
    NONE = "none"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("_", "-")
        for m in cls:
            if key in (m.value, m.name.lower().replace("_", "-")):
                return m
        raise InvalidInputError(f"unknown gaze mode {text!r}")

    @property
    def is_orientation(self):
        return self in ORIENTATION_MODES

    @property
    def is_semantic(self):
        return self in SEMANTIC_MODES


ORIENTATION_MODES = (
    GazeMode.EYE_IN_SPACE, GazeMode.EYE_IN_WALKING, GazeMode.EYE_VISLET, GazeMode.EYE_PLUS_HEAD,
    GazeMode.HEAD_IN_SPACE, GazeMode.HEAD_IN_WALKING, GazeMode.HEAD_VISLET,
)
SEMANTIC_MODES = (
    GazeMode.GAZE_EVENTS, GazeMode.ATTENTION_PRESENCE,
    GazeMode.ATTENTION_ON_TRAFFIC, GazeMode.ATTENTION_DISTRIBUTION,
)

_ORIENTATION_WIDTH = {
    GazeMode.EYE_IN_SPACE: 1, GazeMode.EYE_IN_WALKING: 1, GazeMode.EYE_VISLET: 2,
    GazeMode.EYE_PLUS_HEAD: 2, GazeMode.HEAD_IN_SPACE: 1, GazeMode.HEAD_IN_WALKING: 1,
    GazeMode.HEAD_VISLET: 2,
}
_SEMANTIC_WIDTH = {
    GazeMode.GAZE_EVENTS: 3, GazeMode.ATTENTION_PRESENCE: 1,
    GazeMode.ATTENTION_ON_TRAFFIC: 2, GazeMode.ATTENTION_DISTRIBUTION: 4,
}


def gaze_width(mode):
    """Width of the gaze stream fed to the encoder.

    Orientation modes carry one extra validity-flag channel.
    """
    if mode is GazeMode.NONE:
        return 0
    if mode.is_orientation:
        return _ORIENTATION_WIDTH[mode] + 1
    return _SEMANTIC_WIDTH[mode]


def gaze_scaled_channels(mode):
    """Boolean mask of gaze channels that get z-scored."""
    if mode.is_orientation:
        return np.array([True] * _ORIENTATION_WIDTH[mode] + [False])
    return np.zeros(gaze_width(mode), dtype=bool)


class Traffic(enum.Enum):
    SINGLE = "single"
    TWO_GAP3 = "two_gap3"
    TWO_GAP5 = "two_gap5"

    @property
    def headway(self):
        """Follower time headway in seconds, or None for one shuttle."""
        return {Traffic.SINGLE: None, Traffic.TWO_GAP3: 3.0, Traffic.TWO_GAP5: 5.0}[self]

    @property
    def n_shuttles(self):
        return 1 if self is Traffic.SINGLE else 2


ANGLES = (45, 90, 135)


@dataclass(frozen=True)
class ScenarioContext:
    yielding: int
    ehmi: int
    angle: int
    traffic: Traffic

    def __post_init__(self):
        if self.yielding not in (0, 1) or self.ehmi not in (0, 1):
            raise InvalidInputError("yielding and ehmi must be 0 or 1")
        if self.angle not in ANGLES:
            raise InvalidInputError(f"approach angle must be one of {ANGLES}")
        if not isinstance(self.traffic, Traffic):
            raise InvalidInputError("traffic must be a Traffic level")


def all_contexts():
    """The full 2 x 2 x 3 x 3 scenario space."""
    return [ScenarioContext(y, e, a, tr) for y in (0, 1) for e in (0, 1) for a in ANGLES for tr in Traffic]


def context_vector(ctx):
    v = np.zeros(8)
    v[0] = ctx.yielding
    v[1] = ctx.ehmi
    v[2 + ANGLES.index(ctx.angle)] = 1.0
    v[5 + list(Traffic).index(ctx.traffic)] = 1.0
    return v


def context_from_vector(v):
    v = np.asarray(v)
    return ScenarioContext(
        int(v[0]), int(v[1]), ANGLES[int(np.argmax(v[2:5]))], list(Traffic)[int(np.argmax(v[5:8]))]
    )


def eye_representation(pt, mode):
    """Per-frame orientation vectors for ``mode`` from a preprocessed trial."""
    if not mode.is_orientation and mode is not GazeMode.NONE:
        raise WrongModeError(f"{mode.value} is not an orientation mode")
    n = len(pt.t)
    if mode is GazeMode.NONE:
        return np.zeros((n, 0))
    eye, head, walk = pt.eye_yaw, pt.head_yaw, pt.walking_dir
    if mode is GazeMode.EYE_IN_SPACE:
        return eye[:, None].copy()
    if mode is GazeMode.EYE_IN_WALKING:
        return angle_diff(eye, walk)[:, None]
    if mode is GazeMode.EYE_VISLET:
        return vislet_of(eye)
    if mode is GazeMode.EYE_PLUS_HEAD:
        return np.column_stack([head, angle_diff(eye, head)])
    if mode is GazeMode.HEAD_IN_SPACE:
        return head[:, None].copy()
    if mode is GazeMode.HEAD_IN_WALKING:
        return angle_diff(head, walk)[:, None]
    return vislet_of(head)


def semantic_encoding(labels, mode):
    """One-hot attention encodings of cleaned labels.

    Layouts: gaze events ``[attention, saccade, noise]``; attention presence
    ``[on task object]``; attention on traffic ``[shuttle, other]``;
    attention distribution ``[leader, follower, goal, environment]``.
    Saccade and noise frames encode as all zeros except in gaze events.
    """
    if not mode.is_semantic:
        raise WrongModeError(f"{mode.value} is not a semantic mode")
    lab = np.asarray(getattr(labels, "labels", labels))
    fix = np.isin(lab, [Label.LEADER, Label.FOLLOWER, Label.GOAL, Label.ENVIRONMENT])
    if mode is GazeMode.GAZE_EVENTS:
        return np.column_stack([fix, lab == Label.SACCADE, lab == Label.NOISE]).astype(float)
    if mode is GazeMode.ATTENTION_PRESENCE:
        return fix[:, None].astype(float)
    if mode is GazeMode.ATTENTION_ON_TRAFFIC:
        shuttle = (lab == Label.LEADER) | (lab == Label.FOLLOWER)
        other = (lab == Label.GOAL) | (lab == Label.ENVIRONMENT)
        return np.column_stack([shuttle, other]).astype(float)
    return np.column_stack([lab == c for c in (Label.LEADER, Label.FOLLOWER, Label.GOAL, Label.ENVIRONMENT)]).astype(float)


def distance_features(ped, shuttles, present=None):
    """``(d1, present1, d2, present2)`` per frame, leader in slot 1.

    ``shuttles`` is a list of ``(n, 2)`` arrays.  A shuttle is absent on
    frames where ``present`` is false or its position is not finite; absent
    slots hold the 30 m sentinel with flag 0, and distances are clamped to
    30 m.
    """
    ped = np.asarray(ped, dtype=float)
    n = len(ped)
    out = np.empty((n, 4))
    for k in range(2):
        if k < len(shuttles):
            pos = np.asarray(shuttles[k], dtype=float)
            here = np.all(np.isfinite(pos), axis=1)
            if present is not None:
                here &= np.asarray(present[k], dtype=bool)
            d = np.full(n, DISTANCE_SENTINEL)
            d[here] = np.minimum(np.hypot(*(pos[here] - ped[here]).T), DISTANCE_SENTINEL)
        else:
            here = np.zeros(n, dtype=bool)
            d = np.full(n, DISTANCE_SENTINEL)
        out[:, 2 * k] = d
        out[:, 2 * k + 1] = here
    return out


@dataclass
class TrialFeatures:
    """Per-frame model inputs of one trial plus its ground-truth positions."""

    trial_id: str
    participant_id: str
    positions: np.ndarray  # (n, 2) smoothed, used as ground truth
    motion: np.ndarray  # (n, 6)
    distance: np.ndarray  # (n, 4)
    gaze: np.ndarray  # (n, w) without validity flag
    gaze_valid: np.ndarray  # (n,)
    ctx: np.ndarray  # (8,)
    mode: GazeMode


def build_features(pt, mode):
    """Assemble all input streams for a preprocessed trial."""
    p = pt.positions
    step = np.vstack([np.zeros((1, 2)), np.diff(p, axis=0)])
    motion = np.column_stack([p, step, pt.velocity])
    dist = distance_features(p, [pt.shuttles[:, 0], pt.shuttles[:, 1]],
                             [pt.shuttle_present[:, 0], pt.shuttle_present[:, 1]])
    if mode.is_semantic:
        gaze = semantic_encoding(pt.labels, mode)
        valid = np.ones(len(p), dtype=bool)
    else:
        gaze = eye_representation(pt, mode)
        valid = pt.head_valid if mode.name.startswith("HEAD") else pt.eye_valid
        if mode is GazeMode.EYE_PLUS_HEAD:
            valid = pt.eye_valid & pt.head_valid
        valid = valid & np.all(np.isfinite(gaze), axis=1)
    return TrialFeatures(pt.trial_id, pt.participant_id, p, motion, dist, gaze, valid,
                         context_vector(pt.ctx), mode)

"""Seeded eye, head and fixation-target streams for a simulated walk."""
import math

import numpy as np

from .. import DT
from ..geometry import wrap_angle
from ..preproc import Label
from .agent import Phase

DWELL = 0.5  # s, mean fixation duration
PURSUIT_LIMIT = 80.0  # deg/s, smooth eye motion never exceeds this
NOISE_STD = 1.0  # deg
NOISE_TAU = 0.5
HEAD_TAU = 0.2
BLINK_RATE = 0.25  # per second
BLINK_FRAMES = (2, 6)
FLICKER_P = 0.02

_TARGETS = (Label.LEADER, Label.FOLLOWER, Label.GOAL, Label.ENVIRONMENT)
_WEIGHTS = {
    "approach": (0.6, 0.15, 0.15, 0.1),
    "cross": (0.3, 0.1, 0.5, 0.1),
}


def target_weights(phase, leader_present, follower_present):
    """Categorical fixation distribution for a walking phase."""
    w = np.array(_WEIGHTS["cross" if phase is Phase.CROSS else "approach"])
    w[0] *= leader_present
    w[1] *= follower_present
    return w / w.sum()


def _bearing(src, dst):
    d = dst - src
    return math.degrees(math.atan2(d[1], d[0]))


def synth_gaze(ped, walk_dir, phases, shuttle_pos, shuttle_present, goal, seed):
    """Generate gaze streams for one trial.

    Parameters
    ----------
    ped : (n, 2) pedestrian positions
    walk_dir : (n,) walking direction in degrees
    phases : sequence of Phase, one per frame
    shuttle_pos, shuttle_present : (n, k, 2) and (n, k)
    goal : (2,) goal position
    seed : int or sequence, seeds the generator

    Returns
    -------
    dict with ``eye_yaw`` (deg, NaN during blinks), ``eye_valid``,
    ``head_yaw``, ``target`` (true fixation Label per frame), ``fixation``
    (raw recorded label with saccade and blink frames as NONE plus sparse
    mislabels) and ``switch`` (frames where the target changed).
    """
    rng = np.random.default_rng(seed)
    n = len(ped)
    k = shuttle_pos.shape[1]
    target = np.empty(n, dtype=np.int8)
    switch = np.zeros(n, dtype=bool)
    blink = np.zeros(n, dtype=bool)
    eye = np.empty(n)
    env_offset = 0.0
    noise = 0.0
    cur = None
    p_switch = DT / DWELL
    a = math.exp(-DT / NOISE_TAU)
    i = 0
    while i < n:
        if rng.random() < BLINK_RATE * DT and i > 0:
            length = int(rng.integers(BLINK_FRAMES[0], BLINK_FRAMES[1] + 1))
            blink[i:i + length] = True
        i += 1
    for i in range(n):
        lead = k > 0 and bool(shuttle_present[i, 0])
        foll = k > 1 and bool(shuttle_present[i, 1])
        w = target_weights(phases[i], lead, foll)
        lost = cur is not None and w[_TARGETS.index(cur)] == 0
        if cur is None or lost or (not blink[i] and rng.random() < p_switch):
            new = _TARGETS[rng.choice(4, p=w)]
            if new is Label.ENVIRONMENT:
                env_offset = rng.uniform(-120.0, 120.0)
            switch[i] = i > 0 and (new != cur or new is Label.ENVIRONMENT)
            cur = new
        target[i] = cur
        if cur is Label.LEADER:
            aim = _bearing(ped[i], shuttle_pos[i, 0])
        elif cur is Label.FOLLOWER:
            aim = _bearing(ped[i], shuttle_pos[i, 1])
        elif cur is Label.GOAL:
            aim = _bearing(ped[i], goal)
        else:
            aim = walk_dir[i] + env_offset
        noise = a * noise + NOISE_STD * math.sqrt(1 - a * a) * rng.standard_normal()
        want = aim + noise
        if i == 0 or switch[i]:
            eye[i] = want
        else:
            step = wrap_angle(want - eye[i - 1])
            lim = PURSUIT_LIMIT * DT
            eye[i] = eye[i - 1] + float(np.clip(step, -lim, lim))
    # blinks never hide a switch so detected saccades stay attributable
    blink &= ~switch
    for i in np.flatnonzero(switch):
        blink[max(i - 1, 0):i + 2] = False
    head = np.empty(n)
    head[0] = eye[0]
    b = DT / (HEAD_TAU + DT)
    for i in range(1, n):
        head[i] = head[i - 1] + b * wrap_angle(eye[i] - head[i - 1])
    fixation = target.copy()
    fixation[switch | blink] = Label.NONE
    flick = (rng.random(n) < FLICKER_P) & ~switch & ~blink
    for i in np.flatnonzero(flick):
        fixation[i] = rng.choice([t for t in _TARGETS if t != target[i]])
    eye_yaw = wrap_angle(eye)
    eye_yaw = np.where(blink, np.nan, eye_yaw)
    return {
        "eye_yaw": eye_yaw, "eye_valid": ~blink, "head_yaw": wrap_angle(head),
        "target": target, "fixation": fixation, "switch": switch,
    }

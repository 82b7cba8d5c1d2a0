"""Crossing geometry, scenario sampling and shuttle kinematics."""
import enum
import math
from dataclasses import dataclass

import numpy as np

from .. import DT
from ..errors import InvalidInputError
from ..features import ANGLES, ScenarioContext, Traffic

SHUTTLE_SPEED = 15.0 / 3.6  # m/s
SHUTTLE_START = 17.3  # m to the conflict point
SHUTTLE_LENGTH = 3.0
SHUTTLE_WIDTH = 1.6
DETECT_DISTANCE = 12.0
STOP_CLEARANCE = 3.0
RED_DISTANCE = 10.42
GREEN_DISTANCE = 7.96
YIELD_DECEL = SHUTTLE_SPEED ** 2 / (2 * (DETECT_DISTANCE - STOP_CLEARANCE))
MIN_SPACING = SHUTTLE_LENGTH + 2.0
VISIBLE_RANGE = (-20.0, 30.0)


class Ehmi(enum.IntEnum):
    OFF = 0
    RED = 1
    GREEN = 2


@dataclass(frozen=True)
class ScenarioGeometry:
    """Conflict point at the origin, pedestrian walking along +x.

    The shuttle travels along ``(cos a, sin a)`` through the origin, so ``a``
    is the angle between the shuttle's and the pedestrian's headings.
    """

    angle: int = 90
    start: tuple = (-5.0, 0.0)
    goal: tuple = (5.0, 0.0)
    path_margin: float = 0.3
    wait_offset: float = 1.5

    @property
    def heading(self):
        a = math.radians(self.angle)
        return np.array([math.cos(a), math.sin(a)])

    @property
    def entry_x(self):
        """Pedestrian x where the swept shuttle band (plus margin) begins."""
        return -(SHUTTLE_WIDTH / 2 + self.path_margin) / math.sin(math.radians(self.angle))

    @property
    def exit_x(self):
        return -self.entry_x

    @property
    def wait_x(self):
        return self.entry_x - self.wait_offset


@dataclass
class ShuttleStates:
    """Per-frame states of up to two shuttles (slot 0 leader, slot 1 follower).

    ``s`` is the signed distance of the front to the conflict point (positive
    while approaching); ``speed`` is the speed held over the following frame,
    so ``s[k] - s[k + 1] == speed[k] * dt``.
    """

    s: np.ndarray  # (n, k)
    speed: np.ndarray  # (n, k)
    pos: np.ndarray  # (n, k, 2) front centre
    ehmi: np.ndarray  # (n, k) Ehmi codes
    present: np.ndarray  # (n, k)

    @property
    def n_shuttles(self):
        return self.s.shape[1]

    def frame(self, k):
        return [
            {"s": self.s[k, j], "speed": self.speed[k, j], "pos": self.pos[k, j],
             "ehmi": Ehmi(int(self.ehmi[k, j])), "present": bool(self.present[k, j])}
            for j in range(self.n_shuttles)
        ]


def lhs_sample(n=12, seed=0):
    """Latin-hypercube style draw of ``n`` scenario contexts.

    Every factor's levels are repeated as evenly as possible (leftover slots go
    to randomly chosen levels) and each factor column is permuted
    independently.
    """
    if n <= 0:
        raise InvalidInputError("number of scenarios must be positive")
    rng = np.random.default_rng(seed)

    def column(levels):
        reps = n // len(levels)
        extra = rng.choice(len(levels), n - reps * len(levels), replace=False)
        col = [lv for lv in levels for _ in range(reps)] + [levels[i] for i in sorted(extra)]
        return [col[i] for i in rng.permutation(n)]

    cols = [column([0, 1]), column([0, 1]), column(list(ANGLES)), column(list(Traffic))]
    return [ScenarioContext(int(y), int(e), int(a), t) for y, e, a, t in zip(*cols)]


def _leader_profile(yielding, n, resume_frame=None, dt=DT):
    s = np.empty(n + 1)
    v = np.empty(n)
    s[0] = SHUTTLE_START
    prev = SHUTTLE_SPEED
    for k in range(n):
        if not yielding:
            vk = SHUTTLE_SPEED
        elif resume_frame is not None and k >= resume_frame:
            vk = min(prev + YIELD_DECEL * dt, SHUTTLE_SPEED)
        elif s[k] <= DETECT_DISTANCE:
            vk = max(prev - YIELD_DECEL * dt, 0.0)
            vk = min(vk, max(s[k] - STOP_CLEARANCE, 0.0) / dt)
        else:
            vk = SHUTTLE_SPEED
        v[k] = prev = vk
        s[k + 1] = s[k] - vk * dt
    return s, v


def _ehmi(s, yielding, ehmi):
    out = np.zeros(s.shape, dtype=np.int8)
    if not ehmi:
        return out
    # the sign stays on once shown
    if yielding:
        out[np.maximum.accumulate(s <= GREEN_DISTANCE)] = Ehmi.GREEN
    else:
        out[np.maximum.accumulate(s <= RED_DISTANCE)] = Ehmi.RED
    return out


def shuttle_kinematics(ctx, n_frames, resume_frame=None, dt=DT):
    """Shuttle states on the frame grid ``t_k = k * dt``.

    Non-yielding shuttles hold 15 km/h. A yielding leader brakes at
    ``v**2 / 18`` once within 12 m and stops 3 m short of the conflict point;
    it accelerates back from ``resume_frame`` on (if given). The follower
    replays the leader's profile delayed by the headway, held at least
    ``MIN_SPACING`` behind the leader.
    """
    if n_frames <= 0:
        raise InvalidInputError("n_frames must be positive")
    geo = ScenarioGeometry(ctx.angle)
    s_l, v_l = _leader_profile(ctx.yielding, n_frames, resume_frame, dt)
    cols = [s_l]
    if ctx.traffic.headway is not None:
        h = int(round(ctx.traffic.headway / dt))
        k = np.arange(n_frames + 1)
        s_f = np.where(k >= h, s_l[np.maximum(k - h, 0)], SHUTTLE_START + SHUTTLE_SPEED * dt * (h - k))
        cols.append(np.maximum(s_f, s_l + MIN_SPACING))
    s_all = np.column_stack(cols)
    speed = (s_all[:-1] - s_all[1:]) / dt
    speed[:, 0] = v_l
    s = s_all[:-1]
    pos = -s[..., None] * geo.heading
    ehmi = np.column_stack([_ehmi(s[:, j], ctx.yielding, ctx.ehmi) for j in range(s.shape[1])])
    present = (s >= VISIBLE_RANGE[0]) & (s <= VISIBLE_RANGE[1])
    return ShuttleStates(s, speed, pos, ehmi, present)

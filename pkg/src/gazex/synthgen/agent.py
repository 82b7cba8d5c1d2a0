"""Minimal gap-acceptance pedestrian walking from start to goal."""
import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .. import DT
from .scenario import SHUTTLE_LENGTH, Ehmi, ScenarioGeometry

MAX_SPEED = 2.0
COMMIT_SPEED = 0.5  # a shuttle slower than this is taken as yielding
RETREAT_SPEED = -0.3
RETREAT_TTC = 1.5
OVERSHOOT = 0.3  # m past the wait point before retreat is considered
GOAL_RADIUS = 0.2
SPEED_NOISE_TAU = 1.5
LATERAL_TAU = 2.0


class Phase(enum.Enum):
    APPROACH = "approach"
    WAIT = "wait"
    CROSS = "cross"
    DONE = "done"


@dataclass(frozen=True)
class AgentParams:
    pref_speed: float = 1.3
    crit_gap: float = 2.5
    accel: float = 1.0
    speed_noise: float = 0.06  # stationary std of the speed perturbation, m/s
    lateral_noise: float = 0.08  # stationary std of the lateral offset, m

    @classmethod
    def draw(cls, rng):
        """Per-participant variation of gap acceptance and walking speed."""
        return cls(pref_speed=float(np.clip(1.3 + 0.2 * rng.standard_normal(), 0.9, 1.7)),
                   crit_gap=float(np.clip(2.5 + 0.5 * rng.standard_normal(), 1.5, 3.5)))


@dataclass(frozen=True)
class AgentState:
    pos: np.ndarray
    vel: np.ndarray
    phase: Phase = Phase.APPROACH
    speed_dev: float = 0.0
    lateral: float = 0.0


def initial_state(geometry):
    return AgentState(np.array(geometry.start, dtype=float), np.zeros(2))


def lateral_scale(angle):
    """Oblique approaches produce wider swerves than the perpendicular one."""
    return 1.0 if angle == 90 else 2.0


def gap_acceptable(shuttle, ctx, time_to_entry, crit_gap):
    """True if this shuttle leaves enough room to cross now."""
    s, v = shuttle["s"], shuttle["speed"]
    if s < -SHUTTLE_LENGTH - 1.0:
        return True  # already past
    if ctx.yielding and (v < COMMIT_SPEED or shuttle["ehmi"] is Ehmi.GREEN):
        return True
    if s <= 0.0:
        return False
    return s / max(v, 1e-9) > crit_gap + time_to_entry


def _ttc(shuttle):
    s, v = shuttle["s"], shuttle["speed"]
    if s < -SHUTTLE_LENGTH - 1.0:
        return math.inf
    return 0.0 if s <= 0 else s / max(v, 1e-9)


def pedestrian_agent_step(state, shuttles, ctx, params=AgentParams(), rng=None, dt=DT, geometry=None):
    """Advance the agent one frame.

    ``shuttles`` is the list of per-shuttle dicts for the current frame (see
    :meth:`ShuttleStates.frame`); an empty list means a free walk.
    """
    if state.phase is Phase.DONE:
        return state
    geo = geometry or ScenarioGeometry(ctx.angle if ctx is not None else 90)
    x, vx = state.pos[0], state.vel[0]
    goal_x = geo.goal[0]
    if state.phase is Phase.CROSS:
        go = True
    else:
        t_entry = max(geo.entry_x - x, 0.0) / params.pref_speed
        go = all(gap_acceptable(sh, ctx, t_entry, params.crit_gap) for sh in shuttles)
    if go:
        desired = params.pref_speed + state.speed_dev
    else:
        desired = math.sqrt(2 * params.accel * max(geo.wait_x - x, 0.0))
        danger = any(not gap_acceptable(sh, ctx, 0.0, params.crit_gap) and _ttc(sh) < RETREAT_TTC for sh in shuttles)
        if x > geo.wait_x + OVERSHOOT and x < geo.entry_x and danger:
            desired = RETREAT_SPEED
    desired = min(desired, math.sqrt(2 * params.accel * max(goal_x - x, 0.0)))
    dv = float(np.clip(desired - vx, -params.accel * dt, params.accel * dt))
    vx_new = float(np.clip(vx + dv, -MAX_SPEED, MAX_SPEED))

    speed_dev, lateral = state.speed_dev, state.lateral
    if rng is not None:
        a = math.exp(-dt / SPEED_NOISE_TAU)
        speed_dev = a * speed_dev + params.speed_noise * math.sqrt(1 - a * a) * rng.standard_normal()
        b = math.exp(-dt / LATERAL_TAU)
        sigma = params.lateral_noise * lateral_scale(geo.angle)
        lateral = b * lateral + sigma * math.sqrt(1 - b * b) * rng.standard_normal()
    # lateral wander only while moving forward; it fades out near the goal
    fade = min(1.0, max(goal_x - x, 0.0) / 2.0)
    y_target = lateral * fade if vx_new > 0.2 else state.pos[1]
    vy = float(np.clip((y_target - state.pos[1]) / dt, -0.3, 0.3)) if vx_new > 0.2 else 0.0
    vel = np.array([vx_new, vy])
    norm = math.hypot(*vel)
    if norm > MAX_SPEED:
        vel *= MAX_SPEED / norm
    pos = state.pos + vel * dt

    if goal_x - pos[0] < GOAL_RADIUS:
        phase = Phase.DONE
    elif state.phase is Phase.CROSS or (go and pos[0] >= geo.entry_x):
        phase = Phase.CROSS
    elif not go and abs(vel[0]) < 0.1:
        phase = Phase.WAIT
    else:
        phase = Phase.APPROACH
    return replace(state, pos=pos, vel=vel, phase=phase, speed_dev=speed_dev, lateral=lateral)

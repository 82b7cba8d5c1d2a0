"""Simulate whole participants and write them in the dataset CSV layout."""
import json
from pathlib import Path

import numpy as np

from .. import DT
from ..dataset import Trial, write_scenarios_csv, write_trial_csv
from ..errors import InvalidInputError
from ..geometry import walking_direction
from .agent import AgentParams, Phase, initial_state, pedestrian_agent_step
from .gaze import synth_gaze
from .scenario import ScenarioGeometry, lhs_sample, shuttle_kinematics

TIMEOUT = 30.0  # s
SCENARIOS_PER_PARTICIPANT = 12


def simulate_trial(ctx, params, seed, trial_id="T", participant_id="P", timeout=TIMEOUT):
    """Run one crossing at 20 Hz until the goal is reached or time runs out."""
    geo = ScenarioGeometry(ctx.angle)
    rng = np.random.default_rng(seed)
    n_max = int(round(timeout / DT)) + 1
    shuttles = shuttle_kinematics(ctx, n_max)
    resumed = False
    state = initial_state(geo)
    pos, vel, phases = [state.pos], [state.vel], [state.phase]
    k = 0
    while state.phase is not Phase.DONE and k + 1 < n_max:
        state = pedestrian_agent_step(state, shuttles.frame(k), ctx, params, rng, DT, geo)
        k += 1
        pos.append(state.pos)
        vel.append(state.vel)
        phases.append(state.phase)
        if ctx.yielding and not resumed and state.pos[0] > geo.exit_x:
            # the leader drives off once the pedestrian has cleared its path
            shuttles = shuttle_kinematics(ctx, n_max, resume_frame=k)
            resumed = True
    n = k + 1
    ped = np.array(pos)
    v = np.array(vel)
    heading0 = float(np.degrees(np.arctan2(geo.goal[1] - geo.start[1], geo.goal[0] - geo.start[0])))
    walk = walking_direction(v, heading0)
    gaze = synth_gaze(ped, walk, phases, shuttles.pos[:n], shuttles.present[:n], np.array(geo.goal),
                      seed=[*np.atleast_1d(seed).tolist(), 99])
    sh_pos = np.full((n, 2, 2), np.nan)
    sh_present = np.zeros((n, 2), dtype=bool)
    m = shuttles.n_shuttles
    sh_pos[:, :m] = shuttles.pos[:n]
    sh_present[:, :m] = shuttles.present[:n]
    # keep absent slots finite so the CSV never carries NaN positions
    sh_pos = np.nan_to_num(sh_pos, nan=0.0)
    trial = Trial(
        trial_id=trial_id, participant_id=participant_id, ctx=ctx, t=np.arange(n) * DT, ped=ped,
        head_yaw=gaze["head_yaw"], eye_yaw=gaze["eye_yaw"], eye_valid=gaze["eye_valid"],
        fixation=gaze["fixation"], shuttles=sh_pos, shuttle_present=sh_present,
        start=np.array(geo.start), goal=np.array(geo.goal), completed=state.phase is Phase.DONE,
    )
    return trial, {"phases": phases, "gaze_target": gaze["target"], "switch": gaze["switch"],
                   "shuttle_states": shuttles, "velocity": v}


def generate_dataset(n_participants, seed=0, out_dir=None, include_incomplete=False):
    """Simulate ``n_participants`` x 12 LHS scenarios.

    Trials that hit the timeout are flagged ``completed=False``; they are
    written to disk (marked in ``scenarios.csv``) but left out of the
    returned list unless ``include_incomplete`` is set.
    """
    if n_participants < 1:
        raise InvalidInputError("need at least one participant")
    trials = []
    for p in range(n_participants):
        prng = np.random.default_rng([seed, p])
        params = AgentParams.draw(prng)
        contexts = lhs_sample(SCENARIOS_PER_PARTICIPANT, seed=[seed, p, 1])
        pid = f"P{p + 1:03d}"
        for j, ctx in enumerate(contexts):
            tr, _ = simulate_trial(ctx, params, [seed, p, j + 2], f"{pid}_T{j + 1:02d}", pid)
            trials.append(tr)
    if out_dir is not None:
        write_dataset(trials, out_dir, {"seed": seed, "participants": n_participants})
    if include_incomplete:
        return trials
    return [t for t in trials if t.completed]


def write_dataset(trials, out_dir, manifest=None):
    out = Path(out_dir)
    (out / "trials").mkdir(parents=True, exist_ok=True)
    for tr in trials:
        write_trial_csv(tr, out / "trials" / f"{tr.trial_id}.csv")
    write_scenarios_csv(trials, out / "scenarios.csv")
    info = dict(manifest or {})
    info.update(trials=len(trials), completed=sum(t.completed for t in trials))
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
        fh.write("\n")

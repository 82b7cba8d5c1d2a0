"""Synthetic crossing trials standing in for the VR recordings."""
from .agent import AgentParams, AgentState, Phase, pedestrian_agent_step
from .gaze import synth_gaze
from .generate import generate_dataset, simulate_trial, write_dataset
from .scenario import (Ehmi, ScenarioGeometry, ShuttleStates, lhs_sample, shuttle_kinematics,
                       SHUTTLE_SPEED, SHUTTLE_START)

__all__ = [
    "AgentParams", "AgentState", "Ehmi", "Phase", "SHUTTLE_SPEED", "SHUTTLE_START", "ScenarioGeometry",
    "ShuttleStates", "generate_dataset", "lhs_sample", "pedestrian_agent_step", "shuttle_kinematics",
    "simulate_trial", "synth_gaze", "write_dataset",
]

"""Gaze-informed, context-aware pedestrian trajectory prediction."""

__version__ = "0.1.0"

DT = 0.05
FRAME_RATE = 20

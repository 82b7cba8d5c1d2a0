"""Displacement errors, horizon tables, min-k evaluation and simple baselines."""
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import DT
from .errors import InvalidInputError, ShapeError
from .neuralnet.train import MEAN, GazeXModel, SampleK, predict

HORIZONS = (5, 10, 15, 20, 25, 30, 35, 40)
M_TO_CM = 100.0


def _check(pred, gt):
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape or pred.shape[-1] != 2:
        raise ShapeError(f"prediction {pred.shape} and ground truth {gt.shape} must match as (..., T, 2)")
    return pred, gt


def displacement(pred, gt):
    """Per-step Euclidean distance in metres, shape ``(..., T)``."""
    pred, gt = _check(pred, gt)
    return np.hypot(pred[..., 0] - gt[..., 0], pred[..., 1] - gt[..., 1])


def ade(pred, gt):
    """Average displacement error in centimetres."""
    return float(np.mean(displacement(pred, gt)) * M_TO_CM)


def fde(pred, gt):
    """Final displacement error in centimetres."""
    return float(np.mean(displacement(pred, gt)[..., -1]) * M_TO_CM)


@dataclass
class HorizonReport:
    """Mean error (cm) at each horizon plus ADE and FDE over the full horizon."""

    horizons: tuple
    errors: tuple
    ade: float
    fde: float
    n: int

    def at(self, h):
        return self.errors[self.horizons.index(h)]

    def rows(self):
        return [(str(h), e) for h, e in zip(self.horizons, self.errors)] + [("ADE", self.ade), ("FDE", self.fde)]


def report_from_predictions(pred, gt, horizons=HORIZONS):
    """Horizon table for one predicted trajectory per sample."""
    d = displacement(pred, gt).reshape(-1, np.shape(gt)[-2])
    if len(d) == 0:
        raise InvalidInputError("cannot report on an empty set")
    t = d.shape[1]
    hs = tuple(h for h in horizons if h <= t)
    per_step = d.mean(axis=0) * M_TO_CM
    return HorizonReport(hs, tuple(float(per_step[h - 1]) for h in hs), float(per_step.mean()),
                         float(per_step[-1]), len(d))


def select_min_ade(samples, gt):
    """Pick, per sample, the draw with the lowest ADE (first one on ties).

    ``samples`` is ``(B, k, T, 2)``; returns ``(B, T, 2)`` and the chosen index.
    """
    samples = np.asarray(samples, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if samples.ndim != 4 or samples.shape[0] != gt.shape[0] or samples.shape[2:] != gt.shape[1:]:
        raise ShapeError(f"samples {samples.shape} do not match ground truth {gt.shape}")
    err = displacement(samples, np.broadcast_to(gt[:, None], samples.shape)).mean(axis=-1)
    best = np.argmin(err, axis=1)  # argmin returns the first minimum
    return samples[np.arange(len(samples)), best], best


def _predictor(model):
    if isinstance(model, GazeXModel):
        return lambda batch, mode: predict(model, batch, mode)
    if callable(model):
        return model
    raise InvalidInputError("model must be a GazeXModel or a callable (batch, mode) -> positions")


def horizon_report(model, dataset, mode=MEAN, horizons=HORIZONS):
    """Horizon table of ``model`` on a raw sample batch.

    ``mode`` is ``MEAN`` or ``SampleK(k, seed)``; the latter reports the
    min-k error. ``model`` may also be a callable ``(batch, mode)``.
    """
    if dataset is None or len(dataset) == 0:
        raise InvalidInputError("cannot evaluate on an empty dataset")
    gt = dataset.future_positions()
    out = _predictor(model)(dataset, mode)
    if mode != MEAN:
        out, _ = select_min_ade(out, gt)
    return report_from_predictions(out, gt, horizons)


def min_k_eval(model, dataset, k=20, seed=0, horizons=HORIZONS):
    """Best-of-``k`` evaluation with per-sample seeds derived from ``seed``."""
    if k < 1:
        raise InvalidInputError("k must be at least 1")
    return horizon_report(model, dataset, SampleK(k, seed), horizons)


# ---------------------------------------------------------------------------
# Baselines

def constant_position(batch, mode=MEAN):
    t_f = batch.future.shape[1]
    return np.repeat(np.asarray(batch.anchor, dtype=float)[:, None, :], t_f, axis=1)


def constant_velocity(batch, mode=MEAN):
    """Extrapolate the last observed velocity (motion channels 4 and 5)."""
    if batch.normalized:
        raise InvalidInputError("constant velocity needs a raw batch")
    t_f = batch.future.shape[1]
    v = batch.motion[:, -1, 4:6]
    steps = np.arange(1, t_f + 1)[None, :, None] * DT
    return batch.anchor[:, None, :] + v[:, None, :] * steps


def straight_walk_mask(batch, min_speed=1.0):
    """Samples whose past and future frames all move at ``min_speed`` or faster."""
    if batch.normalized:
        raise InvalidInputError("segment selection needs a raw batch")
    past = np.hypot(batch.motion[..., 4], batch.motion[..., 5]).min(axis=1)
    fut = (np.hypot(batch.future[..., 0], batch.future[..., 1]) / DT).min(axis=1)
    return (past >= min_speed) & (fut >= min_speed)


def write_reports_csv(reports, path):
    """Write named reports side by side: one row per horizon, one column per report."""
    names = list(reports)
    if not names:
        raise InvalidInputError("no reports to write")
    first = reports[names[0]].rows()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["horizon"] + names)
        for i, (label, _) in enumerate(first):
            w.writerow([label] + [f"{reports[n].rows()[i][1]:.4f}" for n in names])

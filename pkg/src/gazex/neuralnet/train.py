"""Training loop, model bundle and trajectory prediction."""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..dataset import apply_normalizer, fit_normalizer
from ..errors import InvalidInputError, TrainingError
from ..features import GazeMode
from .model import GaussianTraj, ModelConfig, forward, init_params, loss_and_grads, nll_loss, sample_deltas
from .optim import AdamState, adam_step, lr_schedule

log = logging.getLogger(__name__)

EVAL_CHUNK = 2048


@dataclass
class TrainConfig:
    hidden_motion: int = 64
    hidden_distance: int = 32
    hidden_gaze: int = 32
    hidden_dense: int = 128
    lr: float = 1e-3
    batch_size: int = 64
    epochs: int = 100
    milestones: tuple = (15, 35, 60)
    decay: float = 0.2
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        self.milestones = tuple(int(m) for m in self.milestones)
        for name in ("hidden_motion", "hidden_distance", "hidden_gaze", "hidden_dense", "batch_size", "epochs"):
            if int(getattr(self, name)) <= 0:
                raise InvalidInputError(f"{name} must be positive")
        if self.lr <= 0 or not 0 < self.decay <= 1:
            raise InvalidInputError("learning rate must be positive and decay in (0, 1]")
        if any(b <= a for a, b in zip(self.milestones, self.milestones[1:])):
            raise InvalidInputError("milestones must be strictly increasing")
        if self.dtype not in ("float32", "float64"):
            raise InvalidInputError("dtype must be float32 or float64")

    def lr_at(self, epoch):
        return lr_schedule(epoch, self.lr, self.milestones, self.decay)


@dataclass
class GazeXModel:
    """Trained parameters together with the normalizer fitted on the training split."""

    params: object
    normalizer: object

    @property
    def config(self):
        return self.params.config

    @property
    def gaze_mode(self):
        return GazeMode.parse(self.config.gaze_mode)


@dataclass
class History:
    epochs: list = field(default_factory=list)
    best_epoch: int = -1

    def append(self, epoch, lr, train_nll, val_nll):
        self.epochs.append({"epoch": epoch, "lr": lr, "train_nll": train_nll, "val_nll": val_nll})

    def to_rows(self):
        return [dict(r, best=int(r["epoch"] == self.best_epoch)) for r in self.epochs]


@dataclass(frozen=True)
class SampleK:
    k: int
    seed: int = 0


MEAN = "mean"


def model_config_for(cfg, batch, gaze_mode, include_context):
    mode = GazeMode.parse(gaze_mode)
    return ModelConfig(
        motion_in=batch.motion.shape[-1], distance_in=batch.distance.shape[-1],
        gaze_in=0 if mode is GazeMode.NONE else batch.gaze.shape[-1],
        hidden_motion=cfg.hidden_motion, hidden_distance=cfg.hidden_distance,
        hidden_gaze=cfg.hidden_gaze, hidden_dense=cfg.hidden_dense,
        t_past=batch.motion.shape[1], t_future=batch.future.shape[1],
        include_context=bool(include_context), gaze_mode=mode.value,
    )


def _cast(batch, dtype):
    return replace(
        batch, motion=batch.motion.astype(dtype), distance=batch.distance.astype(dtype),
        gaze=batch.gaze.astype(dtype), ctx=batch.ctx.astype(dtype), future=batch.future.astype(dtype),
    )


def evaluate_nll(params, batch):
    """Mean NLL of a normalised batch, evaluated in fixed-size chunks."""
    total = 0.0
    for s in range(0, len(batch), EVAL_CHUNK):
        part = batch.subset(np.arange(s, min(s + EVAL_CHUNK, len(batch))))
        total += nll_loss(forward(params, part), part.future) * len(part)
    return total / len(batch)


def train(cfg, train_set, val_set, gaze_mode="none", include_context=True, callback=None):
    """Fit a GazeX model on raw (unnormalised) sample batches.

    Parameters
    ----------
    cfg : TrainConfig
    train_set, val_set : SampleBatch
        Raw samples; the normalizer is fitted on ``train_set`` only.
    gaze_mode : str or GazeMode
        Selects whether the gaze encoder is built.
    include_context : bool
        When false the context vector is replaced by zeros.
    callback : callable, optional
        Called as ``callback(epoch, row)`` after every epoch.

    Returns
    -------
    model : GazeXModel
        Parameters from the epoch with the lowest validation NLL.
    history : History
    """
    if train_set is None or len(train_set) == 0:
        raise InvalidInputError("training set is empty")
    if val_set is None or len(val_set) == 0:
        raise InvalidInputError("validation set is empty")
    mode = GazeMode.parse(gaze_mode)
    dtype = np.dtype(cfg.dtype)
    norm = fit_normalizer(train_set, mode)
    tr = _cast(apply_normalizer(norm, train_set), dtype)
    va = _cast(apply_normalizer(norm, val_set), dtype)
    params = init_params(model_config_for(cfg, train_set, mode, include_context), cfg.seed, dtype)
    rng = np.random.default_rng([cfg.seed, 1])
    state = AdamState()
    history = History()
    best, best_val = params.copy(), math.inf
    n = len(tr)
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            loss, grads = loss_and_grads(params, tr.subset(idx))
            if not math.isfinite(loss):
                raise TrainingError(epoch, "loss diverged to a non-finite value")
            adam_step(state, params.weights, grads, dtype.type(lr))
            total += loss * len(idx)
        train_nll = total / n
        val_nll = evaluate_nll(params, va)
        if not math.isfinite(val_nll):
            raise TrainingError(epoch, "validation loss is not finite")
        history.append(epoch, lr, train_nll, val_nll)
        if val_nll < best_val:
            best_val, best = val_nll, params.copy()
            history.best_epoch = epoch
        log.info("epoch %d lr %.2e train %.4f val %.4f", epoch, lr, train_nll, val_nll)
        if callback is not None:
            callback(epoch, history.epochs[-1])
    return GazeXModel(best, norm), history


def predict_distribution(model, batch):
    """Mean and covariance factor of the normalised deltas for a raw batch."""
    nb = _cast(apply_normalizer(model.normalizer, batch), model.params.dtype)
    mus, us = [], []
    for s in range(0, len(nb), EVAL_CHUNK):
        pred = forward(model.params, nb.subset(np.arange(s, min(s + EVAL_CHUNK, len(nb)))))
        mus.append(pred.mu.astype(float))
        us.append(pred.u.astype(float))
    return GaussianTraj(np.concatenate(mus), np.concatenate(us))


def predict(model, batch, mode=MEAN, index_offset=0):
    """Absolute future positions for every sample of a raw batch.

    ``mode`` is :data:`MEAN`, giving an array ``(B, T_f, 2)``, or
    ``SampleK(k, seed)``, giving ``(B, k, T_f, 2)``. Sample ``i`` draws from
    its own generator seeded by ``(seed, index_offset + i)`` so results do not
    depend on how a dataset is chunked.
    """
    pred = predict_distribution(model, batch)
    tm, ts = model.normalizer.target_mean, model.normalizer.target_std
    anchor = np.asarray(batch.anchor, dtype=float)
    if mode == MEAN:
        return anchor[:, None, :] + np.cumsum(tm + ts * pred.mu, axis=1)
    if not isinstance(mode, SampleK) or mode.k < 1:
        raise InvalidInputError(f"unknown prediction mode {mode!r}")
    out = np.empty((len(anchor), mode.k) + pred.mu.shape[1:])
    for i in range(len(anchor)):
        rng = np.random.default_rng([mode.seed, index_offset + i])
        d = sample_deltas(GaussianTraj(pred.mu[i], pred.u[i]), mode.k, rng)
        out[i] = anchor[i] + np.cumsum(tm + ts * d, axis=1)
    return out

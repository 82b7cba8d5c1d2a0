"""Expected-gradients attribution of the final predicted position."""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .dataset import apply_normalizer
from .errors import InvalidInputError
from .features import CONTEXT_CHANNELS, DISTANCE_CHANNELS, MOTION_CHANNELS
from .neuralnet.model import backward, forward

log = logging.getLogger(__name__)

STREAMS = ("motion", "distance", "gaze", "ctx")
AXES = ("x", "y")
CHUNK = 1024


@dataclass
class Attribution:
    """Per-sample attributions for each input stream.

    ``values[stream]`` has the stream's per-sample shape plus a trailing axis
    of length 2 (x, y of the explained output). ``f_x`` is the explained
    output at each input and ``f_background`` its mean over the backgrounds
    paired with that input, both shaped ``(N, 2)``.
    """

    values: dict
    f_x: np.ndarray
    f_background: np.ndarray

    def total(self):
        """Sum of all attributions per sample and axis, ``(N, 2)``."""
        return sum(v.reshape(len(v), -1, 2).sum(axis=1) for v in self.values.values())

    def completeness_error(self):
        return np.abs(self.total() - (self.f_x - self.f_background))

    def channel_values(self):
        """Attributions summed over time, keyed by ``stream.channel``."""
        out = {}
        names = {"motion": MOTION_CHANNELS, "distance": DISTANCE_CHANNELS, "ctx": CONTEXT_CHANNELS}
        for s, v in self.values.items():
            per = v.sum(axis=1) if v.ndim == 4 else v
            labels = names.get(s) or tuple(f"g{i}" for i in range(per.shape[1]))
            for i, c in enumerate(labels):
                out[f"{s}.{c}"] = per[:, i]
        return out


def expected_gradients_fn(fn, grad_fn, x, background, n_background=100, n_alpha=1, seed=0):
    """Expected gradients for an arbitrary differentiable function.

    Parameters
    ----------
    fn : callable
        Maps a dict of stacked inputs to outputs of shape ``(P, 2)``.
    grad_fn : callable
        Maps the same dict to ``{stream: (P, ..., 2)}`` gradients.
    x, background : dict of arrays
        Inputs to explain ``(N, ...)`` and the background set ``(M, ...)``.
    n_background : int
        Background draws per explained input (without replacement when the
        set is large enough).
    n_alpha : int
        Interpolation draws per background sample.
    seed : int

    Returns
    -------
    Attribution
    """
    keys = list(x)
    m = len(background[keys[0]]) if keys else 0
    if m == 0:
        raise InvalidInputError("background set is empty")
    if n_alpha < 1 or n_background < 1:
        raise InvalidInputError("n_alpha and n_background must be positive")
    # separate streams so the background draws do not depend on n_alpha
    rng_bg = np.random.default_rng([seed, 0])
    rng_alpha = np.random.default_rng([seed, 1])
    n = len(x[keys[0]])
    per = n_background * n_alpha
    values = {k: np.zeros(x[k].shape + (2,)) for k in keys}
    f_x = np.asarray(fn({k: x[k] for k in keys}), dtype=float)
    f_b = np.zeros((n, 2))
    for i in range(n):
        idx = rng_bg.choice(m, n_background, replace=n_background > m)
        alpha = rng_alpha.random((n_background, n_alpha)).ravel()
        bi = np.repeat(idx, n_alpha)
        f_b[i] = np.asarray(fn({k: background[k][idx] for k in keys}), dtype=float).mean(axis=0)
        acc = {k: np.zeros(x[k].shape[1:] + (2,)) for k in keys}
        for s in range(0, per, CHUNK):
            sl = slice(s, min(s + CHUNK, per))
            diff = {k: x[k][i] - background[k][bi[sl]] for k in keys}
            a = alpha[sl]
            pts = {k: background[k][bi[sl]] + a.reshape((-1,) + (1,) * (diff[k].ndim - 1)) * diff[k] for k in keys}
            g = grad_fn(pts)
            for k in keys:
                acc[k] += np.einsum("p...,p...a->...a", diff[k], g[k])
        for k in keys:
            values[k][i] = acc[k] / per
    return Attribution(values, f_x, f_b)


def _model_fns(model, output_weights):
    """Explained output and its input gradients for a trained model.

    The output is the final-step displacement of the mean prediction from the
    anchor, in metres; the anchor itself is not a network input.
    """
    params = model.params
    tm = np.asarray(model.normalizer.target_mean, dtype=float)
    ts = np.asarray(model.normalizer.target_std, dtype=float)
    w = np.asarray(output_weights, dtype=float)  # (2, 2): rows are explained outputs
    dtype = params.dtype

    def batch_of(pts):
        return SimpleNamespace(**{k: np.asarray(pts[k], dtype=dtype) for k in STREAMS})

    def fn(pts):
        pred = forward(params, batch_of(pts))
        final = (tm + ts * pred.mu.astype(float)).sum(axis=1)
        return final @ w.T

    def grad_fn(pts):
        pred, cache = forward(params, batch_of(pts), return_cache=True)
        out = {k: np.zeros(np.shape(pts[k]) + (2,)) for k in STREAMS}
        for j in range(2):
            d_mu = np.broadcast_to(ts * w[j], pred.mu.shape).astype(dtype)
            _, gi = backward(params, cache, d_mu, None, need_inputs=True)
            for k in STREAMS:
                if k in gi:
                    out[k][..., j] = gi[k]
        return out

    return fn, grad_fn


def _streams(batch):
    return {k: np.asarray(getattr(batch, k), dtype=float) for k in STREAMS}


def expected_gradients(model, x, background, n_background=100, n_alpha=1, seed=0, output_weights=np.eye(2)):
    """Attribute the final predicted position of ``model`` to its inputs.

    ``x`` and ``background`` are raw sample batches. Attributions are taken in
    the network's normalised input space; because ``(x - b) * df/dx`` is
    unchanged by per-channel affine rescaling, they equal the attributions
    in raw units.
    """
    if background is None or len(background) == 0:
        raise InvalidInputError("background set is empty")
    xn = _streams(apply_normalizer(model.normalizer, x))
    bn = _streams(apply_normalizer(model.normalizer, background))
    fn, grad_fn = _model_fns(model, output_weights)
    return expected_gradients_fn(fn, grad_fn, xn, bn, n_background, n_alpha, seed)


@dataclass
class ContextSummary:
    channel: str
    axis: str
    mean: float
    mean_abs: float
    std: float
    positive_fraction: float
    n: int


def pick_explained(dataset, n_explain=50, seed=0):
    """Random subset of ``n_explain`` samples (all of them, with a warning, if fewer)."""
    n = len(dataset)
    if n < n_explain:
        log.warning("only %d samples available to explain; using all", n)
        return dataset.subset(np.arange(n))
    idx = np.sort(np.random.default_rng(seed).choice(n, n_explain, replace=False))
    return dataset.subset(idx)


def summarize_context(attribution, axis="x"):
    """Distribution summary of the eight context attributions on one axis."""
    j = AXES.index(axis)
    ctx = attribution.values["ctx"][..., j]
    out = []
    for i, name in enumerate(CONTEXT_CHANNELS):
        v = ctx[:, i]
        out.append(ContextSummary(name, axis, float(v.mean()), float(np.abs(v).mean()), float(v.std()),
                                  float(np.mean(v > 0)), len(v)))
    return out


def explain(model, eval_set, background_set, n_explain=50, n_background=100, n_alpha=1, seed=0):
    """Explain ``n_explain`` random evaluation samples against a background set."""
    chosen = pick_explained(eval_set, n_explain, seed)
    attr = expected_gradients(model, chosen, background_set, n_background, n_alpha, seed=[seed, 1])
    return chosen, attr


def write_attribution_csv(samples, attribution, path):
    """One row per explained sample, axis and input channel (summed over time)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    vals = attribution.channel_values()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample", "trial_id", "window_start", "axis", "channel", "value"])
        for i in range(len(attribution.f_x)):
            tid = samples.trial_ids[i] if samples.trial_ids is not None else ""
            st = int(samples.starts[i]) if samples.starts is not None else 0
            for j, ax in enumerate(AXES):
                for name, v in vals.items():
                    w.writerow([i, tid, st, ax, name, repr(float(v[i, j]))])


def write_context_summary_csv(summaries, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["channel", "axis", "mean", "mean_abs", "std", "positive_fraction", "n"])
        for s in summaries:
            w.writerow([s.channel, s.axis, repr(s.mean), repr(s.mean_abs), repr(s.std), repr(s.positive_fraction), s.n])

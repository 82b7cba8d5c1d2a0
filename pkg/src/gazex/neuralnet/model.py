"""Multimodal LSTM encoder / dense decoder with a per-step Gaussian head."""
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InvariantViolationError, ShapeError
from .lstm import init_lstm, lstm_backward, lstm_forward

LOG_2PI = math.log(2.0 * math.pi)
DIAG_FLOOR = 1e-4
N_CONTEXT = 8
# softplus(x) + floor == 1 at initialisation
_UNIT_DIAG_RAW = math.log(math.expm1(1.0 - DIAG_FLOOR))


@dataclass
class ModelConfig:
    motion_in: int = 6
    distance_in: int = 4
    gaze_in: int = 0
    hidden_motion: int = 64
    hidden_distance: int = 32
    hidden_gaze: int = 32
    hidden_dense: int = 128
    t_past: int = 40
    t_future: int = 40
    include_context: bool = True
    gaze_mode: str = "none"

    @property
    def encoders(self):
        enc = [("motion", self.motion_in, self.hidden_motion), ("distance", self.distance_in, self.hidden_distance)]
        if self.gaze_in:
            enc.append(("gaze", self.gaze_in, self.hidden_gaze))
        return enc

    @property
    def fusion_width(self):
        return sum(h for _, _, h in self.encoders) + N_CONTEXT

    def to_dict(self):
        return asdict(self)


@dataclass
class GaussianTraj:
    """Per-step displacement distribution; ``u`` holds ``(u11, u12, u22)``.

    The covariance of step ``t`` is ``U_t^T U_t`` with
    ``U_t = [[u11, u12], [0, u22]]``.
    """

    mu: np.ndarray  # (..., T, 2)
    u: np.ndarray  # (..., T, 3)

    def covariance(self):
        u11, u12, u22 = self.u[..., 0], self.u[..., 1], self.u[..., 2]
        s = np.empty(self.u.shape[:-1] + (2, 2))
        s[..., 0, 0] = u11 * u11
        s[..., 0, 1] = s[..., 1, 0] = u11 * u12
        s[..., 1, 1] = u12 * u12 + u22 * u22
        return s


@dataclass
class ModelParams:
    config: ModelConfig
    weights: dict = field(default_factory=dict)

    def copy(self):
        return ModelParams(self.config, {k: v.copy() for k, v in self.weights.items()})

    @property
    def size(self):
        return int(sum(v.size for v in self.weights.values()))

    @property
    def dtype(self):
        return next(iter(self.weights.values())).dtype

    def astype(self, dtype):
        return ModelParams(self.config, {k: v.astype(dtype) for k, v in self.weights.items()})


def init_params(config, seed=0, dtype=np.float64):
    """PyTorch-style uniform initialisation; Gaussian head starts at ``U = I``."""
    rng = np.random.default_rng(seed)
    w = {}
    for name, n_in, n_h in config.encoders:
        for k, v in init_lstm(rng, n_in, n_h, dtype).items():
            w[f"{name}.{k}"] = v
    dims = [config.fusion_width, config.hidden_dense, config.hidden_dense, 5 * config.t_future]
    for name, n_in, n_out in zip(("dense1", "dense2", "out"), dims[:-1], dims[1:]):
        k = 1.0 / math.sqrt(n_in)
        w[f"{name}.W"] = rng.uniform(-k, k, (n_in, n_out)).astype(dtype)
        w[f"{name}.b"] = rng.uniform(-k, k, n_out).astype(dtype)
    b = w["out.b"].reshape(config.t_future, 5)
    b[:, 2] = _UNIT_DIAG_RAW
    b[:, 4] = _UNIT_DIAG_RAW
    return ModelParams(config, w)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class ForwardCache:
    inputs: dict
    lstm: dict
    fused: np.ndarray
    a1: np.ndarray
    h1: np.ndarray
    a2: np.ndarray
    h2: np.ndarray
    raw: np.ndarray


def _inputs(batch, config):
    x = {"motion": batch.motion, "distance": batch.distance}
    if config.gaze_in:
        x["gaze"] = batch.gaze
    for name, n_in, _ in config.encoders:
        if x[name].shape[-1] != n_in:
            raise ShapeError(f"{name} stream has width {x[name].shape[-1]}, model expects {n_in}")
    return x


def forward(params, batch, return_cache=False):
    """Map a normalised batch to per-step Gaussian displacement predictions."""
    cfg = params.config
    W = params.weights
    dtype = params.dtype
    x = _inputs(batch, cfg)
    hidden, caches = [], {}
    for name, _, _ in cfg.encoders:
        hs, cache = lstm_forward(np.asarray(x[name], dtype=dtype), W[f"{name}.Wx"], W[f"{name}.Wh"], W[f"{name}.b"])
        hidden.append(hs[:, -1])
        caches[name] = cache
    ctx = np.asarray(batch.ctx, dtype=dtype)
    if ctx.shape[-1] != N_CONTEXT:
        raise ShapeError(f"context vector must have width {N_CONTEXT}")
    if not cfg.include_context:
        ctx = np.zeros_like(ctx)
    fused = np.concatenate(hidden + [ctx], axis=1)
    a1 = fused @ W["dense1.W"] + W["dense1.b"]
    h1 = np.maximum(a1, 0.0)
    a2 = h1 @ W["dense2.W"] + W["dense2.b"]
    h2 = np.maximum(a2, 0.0)
    raw = (h2 @ W["out.W"] + W["out.b"]).reshape(len(fused), cfg.t_future, 5)
    u = np.stack([_softplus(raw[..., 2]) + DIAG_FLOOR, raw[..., 3], _softplus(raw[..., 4]) + DIAG_FLOOR], axis=-1)
    pred = GaussianTraj(raw[..., :2], u)
    if return_cache:
        return pred, ForwardCache(x, caches, fused, a1, h1, a2, h2, raw)
    return pred


def _whiten(pred, target):
    r = np.asarray(target) - pred.mu
    u11, u12, u22 = pred.u[..., 0], pred.u[..., 1], pred.u[..., 2]
    w1 = r[..., 0] / u11
    w2 = (r[..., 1] - u12 * w1) / u22
    return r, w1, w2


def step_nll(pred, target):
    """Per-sample, per-step negative log-likelihood, shape ``(B, T)``."""
    if np.any(pred.u[..., 0] <= 0) or np.any(pred.u[..., 2] <= 0):
        raise InvariantViolationError("covariance factor must have a positive diagonal")
    if pred.mu.shape != np.shape(target):
        raise ShapeError(f"prediction {pred.mu.shape} and target {np.shape(target)} differ")
    _, w1, w2 = _whiten(pred, target)
    return LOG_2PI + np.log(pred.u[..., 0]) + np.log(pred.u[..., 2]) + 0.5 * (w1 * w1 + w2 * w2)


def nll_loss(pred, target):
    """Mean 2-D Gaussian NLL over samples and future steps."""
    return float(np.mean(step_nll(pred, target)))


def nll_grad(pred, target):
    """Gradient of :func:`nll_loss` with respect to ``(mu, u)``."""
    r, w1, w2 = _whiten(pred, target)
    u11, u12, u22 = pred.u[..., 0], pred.u[..., 1], pred.u[..., 2]
    scale = 1.0 / w1.size
    d_mu = np.empty_like(pred.mu)
    d_mu[..., 0] = -(w1 / u11 - w2 * u12 / (u11 * u22))
    d_mu[..., 1] = -(w2 / u22)
    d_u = np.empty_like(pred.u)
    d_u[..., 0] = (1.0 - w1 * w1 + w2 * u12 * w1 / u22) / u11
    d_u[..., 1] = -w2 * w1 / u22
    d_u[..., 2] = (1.0 - w2 * w2) / u22
    return d_mu * scale, d_u * scale


def backward(params, cache, d_mu, d_u=None, need_inputs=False):
    """Reverse-mode pass from gradients on ``(mu, u)`` to all weights.

    Returns ``(grads, input_grads)``; ``input_grads`` maps stream name
    (motion, distance, gaze, ctx) to arrays shaped like the inputs, or is
    None when ``need_inputs`` is false.
    """
    cfg = params.config
    W = params.weights
    B = cache.fused.shape[0]
    d_raw = np.zeros_like(cache.raw)
    d_raw[..., :2] = d_mu
    if d_u is not None:
        d_raw[..., 2] = d_u[..., 0] * _sigmoid(cache.raw[..., 2])
        d_raw[..., 3] = d_u[..., 1]
        d_raw[..., 4] = d_u[..., 2] * _sigmoid(cache.raw[..., 4])
    d_raw = d_raw.reshape(B, -1)
    g = {}
    g["out.W"] = cache.h2.T @ d_raw
    g["out.b"] = d_raw.sum(axis=0)
    d_a2 = (d_raw @ W["out.W"].T) * (cache.a2 > 0)
    g["dense2.W"] = cache.h1.T @ d_a2
    g["dense2.b"] = d_a2.sum(axis=0)
    d_a1 = (d_a2 @ W["dense2.W"].T) * (cache.a1 > 0)
    g["dense1.W"] = cache.fused.T @ d_a1
    g["dense1.b"] = d_a1.sum(axis=0)
    d_fused = d_a1 @ W["dense1.W"].T
    input_grads = {} if need_inputs else None
    off = 0
    for name, _, n_h in cfg.encoders:
        dWx, dWh, db, dx = lstm_backward(cache.lstm[name], W[f"{name}.Wx"], W[f"{name}.Wh"],
                                         d_last=d_fused[:, off:off + n_h], need_dx=need_inputs)
        g[f"{name}.Wx"], g[f"{name}.Wh"], g[f"{name}.b"] = dWx, dWh, db
        if need_inputs:
            input_grads[name] = dx
        off += n_h
    if need_inputs:
        d_ctx = d_fused[:, off:]
        input_grads["ctx"] = d_ctx if cfg.include_context else np.zeros_like(d_ctx)
    grads = {k: g[k] for k in W}
    return grads, input_grads


def loss_and_grads(params, batch, need_inputs=False):
    """Mean NLL of a normalised batch and its exact gradients."""
    pred, cache = forward(params, batch, return_cache=True)
    loss = nll_loss(pred, batch.future)
    d_mu, d_u = nll_grad(pred, np.asarray(batch.future, dtype=pred.mu.dtype))
    grads, input_grads = backward(params, cache, d_mu, d_u, need_inputs)
    if need_inputs:
        return loss, grads, input_grads
    return loss, grads


def sample_deltas(pred, k, rng):
    """Draw ``k`` displacement sequences ``mu + U^T z`` with independent steps."""
    z = rng.standard_normal((k,) + pred.mu.shape)
    u11, u12, u22 = pred.u[..., 0], pred.u[..., 1], pred.u[..., 2]
    out = np.empty_like(z)
    out[..., 0] = pred.mu[..., 0] + u11 * z[..., 0]
    out[..., 1] = pred.mu[..., 1] + u12 * z[..., 0] + u22 * z[..., 1]
    return out

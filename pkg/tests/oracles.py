"""Independent reference implementations used as test oracles."""
import math
from types import SimpleNamespace

import numpy as np

from gazex.neuralnet.model import ModelConfig, init_params, loss_and_grads

TINY = dict(hidden_motion=3, hidden_distance=2, hidden_gaze=2, hidden_dense=4, t_past=6, t_future=4)


def tiny_batch(rng, gaze_in, n=5, t_past=6, t_future=4):
    return SimpleNamespace(
        motion=rng.normal(size=(n, t_past, 6)), distance=rng.normal(size=(n, t_past, 4)),
        gaze=rng.normal(size=(n, t_past, gaze_in)), ctx=rng.integers(0, 2, size=(n, 8)).astype(float),
        future=rng.normal(size=(n, t_future, 2)),
    )


def fd_gradient_check(gaze_in, include_context=True, seed=0, h=1e-4):
    """Max relative error between analytic and central-difference gradients.

    Relative error is ``|a - f| / max(|a|, |f|, 1e-6)`` so that entries that
    are zero in both do not divide by zero.
    """
    cfg = ModelConfig(gaze_in=gaze_in, include_context=include_context, **TINY)
    params = init_params(cfg, seed=seed)
    batch = tiny_batch(np.random.default_rng(seed + 1), gaze_in)
    _, grads = loss_and_grads(params, batch)
    worst = 0.0
    for name, w in params.weights.items():
        flat = w.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            lp = loss_and_grads(params, batch)[0]
            flat[i] = old - h
            lm = loss_and_grads(params, batch)[0]
            flat[i] = old
            fd = (lp - lm) / (2 * h)
            a = grads[name].reshape(-1)[i]
            worst = max(worst, abs(a - fd) / max(abs(a), abs(fd), 1e-6))
    return worst, params.size


def brute_ade_fde(pred, gt):
    """Double-loop ADE and FDE in centimetres."""
    total, final = 0.0, 0.0
    b, t = len(pred), len(pred[0])
    for i in range(b):
        for j in range(t):
            d = math.sqrt((pred[i][j][0] - gt[i][j][0]) ** 2 + (pred[i][j][1] - gt[i][j][1]) ** 2)
            total += d
            if j == t - 1:
                final += d
    return 100 * total / (b * t), 100 * final / b


def enumerate_windows(n, t_past=40, t_future=40, stride=4):
    count, s = 0, 0
    while s + t_past + t_future <= n:
        count += 1
        s += stride
    return count


def nll_closed_form(mu, u11, u12, u22, y):
    """Per-step NLL via an explicit covariance matrix and its inverse."""
    U = np.array([[u11, u12], [0.0, u22]])
    S = U.T @ U
    r = np.asarray(y) - np.asarray(mu)
    return math.log(2 * math.pi) + 0.5 * math.log(np.linalg.det(S)) + 0.5 * r @ np.linalg.solve(S, r)

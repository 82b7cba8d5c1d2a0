"""Adam with bias correction and a milestone step-decay schedule."""
from dataclasses import dataclass, field

import numpy as np

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(state, params, grads, lr):
    """Update ``params`` (a dict of arrays) in place and return it with the state."""
    state.step += 1
    bc1 = 1.0 - BETA1 ** state.step
    bc2 = 1.0 - BETA2 ** state.step
    for k, p in params.items():
        g = grads[k]
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        m, v = state.m[k], state.v[k]
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        v += (1.0 - BETA2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + EPS)
    return params, state


def lr_schedule(epoch, base_lr=1e-3, milestones=(15, 35, 60), decay=0.2):
    """Learning rate for ``epoch`` (0-based) under multiplicative milestone decay."""
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    passed = sum(1 for m in milestones if m <= epoch)
    return base_lr * decay ** passed

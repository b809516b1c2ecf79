"""Bias-corrected Adam operating in place on weight tensors."""

from dataclasses import dataclass, field
from typing import Dict, Hashable

import numpy as np

from ..errors import NumericalError


@dataclass
class AdamState:
    m: Dict[Hashable, np.ndarray] = field(default_factory=dict)
    v: Dict[Hashable, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_step(params, state: AdamState, lr: float = 1e-4, betas=(0.9, 0.999), eps: float = 1e-8) -> None:
    """One Adam update over ``(key, tensor)`` pairs; missing grads count as zero.

    All gradients are validated before any parameter changes.
    """
    params = list(params)
    for key, t in params:
        if t.grad is not None and not np.all(np.isfinite(t.grad)):
            raise NumericalError(f"non-finite gradient for parameter {key}")
    state.step += 1
    b1, b2 = betas
    c1 = 1 - b1**state.step
    c2 = 1 - b2**state.step
    for key, t in params:
        g = t.grad if t.grad is not None else np.zeros_like(t.data)
        m = state.m.get(key)
        if m is None:
            m = state.m[key] = np.zeros_like(t.data)
            state.v[key] = np.zeros_like(t.data)
        v = state.v[key]
        if m.shape != t.shape:
            raise ValueError(f"Adam moment shape {m.shape} != parameter {key} shape {t.shape}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        m_hat = m / c1
        v_hat = v / c2
        t.data -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(t.dtype, copy=False)

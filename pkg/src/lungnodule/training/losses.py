"""Cross-entropy losses with probability clamping."""

import numpy as np

from ..errors import ShapeError
from ..tensor import Tensor, make_result

CLAMP = 1e-7


def seg_loss(pred: Tensor, gt) -> Tensor:
    """Mean binary cross-entropy between a probability map and a binary mask.

    Probabilities are clamped to ``[1e-7, 1 - 1e-7]``; the gradient is zero
    where the clamp is active.
    """
    gt = np.asarray(gt.data if isinstance(gt, Tensor) else gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"seg_loss: prediction {pred.shape} vs ground truth {gt.shape}")
    p = pred.data
    dt = p.dtype
    g = gt.astype(dt)
    pc = np.clip(p, dt.type(CLAMP), dt.type(1 - CLAMP))
    n = p.size
    value = -(g * np.log(pc) + (1 - g) * np.log(1 - pc)).sum() / n
    inside = (p > CLAMP) & (p < 1 - CLAMP)

    def backward_fn(grad):
        return ((grad / n) * (-(g / pc) + (1 - g) / (1 - pc)) * inside,)

    return make_result(np.asarray(value, dtype=dt), (pred,), backward_fn, "seg_loss")


def cross_entropy(probs: Tensor, targets) -> Tensor:
    """Batch-mean of ``-sum_i t_i ln p_i`` over rows of (N, K) probabilities."""
    t = np.asarray(targets, dtype=probs.dtype)
    if t.ndim == 1:
        t = t[None, :]
    p = probs.data
    single = p.ndim == 1
    if single:
        p = p[None, :]
    if p.shape != t.shape:
        raise ShapeError(f"cross_entropy: probabilities {probs.shape} vs targets {t.shape}")
    dt = p.dtype
    pc = np.clip(p, dt.type(CLAMP), dt.type(1 - CLAMP))
    n = p.shape[0]
    value = -(t * np.log(pc)).sum() / n
    inside = (p > CLAMP) & (p < 1 - CLAMP)

    def backward_fn(grad):
        g = (grad / n) * (-t / pc) * inside
        return (g[0] if single else g,)

    return make_result(np.asarray(value, dtype=dt), (probs,), backward_fn, "cross_entropy")


def adv_loss(o_d: Tensor, t_d) -> Tensor:
    """Discriminator cross-entropy ``-sum_i t_d[i] ln o_d[i]`` (batch mean).

    ``o_d`` rows must be probability vectors (sum 1 within 1e-5).
    """
    p = o_d.data if o_d.ndim == 2 else o_d.data[None, :]
    if p.shape[-1] != 2:
        raise ShapeError(f"adv_loss expects 2-vectors, got {o_d.shape}")
    sums = p.sum(axis=-1)
    if np.any(np.abs(sums - 1) > 1e-5) or np.any(p < 0):
        raise ValueError(f"adv_loss: discriminator output is not normalized (row sums {sums.min()}..{sums.max()})")
    return cross_entropy(o_d, t_d)

"""Differentiable NCHW layer primitives built on :mod:`lungnodule.tensor`."""

import numpy as np

from ..errors import ShapeError
from ..tensor import Tensor, make_result

__all__ = [
    "conv2d",
    "conv_output_size",
    "maxpool2x2",
    "max_unpool2x2",
    "batchnorm2d",
    "linear",
    "softmax",
    "concat_channels",
    "flatten",
]


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def _im2col(xp: np.ndarray, k: int, stride: int, ho: int, wo: int) -> np.ndarray:
    """(N, C, Hp, Wp) -> (N, C*k*k, Ho*Wo), row order (c, i, j)."""
    n, c = xp.shape[:2]
    cols = np.empty((n, c, k, k, ho, wo), dtype=xp.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = xp[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride]
    return cols.reshape(n, c * k * k, ho * wo)


def _col2im(cols: np.ndarray, shape, k: int, stride: int, ho: int, wo: int) -> np.ndarray:
    n, c = shape[:2]
    cols = cols.reshape(n, c, k, k, ho, wo)
    out = np.zeros(shape, dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            out[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride] += cols[:, :, i, j]
    return out


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation. ``weight`` is (out_ch, in_ch, k, k), ``bias`` is (out_ch,)."""
    if x.ndim != 4:
        raise ShapeError(f"conv2d expects NCHW input, got shape {x.shape}")
    n, c, h, w = x.shape
    o, ci, kh, kw = weight.shape
    if ci != c:
        raise ShapeError(f"conv2d: input has {c} channels, weight expects {ci}")
    if kh != kw:
        raise ShapeError(f"conv2d: square kernels only, got {kh}x{kw}")
    if bias.shape != (o,):
        raise ShapeError(f"conv2d: bias shape {bias.shape}, expected ({o},)")
    k = kh
    ho = conv_output_size(h, k, stride, padding)
    wo = conv_output_size(w, k, stride, padding)
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d: output size {ho}x{wo} for input {h}x{w}, k={k}, s={stride}, p={padding}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    cols = _im2col(xp, k, stride, ho, wo)
    w2 = weight.data.reshape(o, c * k * k)
    out = np.matmul(w2, cols) + bias.data[None, :, None]

    def backward_fn(g):
        g2 = g.reshape(n, o, ho * wo)
        gw = gb = gx = None
        if weight.requires_grad:
            gw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(weight.shape)
        if bias.requires_grad:
            gb = g2.sum(axis=(0, 2))
        if x.requires_grad:
            gxp = _col2im(np.matmul(w2.T, g2), xp.shape, k, stride, ho, wo)
            gx = gxp[:, :, padding : padding + h, padding : padding + w] if padding else gxp
        return gx, gw, gb

    return make_result(out.reshape(n, o, ho, wo), (x, weight, bias), backward_fn, "conv2d")


def _pool_indices(data: np.ndarray):
    n, c, h, w = data.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2x2 needs even spatial dims, got {h}x{w}")
    blocks = data.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    # argmax takes the first maximum; window order (0,0),(0,1),(1,0),(1,1) is flat-index order
    local = blocks.argmax(axis=-1)
    pooled = np.take_along_axis(blocks, local[..., None], axis=-1)[..., 0]
    rows = np.arange(h // 2)[:, None] * 2 + local // 2
    cols = np.arange(w // 2)[None, :] * 2 + local % 2
    return pooled, (rows * w + cols).astype(np.int64)


def maxpool2x2(x: Tensor):
    """2x2/stride-2 max pool. Returns ``(pooled, indices)``.

    ``indices`` holds, per output element, the flat position ``row * W + col``
    of the maximum within its input plane; ties go to the lowest flat index.
    """
    if x.ndim != 4:
        raise ShapeError(f"maxpool2x2 expects NCHW input, got shape {x.shape}")
    n, c, h, w = x.shape
    pooled, idx = _pool_indices(x.data)

    def backward_fn(g):
        gx = np.zeros((n, c, h * w), dtype=x.dtype)
        np.put_along_axis(gx, idx.reshape(n, c, -1), g.reshape(n, c, -1), axis=2)
        return (gx.reshape(n, c, h, w),)

    return make_result(pooled, (x,), backward_fn, "maxpool2x2"), idx


def max_unpool2x2(pooled: Tensor, indices: np.ndarray, out_shape=None) -> Tensor:
    """Scatter ``pooled`` values to the positions recorded by :func:`maxpool2x2`."""
    n, c, hp, wp = pooled.shape
    if out_shape is None:
        out_shape = (n, c, hp * 2, wp * 2)
    out_shape = tuple(out_shape)
    if out_shape != (n, c, hp * 2, wp * 2):
        raise ShapeError(f"max_unpool2x2: out_shape {out_shape} does not double {pooled.shape}")
    indices = np.asarray(indices)
    if indices.shape != pooled.shape:
        raise ShapeError(f"max_unpool2x2: indices shape {indices.shape} vs pooled {pooled.shape}")
    plane = out_shape[2] * out_shape[3]
    if indices.size and (indices.min() < 0 or indices.max() >= plane):
        raise IndexError(f"max_unpool2x2: index out of range [0, {plane})")
    flat_idx = indices.reshape(n, c, -1)
    out = np.zeros((n, c, plane), dtype=pooled.dtype)
    np.put_along_axis(out, flat_idx, pooled.data.reshape(n, c, -1), axis=2)

    def backward_fn(g):
        return (np.take_along_axis(g.reshape(n, c, -1), flat_idx, axis=2).reshape(n, c, hp, wp),)

    return make_result(out.reshape(out_shape), (pooled,), backward_fn, "max_unpool2x2")


def batchnorm2d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    train: bool = True,
    momentum: float = 0.1,
    eps: float = 1e-5,
    update_stats: bool = True,
) -> Tensor:
    """Per-channel batch normalization.

    In train mode the batch statistics normalize the input and, when
    ``update_stats`` is set, ``running_mean``/``running_var`` are updated in
    place as ``running <- (1 - momentum) * running + momentum * batch``
    (unbiased batch variance for the running estimate). Eval mode uses the
    running statistics.
    """
    if x.ndim != 4:
        raise ShapeError(f"batchnorm2d expects NCHW input, got shape {x.shape}")
    n, c, h, w = x.shape
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"batchnorm2d: {c} channels but gamma {gamma.shape}, beta {beta.shape}")
    dt = x.dtype.type
    g_ = gamma.data[None, :, None, None]
    b_ = beta.data[None, :, None, None]
    if not train:
        inv = 1.0 / np.sqrt(running_var.astype(x.dtype) + dt(eps))
        xhat = (x.data - running_mean.astype(x.dtype)[None, :, None, None]) * inv[None, :, None, None]
        out = xhat * g_ + b_

        def backward_eval(g):
            gx = g * (gamma.data * inv)[None, :, None, None] if x.requires_grad else None
            return gx, (g * xhat).sum(axis=(0, 2, 3)), g.sum(axis=(0, 2, 3))

        return make_result(out.astype(x.dtype, copy=False), (x, gamma, beta), backward_eval, "batchnorm2d")

    m = n * h * w
    mean = x.data.mean(axis=(0, 2, 3))
    centered = x.data - mean[None, :, None, None]
    var = (centered * centered).mean(axis=(0, 2, 3))
    inv = (1.0 / np.sqrt(var + dt(eps))).astype(x.dtype)
    xhat = centered * inv[None, :, None, None]
    out = xhat * g_ + b_
    if update_stats:
        unbiased = var * (m / (m - 1)) if m > 1 else var
        running_mean *= 1 - momentum
        running_mean += momentum * mean
        running_var *= 1 - momentum
        running_var += momentum * unbiased

    def backward_fn(g):
        gbeta = g.sum(axis=(0, 2, 3))
        ggamma = (g * xhat).sum(axis=(0, 2, 3))
        gx = None
        if x.requires_grad:
            gxhat = g * g_
            gx = (inv / m)[None, :, None, None] * (
                m * gxhat
                - gxhat.sum(axis=(0, 2, 3))[None, :, None, None]
                - xhat * (gxhat * xhat).sum(axis=(0, 2, 3))[None, :, None, None]
            )
        return gx, ggamma, gbeta

    return make_result(out, (x, gamma, beta), backward_fn, "batchnorm2d")


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map ``x @ weight + bias`` with ``weight`` of shape (in, out)."""
    if x.ndim != 2:
        raise ShapeError(f"linear expects N x F input, got shape {x.shape}")
    f, o = weight.shape
    if x.shape[1] != f:
        raise ShapeError(f"linear: input features {x.shape[1]} vs weight {weight.shape}")
    if bias.shape != (o,):
        raise ShapeError(f"linear: bias shape {bias.shape}, expected ({o},)")
    xd, wd = x.data, weight.data

    def backward_fn(g):
        return (
            g @ wd.T if x.requires_grad else None,
            xd.T @ g if weight.requires_grad else None,
            g.sum(axis=0),
        )

    return make_result(xd @ wd + bias.data, (x, weight, bias), backward_fn, "linear")


def softmax(x: Tensor) -> Tensor:
    """Softmax over axis 1 (channels / classes)."""
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)

    def backward_fn(g):
        return (p * (g - (g * p).sum(axis=1, keepdims=True)),)

    return make_result(p, (x,), backward_fn, "softmax")


def concat_channels(tensors) -> Tensor:
    tensors = list(tensors)
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(ref) or t.shape[0] != ref[0] or t.shape[2:] != ref[2:]:
            raise ShapeError(f"concat_channels: incompatible shapes {ref} and {t.shape}")
    splits = np.cumsum([t.shape[1] for t in tensors])[:-1]

    def backward_fn(g):
        return tuple(np.split(g, splits, axis=1))

    return make_result(np.concatenate([t.data for t in tensors], axis=1), tensors, backward_fn, "concat")


def flatten(x: Tensor) -> Tensor:
    n = x.shape[0]
    src = x.shape
    return make_result(x.data.reshape(n, -1), (x,), lambda g: (g.reshape(src),), "flatten")

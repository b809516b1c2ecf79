"""Run a :class:`NetworkSpec` forward with a :class:`WeightStore`."""

import numpy as np

from ..errors import ShapeError
from ..tensor import Tensor, no_grad, relu, sigmoid
from . import functional as F
from .spec import (
    BatchNorm2d,
    ConcatChannels,
    Conv2d,
    Flatten,
    Linear,
    MaxPool2x2,
    MaxUnpool2x2,
    NetworkSpec,
    ReLU,
    Sigmoid,
    SoftmaxOverChannels,
)
from .weights import WeightStore, check_weights, init_weights


def forward(spec: NetworkSpec, store: WeightStore, x, train: bool = True, update_stats: bool = True, trace=None):
    """Evaluate the network on an NCHW batch.

    ``train`` selects batch statistics in batch-norm layers; ``update_stats``
    controls whether those layers also update their running statistics. If
    ``trace`` is a list, each layer's output shape (batch included) is
    appended to it.
    """
    if not isinstance(x, Tensor):
        x = Tensor(x)
    if x.ndim != len(spec.input_shape) + 1 or x.shape[1] != spec.input_shape[0]:
        raise ShapeError(f"{spec.name}: input {x.shape} vs declared {spec.input_shape}")
    saved = {}
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Conv2d):
            p = store[i]
            x = F.conv2d(x, p["weight"], p["bias"], layer.stride, layer.padding)
        elif isinstance(layer, BatchNorm2d):
            p = store[i]
            x = F.batchnorm2d(
                x,
                p["gamma"],
                p["beta"],
                p["running_mean"].data,
                p["running_var"].data,
                train=train,
                momentum=layer.momentum,
                eps=layer.eps,
                update_stats=update_stats,
            )
        elif isinstance(layer, ReLU):
            x = relu(x)
        elif isinstance(layer, Sigmoid):
            x = sigmoid(x)
        elif isinstance(layer, SoftmaxOverChannels):
            x = F.softmax(x)
        elif isinstance(layer, MaxPool2x2):
            pre = x
            x, idx = F.maxpool2x2(x)
            saved[layer.tag] = (pre, idx)
        elif isinstance(layer, MaxUnpool2x2):
            pre, idx = saved[layer.tag]
            x = F.max_unpool2x2(x, idx, pre.shape)
        elif isinstance(layer, ConcatChannels):
            pre, _ = saved[layer.tag]
            x = F.concat_channels([x, pre])
        elif isinstance(layer, Flatten):
            x = F.flatten(x)
        elif isinstance(layer, Linear):
            p = store[i]
            x = F.linear(x, p["weight"], p["bias"])
        else:
            raise ShapeError(f"layer {i}: unknown layer type {type(layer).__name__}")
        if trace is not None:
            trace.append(x.shape)
    return x


class Network:
    """A spec bundled with its weights.

    Calling the network runs :func:`forward`; :meth:`predict` runs it in
    eval mode without recording a graph and returns a numpy array.
    """

    def __init__(self, spec: NetworkSpec, weights: WeightStore = None, seed: int = 0):
        self.spec = spec
        self.weights = weights if weights is not None else init_weights(spec, seed)
        check_weights(spec, self.weights)

    def __call__(self, x, train: bool = True, update_stats: bool = True) -> Tensor:
        return forward(self.spec, self.weights, x, train=train, update_stats=update_stats)

    def forward(self, x, train: bool = True, update_stats: bool = True) -> Tensor:
        return self(x, train=train, update_stats=update_stats)

    def predict(self, x, batch_size: int = 64) -> np.ndarray:
        x = np.asarray(x.data if isinstance(x, Tensor) else x)
        dtype = next((t.dtype for _, t in self.weights.trainable()), np.float32)
        outs = []
        with no_grad():
            for start in range(0, len(x), batch_size):
                batch = Tensor(x[start : start + batch_size].astype(dtype, copy=False))
                outs.append(self(batch, train=False).data)
        return np.concatenate(outs, axis=0)

"""Layers, network specs, weights and the forward executor."""

from .functional import batchnorm2d, concat_channels, conv2d, flatten, linear, max_unpool2x2, maxpool2x2, softmax
from .network import Network, forward
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
    build_classifier,
    build_discriminator,
    build_segmenter,
    build_vgg16_convs,
    infer_shapes,
)
from .weights import WeightStore, init_weights, load_weights, save_weights

__all__ = [
    "BatchNorm2d",
    "ConcatChannels",
    "Conv2d",
    "Flatten",
    "Linear",
    "MaxPool2x2",
    "MaxUnpool2x2",
    "Network",
    "NetworkSpec",
    "ReLU",
    "Sigmoid",
    "SoftmaxOverChannels",
    "WeightStore",
    "batchnorm2d",
    "build_classifier",
    "build_discriminator",
    "build_segmenter",
    "build_vgg16_convs",
    "concat_channels",
    "conv2d",
    "flatten",
    "forward",
    "infer_shapes",
    "init_weights",
    "linear",
    "load_weights",
    "max_unpool2x2",
    "maxpool2x2",
    "save_weights",
    "softmax",
]

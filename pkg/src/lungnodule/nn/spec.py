"""Declarative layer graphs and the three network builders.

A :class:`NetworkSpec` is a flat list of layers executed in order. Two kinds
of long-range links exist, both keyed by a string tag:

* ``MaxPool2x2(tag)`` records its argmax indices *and* its input activation;
* ``MaxUnpool2x2(tag)`` consumes the indices, ``ConcatChannels(tag)``
  concatenates the saved pre-pool activation onto the current one.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Tuple, Union

from ..errors import ShapeError
from .functional import conv_output_size


@dataclass(frozen=True)
class Conv2d:
    in_ch: int
    out_ch: int
    kernel: int
    stride: int = 1
    padding: int = 0


@dataclass(frozen=True)
class BatchNorm2d:
    ch: int
    eps: float = 1e-5
    momentum: float = 0.1


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class Sigmoid:
    pass


@dataclass(frozen=True)
class SoftmaxOverChannels:
    pass


@dataclass(frozen=True)
class MaxPool2x2:
    tag: str


@dataclass(frozen=True)
class MaxUnpool2x2:
    tag: str


@dataclass(frozen=True)
class ConcatChannels:
    tag: str


@dataclass(frozen=True)
class Linear:
    in_features: int
    out_features: int


@dataclass(frozen=True)
class Flatten:
    pass


LayerSpec = Union[
    Conv2d, BatchNorm2d, ReLU, Sigmoid, SoftmaxOverChannels, MaxPool2x2, MaxUnpool2x2, ConcatChannels, Linear, Flatten
]

PARAMETERIZED = (Conv2d, BatchNorm2d, Linear)


@dataclass
class NetworkSpec:
    name: str
    layers: List[LayerSpec]
    input_shape: Tuple[int, ...]  # (C, H, W), batch excluded
    output: str  # "pixel_map" | "class_scores"
    layer_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.input_shape = tuple(self.input_shape)
        if not self.layer_names:
            self.layer_names = _default_names(self.layers)
        infer_shapes(self)

    def __len__(self):
        return len(self.layers)


_SHORT = {
    "Conv2d": "conv",
    "BatchNorm2d": "bn",
    "ReLU": "relu",
    "Sigmoid": "sigmoid",
    "SoftmaxOverChannels": "softmax",
    "MaxPool2x2": "pool",
    "MaxUnpool2x2": "unpool",
    "ConcatChannels": "concat",
    "Linear": "fc",
    "Flatten": "flatten",
}


def _default_names(layers) -> List[str]:
    counts: Dict[str, int] = {}
    names = []
    for layer in layers:
        kind = _SHORT[type(layer).__name__]
        counts[kind] = counts.get(kind, 0) + 1
        names.append(f"{kind}{counts[kind]}")
    return names


def infer_shapes(spec: NetworkSpec, input_shape=None) -> List[Tuple[int, ...]]:
    """Static per-layer output shapes (batch dimension excluded).

    Raises :class:`ShapeError` when channels do not chain, a tag is unknown or
    reused, or a spatial size becomes invalid.
    """
    shape = tuple(input_shape or spec.input_shape)
    pools: Dict[str, Tuple[int, ...]] = {}
    used_unpool, used_concat = set(), set()
    shapes = []
    for i, layer in enumerate(spec.layers):
        where = f"layer {i} ({type(layer).__name__})"
        if isinstance(layer, Conv2d):
            _need_rank(shape, 3, where)
            if shape[0] != layer.in_ch:
                raise ShapeError(f"{where}: expects {layer.in_ch} channels, gets {shape[0]}")
            h = conv_output_size(shape[1], layer.kernel, layer.stride, layer.padding)
            w = conv_output_size(shape[2], layer.kernel, layer.stride, layer.padding)
            if h < 1 or w < 1:
                raise ShapeError(f"{where}: output size {h}x{w} from input {shape}")
            shape = (layer.out_ch, h, w)
        elif isinstance(layer, BatchNorm2d):
            _need_rank(shape, 3, where)
            if shape[0] != layer.ch:
                raise ShapeError(f"{where}: expects {layer.ch} channels, gets {shape[0]}")
        elif isinstance(layer, MaxPool2x2):
            _need_rank(shape, 3, where)
            if shape[1] % 2 or shape[2] % 2:
                raise ShapeError(f"{where}: odd spatial size {shape[1:]}")
            if layer.tag in pools:
                raise ShapeError(f"{where}: tag {layer.tag!r} already defined")
            pools[layer.tag] = shape
            shape = (shape[0], shape[1] // 2, shape[2] // 2)
        elif isinstance(layer, MaxUnpool2x2):
            src = pools.get(layer.tag)
            if src is None:
                raise ShapeError(f"{where}: unknown pool tag {layer.tag!r}")
            if layer.tag in used_unpool:
                raise ShapeError(f"{where}: pool tag {layer.tag!r} unpooled twice")
            used_unpool.add(layer.tag)
            if shape != (src[0], src[1] // 2, src[2] // 2):
                raise ShapeError(f"{where}: input {shape} does not match pooled shape of {layer.tag!r} {src}")
            shape = src
        elif isinstance(layer, ConcatChannels):
            src = pools.get(layer.tag)
            if src is None:
                raise ShapeError(f"{where}: unknown saved activation {layer.tag!r}")
            if layer.tag in used_concat:
                raise ShapeError(f"{where}: activation {layer.tag!r} concatenated twice")
            used_concat.add(layer.tag)
            if shape[1:] != src[1:]:
                raise ShapeError(f"{where}: spatial {shape[1:]} vs saved {src[1:]}")
            shape = (shape[0] + src[0],) + shape[1:]
        elif isinstance(layer, Flatten):
            n = 1
            for d in shape:
                n *= d
            shape = (n,)
        elif isinstance(layer, Linear):
            _need_rank(shape, 1, where)
            if shape[0] != layer.in_features:
                raise ShapeError(f"{where}: expects {layer.in_features} features, gets {shape[0]}")
            shape = (layer.out_features,)
        elif isinstance(layer, (ReLU, Sigmoid, SoftmaxOverChannels)):
            pass
        else:
            raise ShapeError(f"{where}: unknown layer type")
        shapes.append(shape)
    return shapes


def _need_rank(shape, rank, where):
    if len(shape) != rank:
        raise ShapeError(f"{where}: expects rank-{rank} input (batch excluded), gets {shape}")


def _cbr(in_ch, out_ch, kernel=3, stride=1, padding=1):
    return [Conv2d(in_ch, out_ch, kernel, stride, padding), BatchNorm2d(out_ch), ReLU()]


VGG16_BLOCKS = [[64, 64], [128, 128], [256, 256, 256], [512, 512, 512], [512, 512, 512]]


def segmenter_blocks(scale: str) -> List[List[int]]:
    if scale == "full":
        return [list(b) for b in VGG16_BLOCKS]
    if scale == "tiny":
        return [[c // 8 for c in b] for b in VGG16_BLOCKS[:-1]]
    raise ValueError(f"unknown scale {scale!r}")


def build_vgg16_convs(in_ch: int = 3, size: int = 224) -> NetworkSpec:
    """The 13-layer VGG16 convolutional stack (conv+ReLU, 2x2 max pools)."""
    layers: List[LayerSpec] = []
    c = in_ch
    for b, widths in enumerate(VGG16_BLOCKS):
        for width in widths:
            layers += [Conv2d(c, width, 3, 1, 1), ReLU()]
            c = width
        layers.append(MaxPool2x2(f"p{b + 1}"))
    return NetworkSpec("vgg16_convs", layers, (in_ch, size, size), "feature_map")


def build_segmenter(scale: str = "tiny") -> NetworkSpec:
    """Encoder-decoder segmenter with index-propagating unpooling.

    Encoder: VGG16 block pattern, every conv followed by BatchNorm+ReLU,
    each block closed by an index-exporting pool. Decoder mirrors it: unpool
    with the block's indices, concatenate the block's pre-pool activation,
    then the mirrored convs (first one halves the doubled channels, last one
    maps to the next shallower block's width). A 1x1 conv and sigmoid give
    the one-channel probability map.
    """
    blocks = segmenter_blocks(scale)
    size = 512 if scale == "full" else 64
    layers: List[LayerSpec] = []
    c = 1
    for b, widths in enumerate(blocks):
        for width in widths:
            layers += _cbr(c, width)
            c = width
        layers.append(MaxPool2x2(f"enc{b + 1}"))
    for b in range(len(blocks) - 1, -1, -1):
        widths = blocks[b]
        layers += [MaxUnpool2x2(f"enc{b + 1}"), ConcatChannels(f"enc{b + 1}")]
        c = 2 * widths[-1]
        target = blocks[b - 1][-1] if b > 0 else widths[0]
        for j in range(len(widths)):
            out = target if j == len(widths) - 1 else widths[-1]
            layers += _cbr(c, out)
            c = out
    layers += [Conv2d(c, 1, 1, 1, 0), Sigmoid()]
    return NetworkSpec(f"segmenter_{scale}", layers, (1, size, size), "pixel_map")


def build_discriminator(scale: str = "tiny", size: int = None) -> NetworkSpec:
    """Strided conv stack judging a (ground truth, prediction) channel pair.

    conv(k4, s2, p1)+BatchNorm+ReLU stages with widths 16/32/64/64 (tiny) or
    64/128/256/256 (full), continuing at the last width until the map is at
    most 4x4; then flatten, linear to 2 and softmax. The linear layer ties
    the network to one input ``size`` (default 64 tiny, 512 full).
    """
    if scale == "tiny":
        widths, default = [16, 32, 64, 64], 64
    elif scale == "full":
        widths, default = [64, 128, 256, 256], 512
    else:
        raise ValueError(f"unknown scale {scale!r}")
    size = size or default
    layers: List[LayerSpec] = []
    c, s, stage = 2, size, 0
    while stage < len(widths) or s > 4:
        width = widths[min(stage, len(widths) - 1)]
        layers += _cbr(c, width, kernel=4, stride=2, padding=1)
        c, s, stage = width, s // 2, stage + 1
    layers += [Flatten(), Linear(c * s * s, 2), SoftmaxOverChannels()]
    return NetworkSpec(f"discriminator_{scale}", layers, (2, size, size), "class_scores")


CLASSIFIER_C3 = 32


def build_classifier() -> NetworkSpec:
    """Modified LeNet for 64x64 patches: three k5 convs, FC-256, FC-2, softmax.

    The first conv is zero-padded by 2 so every pooled map stays even-sized
    (64 -> 64 -> 32 -> 28 -> 14 -> 10 -> 5).
    """
    layers: List[LayerSpec] = [
        Conv2d(1, 6, 5, 1, 2),
        ReLU(),
        MaxPool2x2("p1"),
        Conv2d(6, 16, 5),
        ReLU(),
        MaxPool2x2("p2"),
        Conv2d(16, CLASSIFIER_C3, 5),
        ReLU(),
        MaxPool2x2("p3"),
        Flatten(),
        Linear(CLASSIFIER_C3 * 5 * 5, 256),
        ReLU(),
        Linear(256, 2),
        SoftmaxOverChannels(),
    ]
    return NetworkSpec("classifier", layers, (1, 64, 64), "class_scores")


BUILDERS = {
    "segmenter": build_segmenter,
    "discriminator": build_discriminator,
    "classifier": lambda scale="tiny": build_classifier(),
    "vgg16": lambda scale="full": build_vgg16_convs(),
}

"""Parameter storage for a :class:`NetworkSpec`, its initialization and ``.wts`` files.

``.wts`` layout: magic ``WTS1``, u32 entry count, then per entry a u32 layer
index, a u8 role code and an embedded ``.ten`` tensor.
"""

import io
import struct
from pathlib import Path
from typing import Dict, Iterator, Tuple

import numpy as np

from .._io import atomic_write_bytes, read_exact
from ..errors import FormatError, ShapeError
from ..tensor import Tensor, read_ten, write_ten
from .spec import BatchNorm2d, Conv2d, Linear, NetworkSpec

ROLE_CODES = {"weight": 0, "bias": 1, "gamma": 2, "beta": 3, "running_mean": 4, "running_var": 5}
CODE_ROLES = {v: k for k, v in ROLE_CODES.items()}
TRAINABLE_ROLES = ("weight", "bias", "gamma", "beta")
WTS_MAGIC = b"WTS1"


class WeightStore:
    """Map ``layer index -> {role -> Tensor}``.

    Trainable roles carry ``requires_grad=True``; batch-norm running
    statistics are plain tensors updated in place.
    """

    def __init__(self, entries: Dict[int, Dict[str, Tensor]] = None):
        self.entries: Dict[int, Dict[str, Tensor]] = entries or {}

    def __getitem__(self, layer_index: int) -> Dict[str, Tensor]:
        return self.entries[layer_index]

    def __contains__(self, layer_index: int) -> bool:
        return layer_index in self.entries

    def items(self) -> Iterator[Tuple[int, str, Tensor]]:
        for idx in sorted(self.entries):
            for role in sorted(self.entries[idx], key=ROLE_CODES.__getitem__):
                yield idx, role, self.entries[idx][role]

    def trainable(self) -> Iterator[Tuple[Tuple[int, str], Tensor]]:
        for idx, role, t in self.items():
            if role in TRAINABLE_ROLES:
                yield (idx, role), t

    def zero_grad(self) -> None:
        for _, t in self.trainable():
            t.grad = None

    def copy(self) -> "WeightStore":
        out = {}
        for idx, role, t in self.items():
            out.setdefault(idx, {})[role] = Tensor(t.data.copy(), requires_grad=t.requires_grad)
        return WeightStore(out)

    def astype(self, dtype) -> "WeightStore":
        out = {}
        for idx, role, t in self.items():
            out.setdefault(idx, {})[role] = Tensor(t.data.astype(dtype), requires_grad=t.requires_grad)
        return WeightStore(out)

    def equals(self, other: "WeightStore") -> bool:
        """Bitwise equality of every stored array."""
        mine, theirs = list(self.items()), list(other.items())
        if [(i, r) for i, r, _ in mine] != [(i, r) for i, r, _ in theirs]:
            return False
        return all(
            a.data.dtype == b.data.dtype and a.shape == b.shape and a.data.tobytes() == b.data.tobytes()
            for (_, _, a), (_, _, b) in zip(mine, theirs)
        )


def param_shapes(spec: NetworkSpec) -> Dict[int, Dict[str, Tuple[int, ...]]]:
    shapes = {}
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Conv2d):
            shapes[i] = {"weight": (layer.out_ch, layer.in_ch, layer.kernel, layer.kernel), "bias": (layer.out_ch,)}
        elif isinstance(layer, Linear):
            shapes[i] = {"weight": (layer.in_features, layer.out_features), "bias": (layer.out_features,)}
        elif isinstance(layer, BatchNorm2d):
            c = (layer.ch,)
            shapes[i] = {"gamma": c, "beta": c, "running_mean": c, "running_var": c}
    return shapes


def init_weights(spec: NetworkSpec, seed: int, dtype=np.float32) -> WeightStore:
    """Fan-in (He) normal init for conv/linear weights, zero biases, gamma=1, beta=0."""
    rng = np.random.default_rng(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    entries = {}
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Conv2d):
            fan_in = layer.in_ch * layer.kernel * layer.kernel
            w = rng.standard_normal((layer.out_ch, layer.in_ch, layer.kernel, layer.kernel)) * np.sqrt(2.0 / fan_in)
            entries[i] = {
                "weight": Tensor(w.astype(dtype), requires_grad=True),
                "bias": Tensor(np.zeros(layer.out_ch, dtype), requires_grad=True),
            }
        elif isinstance(layer, Linear):
            w = rng.standard_normal((layer.in_features, layer.out_features)) * np.sqrt(2.0 / layer.in_features)
            entries[i] = {
                "weight": Tensor(w.astype(dtype), requires_grad=True),
                "bias": Tensor(np.zeros(layer.out_features, dtype), requires_grad=True),
            }
        elif isinstance(layer, BatchNorm2d):
            entries[i] = {
                "gamma": Tensor(np.ones(layer.ch, dtype), requires_grad=True),
                "beta": Tensor(np.zeros(layer.ch, dtype), requires_grad=True),
                "running_mean": Tensor(np.zeros(layer.ch, dtype)),
                "running_var": Tensor(np.ones(layer.ch, dtype)),
            }
    return WeightStore(entries)


def check_weights(spec: NetworkSpec, store: WeightStore) -> None:
    """Every parameterized layer has exactly its expected tensors."""
    expected = param_shapes(spec)
    if set(expected) != set(store.entries):
        raise ShapeError(
            f"weight store layers {sorted(store.entries)} do not match network layers {sorted(expected)}"
        )
    for i, roles in expected.items():
        got = {r: t.shape for r, t in store[i].items()}
        if got != roles:
            raise ShapeError(f"layer {i}: weight shapes {got} != expected {roles}")


def weights_to_bytes(store: WeightStore) -> bytes:
    buf = io.BytesIO()
    items = list(store.items())
    buf.write(WTS_MAGIC)
    buf.write(struct.pack("<I", len(items)))
    for idx, role, t in items:
        buf.write(struct.pack("<IB", idx, ROLE_CODES[role]))
        write_ten(buf, t)
    return buf.getvalue()


def weights_from_bytes(payload: bytes) -> WeightStore:
    stream = io.BytesIO(payload)
    magic = read_exact(stream, 4, ".wts magic")
    if magic != WTS_MAGIC:
        raise FormatError(f"bad .wts magic {magic!r}")
    (count,) = struct.unpack("<I", read_exact(stream, 4, ".wts entry count"))
    entries: Dict[int, Dict[str, Tensor]] = {}
    for _ in range(count):
        idx, code = struct.unpack("<IB", read_exact(stream, 5, ".wts entry header"))
        if code not in CODE_ROLES:
            raise FormatError(f"unknown .wts role code {code}")
        role = CODE_ROLES[code]
        arr = read_ten(stream)
        if role in entries.get(idx, {}):
            raise FormatError(f"duplicate .wts entry for layer {idx} role {role}")
        entries.setdefault(idx, {})[role] = Tensor(arr, requires_grad=role in TRAINABLE_ROLES)
    if stream.read(1):
        raise FormatError("trailing bytes after last .wts entry")
    return WeightStore(entries)


def save_weights(store: WeightStore, path) -> None:
    atomic_write_bytes(path, weights_to_bytes(store))


def load_weights(path) -> WeightStore:
    return weights_from_bytes(Path(path).read_bytes())

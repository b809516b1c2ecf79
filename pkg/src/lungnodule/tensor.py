"""Dense tensors with reverse-mode automatic differentiation.

A :class:`Tensor` wraps a numpy array. Operations on tensors that require
gradients record a :class:`Node` holding the inputs and a backward closure;
:func:`backward` orders those nodes into a :class:`Tape` and propagates the
gradient of a scalar loss back to every leaf tensor with ``requires_grad``.

Conventions:

* no implicit broadcasting; binary operands must share a shape, the only
  exception being Python scalar constants;
* ``relu'(0) = 0``;
* gradients accumulate into ``Tensor.grad`` across calls until
  :meth:`Tensor.zero_grad`.
"""

import contextlib
import io
import struct
import threading
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np

from ._io import atomic_write_bytes, read_exact
from .errors import FormatError, NumericalError, ShapeError

__all__ = [
    "Tensor",
    "Node",
    "Tape",
    "no_grad",
    "is_grad_enabled",
    "precision",
    "get_default_dtype",
    "make_result",
    "elementwise",
    "add",
    "sub",
    "mul",
    "scale",
    "add_constant",
    "relu",
    "sigmoid",
    "log",
    "neg",
    "where",
    "reshape",
    "reduce",
    "tensor_sum",
    "tensor_mean",
    "backward",
    "grad_check",
    "save_tensor",
    "load_tensor",
    "write_ten",
    "read_ten",
]

_state = threading.local()


def _get(name, default):
    return getattr(_state, name, default)


def is_grad_enabled() -> bool:
    return _get("grad_enabled", True)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    prev = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


def get_default_dtype():
    return _get("dtype", np.float32)


@contextlib.contextmanager
def precision(dtype):
    """Set the default floating dtype for newly created tensors."""
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported precision {dtype}")
    prev = get_default_dtype()
    _state.dtype = dtype
    try:
        yield
    finally:
        _state.dtype = prev


class Node:
    """Record of one differentiable operation."""

    __slots__ = ("op", "inputs", "backward_fn")

    def __init__(self, op: str, inputs: Sequence["Tensor"], backward_fn: Callable):
        self.op = op
        self.inputs = tuple(inputs)
        self.backward_fn = backward_fn


class Tensor:
    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            if isinstance(data, (np.ndarray, np.generic)) and data.dtype in (np.float32, np.float64):
                dtype = data.dtype
            else:
                dtype = get_default_dtype()
        arr = np.asarray(data, dtype=dtype)
        # ascontiguousarray would promote 0-d scalars to shape (1,)
        self.data = arr if arr.flags.c_contiguous else arr.copy()
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self.node: Optional[Node] = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __len__(self):
        return len(self.data)

    def __add__(self, other):
        return add_constant(self, other) if _is_scalar(other) else add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add_constant(self, -other) if _is_scalar(other) else sub(self, other)

    def __rsub__(self, other):
        return add_constant(neg(self), other)

    def __mul__(self, other):
        return scale(self, other) if _is_scalar(other) else mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = shape[0]
        return reshape(self, tuple(shape))

    def sum(self):
        return tensor_sum(self)

    def mean(self):
        return tensor_mean(self)


def _is_scalar(x) -> bool:
    return isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_result(data: np.ndarray, inputs: Sequence[Tensor], backward_fn: Callable, op: str) -> Tensor:
    """Wrap ``data`` as the output of an operation on ``inputs``.

    ``backward_fn(grad_out)`` must return one gradient array (or ``None``) per
    input, in order. The node is only recorded when recording is enabled and
    some input requires a gradient.
    """
    out = Tensor(data)
    if is_grad_enabled() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.node = Node(op, inputs, backward_fn)
    return out


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------- elementwise

def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape(a, b, "add")
    return make_result(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape(a, b, "sub")
    return make_result(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return make_result(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = a.data.dtype.type(c)
    return make_result(a.data * c, (a,), lambda g: (g * c,), "scale")


def add_constant(a: Tensor, c: float) -> Tensor:
    c = a.data.dtype.type(c)
    return make_result(a.data + c, (a,), lambda g: (g,), "add_constant")


def neg(a: Tensor) -> Tensor:
    return make_result(-a.data, (a,), lambda g: (-g,), "neg")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return make_result(np.where(mask, a.data, a.data.dtype.type(0)), (a,), lambda g: (g * mask,), "relu")


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    # two-branch form avoids overflow in exp for large |x|
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype, copy=False)
    return make_result(out, (a,), lambda g: (g * out * (1 - out),), "sigmoid")


def log(a: Tensor) -> Tensor:
    x = a.data
    if np.any(x <= 0):
        bad = x[x <= 0].reshape(-1)[0]
        raise ValueError(f"log of non-positive value {bad!r}")
    return make_result(np.log(x), (a,), lambda g: (g / x,), "log")


_ELEMENTWISE = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "scale": scale,
    "relu": relu,
    "sigmoid": sigmoid,
    "log": log,
    "neg": neg,
}


def elementwise(op_kind: str, a: Tensor, b=None) -> Tensor:
    """Dispatch by name; ``b`` is a tensor for binary ops and a constant for ``scale``."""
    try:
        fn = _ELEMENTWISE[op_kind]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op_kind!r}") from None
    if op_kind in ("add", "sub", "mul", "scale"):
        if b is None:
            raise ValueError(f"{op_kind} needs a second operand")
        return fn(a, b)
    return fn(a)


def where(cond: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Select from ``a`` where the constant boolean ``cond`` holds, else from ``b``."""
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape(a, b, "where")
    cond = np.asarray(cond, dtype=bool)
    if cond.shape != a.shape:
        raise ShapeError(f"where: condition shape {cond.shape} vs operand shape {a.shape}")
    zero = a.data.dtype.type(0)
    return make_result(
        np.where(cond, a.data, b.data),
        (a, b),
        lambda g: (np.where(cond, g, zero), np.where(cond, zero, g)),
        "where",
    )


def reshape(a: Tensor, shape) -> Tensor:
    src = a.shape
    return make_result(a.data.reshape(shape), (a,), lambda g: (g.reshape(src),), "reshape")


# ----------------------------------------------------------------- reductions

def tensor_sum(a: Tensor) -> Tensor:
    if a.size == 0:
        raise ValueError("sum of empty tensor")
    shape, dtype = a.shape, a.dtype
    return make_result(
        np.asarray(a.data.sum(), dtype=dtype), (a,), lambda g: (np.full(shape, g, dtype=dtype),), "sum"
    )


def tensor_mean(a: Tensor) -> Tensor:
    if a.size == 0:
        raise ValueError("mean of empty tensor")
    shape, dtype, n = a.shape, a.dtype, a.size
    return make_result(
        np.asarray(a.data.sum() / n, dtype=dtype),
        (a,),
        lambda g: (np.full(shape, g / n, dtype=dtype),),
        "mean",
    )


def reduce(kind: str, a: Tensor) -> Tensor:
    if kind == "sum":
        return tensor_sum(a)
    if kind == "mean":
        return tensor_mean(a)
    raise ValueError(f"unknown reduction {kind!r}")


# ------------------------------------------------------------------- backward

class Tape:
    """Topologically ordered record of the operations a loss depends on.

    Every entry appears after the producers of its inputs.
    """

    def __init__(self, entries: List[Tensor]):
        self.entries = entries

    @classmethod
    def from_loss(cls, loss: Tensor) -> "Tape":
        order: List[Tensor] = []
        seen = set()
        stack = [(loss, False)]
        while stack:
            t, expanded = stack.pop()
            if expanded:
                order.append(t)
                continue
            if id(t) in seen:
                continue
            seen.add(id(t))
            stack.append((t, True))
            if t.node is not None:
                for inp in reversed(t.node.inputs):
                    if inp.requires_grad and id(inp) not in seen:
                        stack.append((inp, False))
        return cls(order)

    def __len__(self):
        return len(self.entries)

    @property
    def ops(self) -> List[str]:
        return [t.node.op for t in self.entries if t.node is not None]


def backward(loss: Tensor) -> Tape:
    """Propagate d(loss)/d(leaf) into ``leaf.grad`` for every reachable leaf."""
    if loss.size != 1 or loss.ndim > 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss is detached from the graph (requires_grad is False)")
    tape = Tape.from_loss(loss)
    grads = {id(loss): np.ones(loss.shape, dtype=loss.dtype)}
    for t in reversed(tape.entries):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        if t.node is None:
            t.grad = g.copy() if t.grad is None else t.grad + g
            continue
        in_grads = t.node.backward_fn(g)
        for inp, ig in zip(t.node.inputs, in_grads):
            if ig is None or not inp.requires_grad:
                continue
            ig = np.asarray(ig, dtype=inp.dtype)
            if ig.shape != inp.shape:
                raise ShapeError(f"{t.node.op}: gradient shape {ig.shape} != input shape {inp.shape}")
            prev = grads.get(id(inp))
            grads[id(inp)] = ig if prev is None else prev + ig
    return tape


def grad_check(function: Callable[[Tensor], Tensor], point, epsilon: float = 1e-5) -> float:
    """Max relative error between backprop and central differences.

    The error per coordinate is ``|analytic - numeric| / max(1, |analytic|)``.
    """
    point = _as_tensor(point)
    if point.dtype != np.float64:
        raise ValueError("grad_check requires a float64 point")
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon {epsilon} outside [1e-7, 1e-3]")
    x = Tensor(point.data.copy(), requires_grad=True)
    y = function(x)
    backward(y)
    analytic = x.grad if x.grad is not None else np.zeros_like(x.data)
    numeric = np.empty_like(analytic)
    base = point.data.copy()
    flat = base.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            fp = float(function(Tensor(base.copy())).data)
            flat[i] = orig - epsilon
            fm = float(function(Tensor(base.copy())).data)
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NumericalError(f"non-finite function value at perturbed coordinate {i}")
            numeric.reshape(-1)[i] = (fp - fm) / (2 * epsilon)
    err = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
    return float(err.max()) if err.size else 0.0


# ------------------------------------------------------------------ .ten files

TEN_MAGIC = b"TEN1"
_DTYPE_CODES = {np.dtype("<f4"): 0, np.dtype("<f8"): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def write_ten(stream, array) -> None:
    """Serialize one array: magic, u32 rank, u32 dims, u8 dtype code, LE payload."""
    arr = array.data if isinstance(array, Tensor) else np.asarray(array)
    dt = arr.dtype.newbyteorder("<")
    if dt not in _DTYPE_CODES:
        raise ValueError(f".ten supports float32/float64 only, got {arr.dtype}")
    stream.write(TEN_MAGIC)
    stream.write(struct.pack("<I", arr.ndim))
    stream.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    stream.write(struct.pack("<B", _DTYPE_CODES[dt]))
    stream.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def read_ten(stream) -> np.ndarray:
    magic = read_exact(stream, 4, ".ten magic")
    if magic != TEN_MAGIC:
        raise FormatError(f"bad .ten magic {magic!r}")
    (rank,) = struct.unpack("<I", read_exact(stream, 4, ".ten rank"))
    if rank > 32:
        raise FormatError(f"implausible .ten rank {rank}")
    dims = struct.unpack(f"<{rank}I", read_exact(stream, 4 * rank, ".ten dims"))
    (code,) = struct.unpack("<B", read_exact(stream, 1, ".ten dtype code"))
    if code not in _CODE_DTYPES:
        raise FormatError(f"unknown .ten dtype code {code}")
    dt = _CODE_DTYPES[code]
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    payload = read_exact(stream, count * dt.itemsize, ".ten payload")
    return np.frombuffer(payload, dtype=dt).reshape(dims).astype(dt.newbyteorder("="))


def save_tensor(path, tensor) -> None:
    buf = io.BytesIO()
    write_ten(buf, tensor)
    atomic_write_bytes(path, buf.getvalue())


def load_tensor(path) -> Tensor:
    with open(Path(path), "rb") as fh:
        arr = read_ten(fh)
        if fh.read(1):
            raise FormatError(f"trailing bytes after .ten payload in {path}")
    return Tensor(arr)

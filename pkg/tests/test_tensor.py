import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lungnodule.errors import FormatError, NumericalError, ShapeError
from lungnodule.tensor import (
    Tape,
    Tensor,
    add,
    backward,
    elementwise,
    grad_check,
    load_tensor,
    log,
    mul,
    no_grad,
    precision,
    read_ten,
    reduce,
    relu,
    save_tensor,
    scale,
    sigmoid,
    tensor_mean,
    tensor_sum,
    where,
    write_ten,
)

finite = st.floats(-10, 10, allow_nan=False, width=64)


def t64(a, grad=True):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=grad)


# ---------------------------------------------------------------- forward values


def test_relu_values():
    assert relu(t64([-1.0, 0.0, 2.0])).data.tolist() == [0.0, 0.0, 2.0]


def test_sigmoid_symmetry_point():
    assert sigmoid(t64([0.0])).data.tolist() == [0.5]


def test_sigmoid_is_stable_at_extremes():
    out = sigmoid(t64([-1000.0, 1000.0])).data
    assert np.all(np.isfinite(out))
    assert out[0] == pytest.approx(0.0, abs=1e-300) and out[1] == 1.0


def test_add_values():
    assert add(t64([1.0, 2.0]), t64([3.0, 4.0])).data.tolist() == [4.0, 6.0]


def test_elementwise_dispatch_matches_named_ops():
    a, b = t64([1.0, -2.0, 3.0]), t64([0.5, 4.0, -1.0])
    assert elementwise("sub", a, b).data.tolist() == [0.5, -6.0, 4.0]
    assert elementwise("mul", a, b).data.tolist() == [0.5, -8.0, -3.0]
    assert elementwise("neg", a).data.tolist() == [-1.0, 2.0, -3.0]
    assert elementwise("scale", a, 2.0).data.tolist() == [2.0, -4.0, 6.0]
    with pytest.raises(ValueError):
        elementwise("pow", a, b)


def test_binary_ops_reject_broadcasting_and_name_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2,\).*\(3,\)"):
        add(t64([1.0, 2.0]), t64([1.0, 2.0, 3.0]))
    with pytest.raises(ShapeError):
        mul(t64(np.ones((2, 3))), t64(np.ones(3)))


def test_scalar_constants_are_the_only_broadcast():
    x = t64([1.0, 2.0])
    assert (x + 1.0).data.tolist() == [2.0, 3.0]
    assert (x * 3).data.tolist() == [3.0, 6.0]
    assert (1.0 - x).data.tolist() == [0.0, -1.0]


def test_log_rejects_non_positive():
    with pytest.raises(ValueError):
        log(t64([1.0, 0.0]))
    with pytest.raises(ValueError):
        log(t64([-1.0]))


def test_reductions():
    assert reduce("sum", t64([1.0, 2.0, 3.0])).item() == 6.0
    assert reduce("mean", t64([2.0, 4.0])).item() == 3.0
    assert tensor_mean(t64(np.full((64, 64), 0.5))).item() == 0.5
    with pytest.raises(ValueError):
        tensor_sum(t64(np.zeros(0)))
    with pytest.raises(ValueError):
        reduce("max", t64([1.0]))


# ---------------------------------------------------------------- backward


def test_grad_of_sum_is_ones():
    x = t64(np.arange(12.0).reshape(3, 4))
    backward(tensor_sum(x))
    assert np.array_equal(x.grad, np.ones((3, 4)))


def test_grad_of_mean_square():
    # mean(x^2) over [1, 2]: d/dx_i = x_i
    x = t64([1.0, 2.0])
    backward(tensor_mean(mul(x, x)))
    assert x.grad.tolist() == [1.0, 2.0]


def test_grad_through_sigmoid_constant():
    c = t64([3.0])
    loss = tensor_sum(mul(sigmoid(t64([0.0], grad=False)), c))
    backward(loss)
    assert c.grad.tolist() == [0.5]


def test_relu_derivative_at_zero_is_zero():
    x = t64([-1.0, 0.0, 1.0])
    backward(tensor_sum(relu(x)))
    assert x.grad.tolist() == [0.0, 0.0, 1.0]


def test_backward_rejects_non_scalar_and_detached():
    x = t64([1.0, 2.0])
    with pytest.raises(ShapeError):
        backward(mul(x, x))
    with pytest.raises(ValueError):
        backward(Tensor(np.array(1.0)))
    with pytest.raises(ValueError):
        backward(tensor_sum(x).detach())


def test_repeated_backward_accumulates():
    x = t64([1.0, -1.0])
    backward(tensor_sum(scale(x, 2.0)))
    backward(tensor_sum(scale(x, 2.0)))
    assert x.grad.tolist() == [4.0, 4.0]
    x.zero_grad()
    assert x.grad is None


def test_grads_land_on_leaves_only():
    x = t64([1.0, 2.0])
    h = mul(x, x)
    backward(tensor_sum(h))
    assert h.grad is None
    assert x.grad.tolist() == [2.0, 4.0]


def test_reused_input_gets_both_contributions():
    x = t64([3.0])
    backward(tensor_sum(add(mul(x, x), x)))
    assert x.grad.tolist() == [7.0]


def test_no_grad_builds_no_graph():
    x = t64([1.0])
    with no_grad():
        y = mul(x, x)
    assert y.node is None and not y.requires_grad


def test_tape_is_topological():
    x = t64([1.0, 2.0])
    a = relu(x)
    b = sigmoid(a)
    c = mul(a, b)
    loss = tensor_sum(c)
    tape = Tape.from_loss(loss)
    order = {id(t): i for i, t in enumerate(tape.entries)}
    for t in tape.entries:
        if t.node is None:
            continue
        for parent in t.node.inputs:
            if parent.node is not None:
                assert order[id(parent)] < order[id(t)]
    assert tape.ops[-1] == "sum"


def test_where_routes_gradients():
    a, b = t64([1.0, 2.0, 3.0]), t64([10.0, 20.0, 30.0])
    cond = np.array([True, False, True])
    out = where(cond, a, b)
    assert out.data.tolist() == [1.0, 20.0, 3.0]
    backward(tensor_sum(out))
    assert a.grad.tolist() == [1.0, 0.0, 1.0]
    assert b.grad.tolist() == [0.0, 1.0, 0.0]


def test_default_precision_is_32_bit_and_switchable():
    assert Tensor([1.0]).dtype == np.float32
    with precision(np.float64):
        assert Tensor([1.0]).dtype == np.float64
    assert Tensor([1.0]).dtype == np.float32


# ---------------------------------------------------------------- grad_check


def test_grad_check_sum_is_exact():
    assert grad_check(tensor_sum, np.random.default_rng(0).normal(size=(3, 4))) < 1e-10


def test_grad_check_relu_square_mean():
    rng = np.random.default_rng(1)
    p = rng.normal(size=20)
    p[np.abs(p) < 1e-2] = 0.5
    assert grad_check(lambda x: tensor_mean(mul(relu(x), relu(x))), p) < 1e-6


def test_grad_check_rejects_bad_setup():
    with pytest.raises(ValueError):
        grad_check(tensor_sum, np.ones(3, dtype=np.float32))
    with pytest.raises(ValueError):
        grad_check(tensor_sum, np.ones(3), epsilon=1e-2)
    with pytest.raises(ValueError):
        grad_check(tensor_sum, np.ones(3), epsilon=1e-9)


def test_grad_check_rejects_non_finite_values():
    with pytest.raises((NumericalError, ValueError)):
        grad_check(lambda x: tensor_sum(log(x)), np.array([1e-7, 1.0]), epsilon=1e-5)


@pytest.mark.parametrize("op", ["sigmoid", "relu", "mul", "sub", "log", "where"])
def test_elementwise_grad_check_random_points(op):
    rng = np.random.default_rng(hash(op) % 2**32)
    other = t64(rng.normal(size=(3, 5)), grad=False)
    cond = rng.random((3, 5)) < 0.5
    fns = {
        "sigmoid": lambda x: tensor_sum(mul(sigmoid(x), other)),
        "relu": lambda x: tensor_sum(mul(relu(x), other)),
        "mul": lambda x: tensor_sum(mul(mul(x, x), other)),
        "sub": lambda x: tensor_mean(mul(x - other, x - other)),
        "log": lambda x: tensor_sum(mul(log(mul(x, x) + 0.5), other)),
        "where": lambda x: tensor_sum(mul(where(cond, x, scale(x, 3.0)), other)),
    }
    for _ in range(100):
        p = rng.normal(size=(3, 5))
        p[np.abs(p) < 1e-3] = 0.1  # stay off the relu kink
        assert grad_check(fns[op], p) < 1e-4


# ---------------------------------------------------------------- properties


@given(arrays(np.float64, st.integers(1, 6), elements=finite), st.data())
def test_add_mul_commute_and_identities(a, data):
    b = data.draw(arrays(np.float64, a.shape, elements=finite))
    ta, tb = t64(a, False), t64(b, False)
    assert np.array_equal(add(ta, tb).data, add(tb, ta).data)
    assert np.array_equal(mul(ta, tb).data, mul(tb, ta).data)
    assert np.array_equal(scale(ta, 1.0).data, a)
    assert np.array_equal((ta + 0.0).data, a)


@given(arrays(np.float64, st.integers(1, 6), elements=finite))
def test_backward_is_linear_in_the_loss(a):
    x1, x2, x3 = t64(a), t64(a), t64(a)
    # each loss uses x once, so accumulation involves no reassociation
    f = lambda x: tensor_sum(sigmoid(x))  # noqa: E731
    g = lambda x: tensor_sum(relu(scale(x, 2.0)))  # noqa: E731
    backward(f(x1))
    backward(g(x2))
    backward(f(x3) + g(x3))
    assert np.array_equal(x3.grad, x1.grad + x2.grad)


# ---------------------------------------------------------------- .ten format


@given(
    st.sampled_from([np.float32, np.float64]),
    st.lists(st.integers(0, 4), min_size=0, max_size=4),
    st.integers(0, 2**31),
)
def test_ten_round_trip_bit_exact(dtype, shape, seed):
    arr = np.random.default_rng(seed).normal(size=shape).astype(dtype)
    buf = io.BytesIO()
    write_ten(buf, arr)
    back = read_ten(io.BytesIO(buf.getvalue()))
    assert back.dtype == dtype and back.shape == arr.shape
    assert back.tobytes() == arr.tobytes()


def test_ten_layout():
    buf = io.BytesIO()
    write_ten(buf, np.array([[1.0, 2.0]], dtype=np.float32))
    raw = buf.getvalue()
    assert raw[:4] == b"TEN1"
    assert raw[4:8] == (2).to_bytes(4, "little")
    assert raw[8:16] == (1).to_bytes(4, "little") + (2).to_bytes(4, "little")
    assert raw[16] == 0
    assert np.frombuffer(raw[17:], "<f4").tolist() == [1.0, 2.0]


def test_ten_file_rejects_corruption(tmp_path):
    p = tmp_path / "a.ten"
    save_tensor(p, Tensor(np.arange(6.0).reshape(2, 3), dtype=np.float64))
    assert load_tensor(p).data.tolist() == [[0, 1, 2], [3, 4, 5]]
    raw = p.read_bytes()
    for bad in (raw[:-1], raw[:10], b"TENX" + raw[4:], raw + b"\0", raw[:16] + b"\x07" + raw[17:]):
        p.write_bytes(bad)
        with pytest.raises(FormatError):
            load_tensor(p)


def test_ten_rejects_unsupported_dtype():
    with pytest.raises(ValueError):
        write_ten(io.BytesIO(), np.arange(3))

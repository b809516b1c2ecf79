"""
Reverse-mode gradients and a finite-difference check
=====================================================

Build a small graph by hand, backpropagate, then compare every gradient
against central differences.
"""

import numpy as np

from lungnodule import Tensor, backward, grad_check
from lungnodule.nn import functional as F
from lungnodule.tensor import mul, relu, tensor_mean

rng = np.random.default_rng(0)

# a 3x3 conv followed by ReLU and a mean: one scalar out
w = Tensor(rng.normal(size=(4, 1, 3, 3)), requires_grad=True)
b = Tensor(np.zeros(4), requires_grad=True)
x = Tensor(rng.normal(size=(2, 1, 8, 8)))

loss = tensor_mean(relu(F.conv2d(x, w, b, stride=1, padding=1)))
tape = backward(loss)
print("loss", loss.item())
print("ops on the tape:", " -> ".join(tape.ops))
print("d loss / d bias", np.round(b.grad, 4))

# the same function of w alone, checked numerically in float64
r = Tensor(rng.normal(size=(2, 4, 8, 8)))
err = grad_check(lambda ww: tensor_mean(mul(F.conv2d(x, ww, b, 1, 1), r)), w.data)
print(f"max relative gradient error {err:.2e}")

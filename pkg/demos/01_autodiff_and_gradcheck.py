#!/usr/bin/env python3
"""Tour of the autodiff core: build tensors, differentiate, verify by finite differences."""

import numpy as np

from acmnet import ops
from acmnet.gradcheck import check_grad, numeric_grad
from acmnet.tensor import Tensor

rng = np.random.default_rng(0)

# A tensor records its producers; backward() fills .grad on everything reachable.
x = Tensor(np.array([1.0, 2.0, -3.0]), requires_grad=True)
loss = ops.sum_(ops.mul(x, x))
loss.backward()
print("d(sum x^2)/dx =", x.grad, "(expect 2x)")

# Convolution: 4x4 ones with a 3x3 ones kernel, padded. Corners see 4 taps, the center 9.
img = Tensor(np.ones((1, 4, 4)))
kernel = Tensor(np.ones((1, 1, 3, 3)))
out = ops.conv2d(img, kernel, stride=1, padding=1)
print("\nbox-filter response:\n", out.data[0])

# The finite-difference oracle is the ground truth for every op's gradient.
w = rng.uniform(-1, 1, (2, 3, 3, 3))
probe = rng.uniform(-1, 1, (2, 6, 6))
err = check_grad(
    lambda t: ops.sum_(ops.mul(ops.conv2d(t, Tensor(w, dtype=np.float64), stride=1, padding=1),
                               Tensor(probe, dtype=np.float64))),
    rng.uniform(-1, 1, (3, 6, 6)))
print(f"\nconv2d tape-vs-numeric relative error: {err:.2e}")

# Adjointness ties conv2d and conv_transpose2d together: <Ax, y> == <x, A^T y>.
x_arr = rng.uniform(-1, 1, (3, 8, 8))
y_arr = rng.uniform(-1, 1, (2, 4, 4))
ax = ops.conv2d(Tensor(x_arr), Tensor(w), stride=2, padding=1).data
aty = ops.conv_transpose2d(Tensor(y_arr), Tensor(w), stride=2, padding=1, output_padding=1).data
print(f"adjoint identity: <Ax,y>={float((ax * y_arr).sum()):.6f} "
      f"<x,A^T y>={float((x_arr * aty).sum()):.6f}")

# numeric_grad works on any scalar function of an array.
g = numeric_grad(lambda a: float(np.sin(a).sum()), np.array([0.0, np.pi / 2]))
print("\nnumeric grad of sum(sin):", g, "(expect cos)")

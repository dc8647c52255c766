"""Central finite-difference gradient checking.

These utilities are the independent oracle for every differentiable op and
for the assembled network. They never call backward() on the function under
test while probing: each probe evaluates the forward map twice.
"""

import numpy as np

from .tensor import Tensor


def numeric_grad(f, x, h=1e-3):
    """Dense central-difference gradient of scalar f at ndarray x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def rel_error(a, b, floor=1e-8):
    """Max elementwise relative error, ignoring entries that are ~0 on both sides."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.abs(a), np.abs(b))
    keep = denom > floor
    if not keep.any():
        return 0.0
    return float((np.abs(a - b)[keep] / denom[keep]).max())


def check_grad(make_loss, x0, h=1e-3, floor=1e-8):
    """Compare tape gradient against central differences for one input array.

    make_loss(t: Tensor) must build a scalar loss Tensor from a float64 input
    tensor. Returns the max relative error between the two gradients.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    t = Tensor(x0.copy(), requires_grad=True, dtype=np.float64)
    loss = make_loss(t)
    loss.backward()
    analytic = t.grad.copy()
    numeric = numeric_grad(lambda arr: make_loss(Tensor(arr, dtype=np.float64)).item(), x0, h=h)
    return rel_error(analytic, numeric, floor=floor)


def probe_parameters(loss_fn, params, n_probes, rng, h=1e-3, floor=1e-6):
    """Spot-check dLoss/dtheta on randomly chosen parameter entries.

    loss_fn() evaluates the current loss as a float using the live parameter
    arrays; analytic_grads maps parameter name -> full tape gradient. For each
    probe one entry is perturbed in place (and restored). Returns the list of
    (name, index, analytic, numeric, rel_err) tuples.
    """
    analytic = {}
    results = []
    loss_t = loss_fn(build=True)
    loss_t.backward()
    for p in params:
        analytic[p.name] = p.tensor.grad.copy()
        p.tensor.zero_grad()
    for _ in range(n_probes):
        p = params[rng.integers(len(params))]
        idx = rng.integers(p.size)
        flat = p.tensor.data.reshape(-1)
        orig = flat[idx]
        flat[idx] = orig + h
        fp = float(loss_fn(build=True).item())
        flat[idx] = orig - h
        fm = float(loss_fn(build=True).item())
        flat[idx] = orig
        num = (fp - fm) / (2.0 * h)
        ana = float(analytic[p.name].reshape(-1)[idx])
        denom = max(abs(ana), abs(num))
        err = 0.0 if denom < floor else abs(ana - num) / denom
        results.append((p.name, int(idx), ana, num, err))
    return results

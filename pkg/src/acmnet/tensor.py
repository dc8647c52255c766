"""Reverse-mode automatic differentiation core.

A Tensor wraps a numpy array and, when it participates in the tape, a
tuple of parent tensors plus a vector-Jacobian closure. backward() walks
the graph once in reverse topological order and accumulates gradients on
every reachable tensor with requires_grad. There is no global tape, so
independent forward passes never share gradient state.

Training runs in float32; gradient-check oracles build float64 graphs.
"""

import numpy as np

_FLOAT_TYPES = (np.float32, np.float64)


class Tensor:
    __slots__ = ("data", "requires_grad", "_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in _FLOAT_TYPES:
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self._grad = None
        self._parents = ()
        self._vjp = None

    # -- basic introspection -------------------------------------------------

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

    @property
    def grad(self):
        """Accumulated gradient; zeros for an untouched requires_grad tensor."""
        if self._grad is not None:
            return self._grad
        if self.requires_grad:
            return np.zeros_like(self.data)
        return None

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data.item()

    def detach(self):
        """A view of the same data outside the tape."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self._grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # -- backward pass -------------------------------------------------------

    def backward(self):
        """Populate grads of every tensor reachable from this scalar loss."""
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar loss, got shape {self.data.shape}")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self._grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._vjp is None or node._grad is None:
                continue
            for parent, pgrad in zip(node._parents, node._vjp(node._grad)):
                if pgrad is None:
                    continue
                if parent._grad is None:
                    parent._grad = pgrad
                else:
                    parent._grad = parent._grad + pgrad


def as_tensor(value, dtype=None):
    """Wrap a scalar or array as a constant (non-tape) Tensor."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False, dtype=dtype)


def make_op(data, sources):
    """Build an op output tensor.

    sources is a sequence of (tensor, vjp_fn) pairs; vjp_fn maps the output
    gradient to the gradient for that input. Pairs whose tensor does not
    require grad are dropped; the tape is recorded only if something remains.
    """
    live = [(t, fn) for t, fn in sources if t.requires_grad]
    out = Tensor(data, requires_grad=bool(live))
    if live:
        out._parents = tuple(t for t, _ in live)
        fns = tuple(fn for _, fn in live)
        out._vjp = lambda g, fns=fns: tuple(fn(g) for fn in fns)
    return out


class Parameter:
    """Named trainable tensor plus its Adam moment accumulators."""

    __slots__ = ("name", "tensor", "m", "v", "step")

    def __init__(self, name, data, dtype=np.float32):
        self.name = name
        self.tensor = Tensor(np.asarray(data), requires_grad=True, dtype=dtype)
        self.m = np.zeros_like(self.tensor.data)
        self.v = np.zeros_like(self.tensor.data)
        self.step = 0

    @property
    def data(self):
        return self.tensor.data

    @property
    def grad(self):
        return self.tensor.grad

    @property
    def shape(self):
        return self.tensor.shape

    @property
    def size(self):
        return self.tensor.size

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.tensor.shape})"

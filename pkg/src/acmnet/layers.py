"""Parameter registry and the small set of layers the network is built from."""

import numpy as np

from . import ops
from .errors import ConfigError
from .tensor import Parameter


def kaiming_uniform(rng, shape, fan_in, slope=0.2):
    """Kaiming-uniform fan-in init with leaky-ReLU gain."""
    bound = np.sqrt(6.0 / ((1.0 + slope * slope) * fan_in))
    return rng.uniform(-bound, bound, size=shape)


class ParamStore:
    """Ordered name -> Parameter registry for one model instance."""

    def __init__(self, rng, dtype=np.float32, slope=0.2):
        self.rng = rng
        self.dtype = dtype
        self.slope = slope
        self._params = {}

    def create(self, name, shape, init="kaiming", fan_in=None):
        if name in self._params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        if init == "zeros":
            data = np.zeros(shape)
        elif init == "kaiming":
            if fan_in is None:
                raise ConfigError(f"{name}: kaiming init needs fan_in")
            data = kaiming_uniform(self.rng, shape, fan_in, self.slope)
        else:
            data = init(self.rng, shape)
        p = Parameter(name, data, dtype=self.dtype)
        self._params[name] = p
        return p

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def __getitem__(self, name):
        return self._params[name]

    def names(self):
        return list(self._params)

    def total_size(self):
        return sum(p.size for p in self._params.values())


class Conv2d:
    def __init__(self, store, name, c_in, c_out, k=3, stride=1, bias=True):
        self.stride = stride
        self.padding = (k - 1) // 2
        self.w = store.create(f"{name}.weight", (c_out, c_in, k, k), fan_in=c_in * k * k)
        self.b = store.create(f"{name}.bias", (c_out,), init="zeros") if bias else None

    def __call__(self, x):
        return ops.conv2d(x, self.w.tensor, None if self.b is None else self.b.tensor,
                          stride=self.stride, padding=self.padding)


class ConvTranspose2d:
    """Stride-2 learned upsampling (exactly doubles spatial dims)."""

    def __init__(self, store, name, c_in, c_out, k=3):
        self.w = store.create(f"{name}.weight", (c_in, c_out, k, k), fan_in=c_in * k * k)
        self.b = store.create(f"{name}.bias", (c_out,), init="zeros")

    def __call__(self, x):
        return ops.conv_transpose2d(x, self.w.tensor, self.b.tensor,
                                    stride=2, padding=1, output_padding=1)


class Linear:
    def __init__(self, store, name, c_in, c_out, bias=True):
        self.w = store.create(f"{name}.weight", (c_out, c_in), fan_in=c_in)
        self.b = store.create(f"{name}.bias", (c_out,), init="zeros") if bias else None

    def __call__(self, x):
        return ops.linear(x, self.w.tensor, None if self.b is None else self.b.tensor)


class EdgeMLP:
    """Two-layer MLP over edge descriptors, LeakyReLU after the first layer."""

    def __init__(self, store, name, in_width, hidden, slope):
        self.slope = slope
        self.fc1 = Linear(store, f"{name}.fc1", in_width, hidden)
        self.fc2 = Linear(store, f"{name}.fc2", hidden, 1)

    def __call__(self, edges):
        return self.fc2(ops.leaky_relu(self.fc1(edges), self.slope))


class ResBlock:
    """conv-act-conv with identity (or 1x1 projection) shortcut, act after the add."""

    def __init__(self, store, name, c_in, c_out, slope):
        self.slope = slope
        self.conv1 = Conv2d(store, f"{name}.conv1", c_in, c_out)
        self.conv2 = Conv2d(store, f"{name}.conv2", c_out, c_out)
        self.proj = Conv2d(store, f"{name}.proj", c_in, c_out, k=1) if c_in != c_out else None

    def __call__(self, x):
        h = self.conv2(ops.leaky_relu(self.conv1(x), self.slope))
        short = x if self.proj is None else self.proj(x)
        return ops.leaky_relu(ops.add(h, short), self.slope)

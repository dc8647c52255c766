"""Differentiable operations over Tensor.

Layout conventions:
  feature maps   [C, H, W]
  node features  [n, C]
  edge features  [n, k, D]
Index arrays (neighbor lists, pixel coordinates) are plain int ndarrays and
never participate in the tape. Broadcasting is deliberately restricted to
per-channel biases and python scalars; everything else must match shapes.
"""

import numpy as np

from .errors import ConfigError
from .tensor import Tensor, as_tensor, make_op


def _check_same_shape(a, b, name):
    if a.shape != b.shape:
        raise ConfigError(f"{name}: shape mismatch {a.shape} vs {b.shape}")


# -- elementwise arithmetic ---------------------------------------------------
#
# Binary ops take equal-shape tensors or a python scalar on either side;
# scalars stay out of the tape (numpy weak promotion then preserves dtype).

def _is_scalar(v):
    return isinstance(v, (int, float)) or np.isscalar(v)


def add(a, b):
    if _is_scalar(b):
        a = as_tensor(a)
        return make_op(a.data + float(b), [(a, lambda g: g)])
    if _is_scalar(a):
        return add(b, a)
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b, "add")
    return make_op(a.data + b.data, [(a, lambda g: g), (b, lambda g: g)])


def sub(a, b):
    if _is_scalar(b):
        a = as_tensor(a)
        return make_op(a.data - float(b), [(a, lambda g: g)])
    if _is_scalar(a):
        b = as_tensor(b)
        return make_op(float(a) - b.data, [(b, lambda g: -g)])
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b, "sub")
    return make_op(a.data - b.data, [(a, lambda g: g), (b, lambda g: -g)])


def neg(a):
    a = as_tensor(a)
    return make_op(-a.data, [(a, lambda g: -g)])


def mul(a, b):
    if _is_scalar(b):
        a = as_tensor(a)
        s = float(b)
        return make_op(a.data * s, [(a, lambda g: g * s)])
    if _is_scalar(a):
        return mul(b, a)
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b, "mul")
    return make_op(a.data * b.data, [(a, lambda g: g * b.data), (b, lambda g: g * a.data)])


def div(a, b):
    if _is_scalar(b):
        return mul(a, 1.0 / float(b))
    if _is_scalar(a):
        b = as_tensor(b)
        s = float(a)
        data = s / b.data
        return make_op(data, [(b, lambda g: -g * data / b.data)])
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b, "div")
    inv = 1.0 / b.data
    data = a.data * inv
    return make_op(data, [(a, lambda g: g * inv), (b, lambda g: -g * data * inv)])


def abs_(a):
    a = as_tensor(a)
    return make_op(np.abs(a.data), [(a, lambda g: g * np.sign(a.data))])


def sum_(a):
    a = as_tensor(a)
    return make_op(np.asarray(a.data.sum()), [(a, lambda g: np.broadcast_to(g, a.shape).astype(a.dtype))])


def mean(a):
    a = as_tensor(a)
    scale = 1.0 / a.size
    return make_op(np.asarray(a.data.mean()),
                   [(a, lambda g: np.broadcast_to(g * scale, a.shape).astype(a.dtype))])


# -- shape manipulation -------------------------------------------------------

def reshape(a, shape):
    a = as_tensor(a)
    old = a.shape
    return make_op(a.data.reshape(shape), [(a, lambda g: g.reshape(old))])


def concat(tensors, axis=0):
    ts = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)
    srcs = []
    for i, t in enumerate(ts):
        lo, hi = offsets[i], offsets[i + 1]
        def take(g, lo=lo, hi=hi):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            return g[tuple(sl)]
        srcs.append((t, take))
    return make_op(data, srcs)


def narrow(a, axis, start, length):
    """Slice `length` entries from `start` along one axis."""
    a = as_tensor(a)
    sl = [slice(None)] * a.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)

    def back(g):
        out = np.zeros(a.shape, dtype=g.dtype)
        out[sl] = g
        return out

    return make_op(a.data[sl], [(a, back)])


# -- activations ---------------------------------------------------------------

def leaky_relu(a, slope=0.2):
    a = as_tensor(a)
    mult = np.where(a.data > 0, a.dtype.type(1), a.dtype.type(slope))
    return make_op(a.data * mult, [(a, lambda g: g * mult)])


def sigmoid(a):
    a = as_tensor(a)
    # clipping keeps exp() finite; sigmoid saturates far before +-60 anyway
    out = 1.0 / (1.0 + np.exp(-np.clip(a.data, -60.0, 60.0)))
    return make_op(out, [(a, lambda g: g * out * (1.0 - out))])


def softmax_last(a):
    """Softmax over the last axis (used on per-node neighbor weights)."""
    a = as_tensor(a)
    if np.isnan(a.data).any():
        raise ValueError("softmax_last: NaN in input weights")
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        dot = (g * s).sum(axis=-1, keepdims=True)
        return s * (g - dot)

    return make_op(s, [(a, back)])


# -- dense linear algebra -------------------------------------------------------

def linear(x, w, b=None):
    """Row-wise affine map: x [N, C_in] @ w.T [C_in, C_out] + b."""
    x, w = as_tensor(x), as_tensor(w)
    if x.shape[-1] != w.shape[1]:
        raise ConfigError(f"linear: input width {x.shape[-1]} != weight fan-in {w.shape[1]}")
    data = x.data @ w.data.T
    srcs = [
        (x, lambda g: g @ w.data),
        (w, lambda g: g.T @ x.data),
    ]
    if b is not None:
        b = as_tensor(b)
        data = data + b.data
        srcs.append((b, lambda g: g.sum(axis=0)))
    return make_op(data, srcs)


# -- convolution ---------------------------------------------------------------

def _im2col(xp, kh, kw, stride):
    """Padded input [C,Hp,Wp] -> column matrix [C*kh*kw, Ho*Wo] (copy)."""
    c, hp, wp = xp.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    sc, sh, sw = xp.strides
    win = np.lib.stride_tricks.as_strided(
        xp, shape=(c, kh, kw, ho, wo),
        strides=(sc, sh, sw, sh * stride, sw * stride))
    return win.reshape(c * kh * kw, ho * wo), ho, wo


def _col2im(cols, shape, kh, kw, stride):
    """Adjoint of _im2col: scatter-add columns back onto the padded grid."""
    c, hp, wp = shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    g6 = cols.reshape(c, kh, kw, ho, wo)
    out = np.zeros(shape, dtype=cols.dtype)
    for ki in range(kh):
        rows = slice(ki, ki + stride * (ho - 1) + 1, stride)
        for kj in range(kw):
            out[:, rows, kj:kj + stride * (wo - 1) + 1:stride] += g6[:, ki, kj]
    return out


def _pad_hw(x, p):
    if p == 0:
        return x
    c, h, w = x.shape
    out = np.zeros((c, h + 2 * p, w + 2 * p), dtype=x.dtype)
    out[:, p:p + h, p:p + w] = x
    return out


def conv2d(x, w, b=None, stride=1, padding=0):
    """2-D convolution, input [C_in,H,W], weight [C_out,C_in,kh,kw]."""
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 3 or w.ndim != 4:
        raise ConfigError(f"conv2d: expected [C,H,W] input and [O,I,kh,kw] weight, got {x.shape}, {w.shape}")
    c_out, c_in, kh, kw = w.shape
    if x.shape[0] != c_in:
        raise ConfigError(f"conv2d: input has {x.shape[0]} channels, weight expects {c_in}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ConfigError(f"conv2d: kernel must be odd, got {kh}x{kw}")
    _, h, win = x.shape
    xp = _pad_hw(x.data, padding)
    cols, ho, wo = _im2col(xp, kh, kw, stride)
    wf = w.data.reshape(c_out, -1)
    out = wf @ cols
    if b is not None:
        b = as_tensor(b)
        out = out + b.data[:, None]
    out = out.reshape(c_out, ho, wo)

    def back_x(g):
        if stride == 1:
            # input grad of a stride-1 conv is a conv with the flipped kernel
            wt = np.ascontiguousarray(w.data.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
            gp = _pad_hw(g, kh - 1 - padding)
            gcols, _, _ = _im2col(gp, kh, kw, 1)
            return (wt.reshape(c_in, -1) @ gcols).reshape(c_in, h, win)
        gcols = wf.T @ g.reshape(c_out, -1)
        gxp = _col2im(gcols, xp.shape, kh, kw, stride)
        if padding:
            return gxp[:, padding:padding + h, padding:padding + win]
        return gxp

    def back_w(g):
        return (g.reshape(c_out, -1) @ cols.T).reshape(w.shape)

    srcs = [(x, back_x), (w, back_w)]
    if b is not None:
        srcs.append((b, lambda g: g.sum(axis=(1, 2))))
    return make_op(out, srcs)


def conv_transpose2d(x, w, b=None, stride=2, padding=1, output_padding=1):
    """Transposed convolution: the exact adjoint of conv2d with equal geometry.

    Weight layout [C_in, C_out, kh, kw]: the leading axis matches the input
    channels, so <conv2d(x, w), y> == <x, conv_transpose2d(y, w)> holds with
    one shared weight tensor.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 3 or w.ndim != 4:
        raise ConfigError(f"conv_transpose2d: bad ranks {x.shape}, {w.shape}")
    c_a, c_b, kh, kw = w.shape
    if x.shape[0] != c_a:
        raise ConfigError(f"conv_transpose2d: input has {x.shape[0]} channels, weight expects {c_a}")
    if output_padding >= stride:
        raise ConfigError("conv_transpose2d: output_padding must be < stride")
    _, hi, wi = x.shape
    h = (hi - 1) * stride - 2 * padding + kh + output_padding
    win = (wi - 1) * stride - 2 * padding + kw + output_padding
    wf = w.data.reshape(c_a, -1)
    cols = wf.T @ x.data.reshape(c_a, -1)
    out_p = _col2im(cols, (c_b, h + 2 * padding, win + 2 * padding), kh, kw, stride)
    out = out_p[:, padding:padding + h, padding:padding + win] if padding else out_p
    if b is not None:
        b = as_tensor(b)
        out = out + b.data[:, None, None]

    def back_x(g):
        gp = _pad_hw(g, padding)
        gcols, _, _ = _im2col(gp, kh, kw, stride)
        return (wf @ gcols).reshape(x.shape)

    def back_w(g):
        gp = _pad_hw(g, padding)
        gcols, _, _ = _im2col(gp, kh, kw, stride)
        return (x.data.reshape(c_a, -1) @ gcols.T).reshape(w.shape)

    srcs = [(x, back_x), (w, back_w)]
    if b is not None:
        srcs.append((b, lambda g: g.sum(axis=(1, 2))))
    return make_op(out, srcs)


# -- node gather/scatter --------------------------------------------------------

def gather_pixels(fmap, rows, cols):
    """Pick node features from a [C,H,W] map at (row, col) pixels -> [n, C].

    Pixel positions must be unique (guaranteed for graph nodes).
    """
    fmap = as_tensor(fmap)
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    data = fmap.data[:, rows, cols].T.copy()

    def back(g):
        gm = np.zeros(fmap.shape, dtype=g.dtype)
        gm[:, rows, cols] = g.T
        return gm

    return make_op(data, [(fmap, back)])


def scatter_pixels(nodes, rows, cols, base):
    """Write node features [n,C] into a copy of base [C,H,W]; other cells keep base."""
    nodes, base = as_tensor(nodes), as_tensor(base)
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    data = base.data.copy()
    data[:, rows, cols] = nodes.data.T

    def back_nodes(g):
        return g[:, rows, cols].T.copy()

    def back_base(g):
        gb = g.copy()
        gb[:, rows, cols] = 0
        return gb

    return make_op(data, [(nodes, back_nodes), (base, back_base)])


def take_rows(x, idx):
    """Gather rows of x [n,C] with an index table [n,k] -> [n,k,C]."""
    x = as_tensor(x)
    idx = np.asarray(idx)

    def back(g):
        gx = np.zeros(x.shape, dtype=g.dtype)
        np.add.at(gx, idx.reshape(-1), g.reshape(-1, x.shape[1]))
        return gx

    return make_op(x.data[idx], [(x, back)])


def expand_center(x, k):
    """Repeat each row of x [n,C] k times -> [n,k,C] (for edge differences)."""
    x = as_tensor(x)
    data = np.broadcast_to(x.data[:, None, :], (x.shape[0], k, x.shape[1])).copy()
    return make_op(data, [(x, lambda g: g.sum(axis=1))])


def attend(alpha, feats):
    """Attention-weighted neighbor sum: [n,k] x [n,k,C] -> [n,C]."""
    alpha, feats = as_tensor(alpha), as_tensor(feats)
    data = np.einsum("nk,nkc->nc", alpha.data, feats.data)
    return make_op(data, [
        (alpha, lambda g: np.einsum("nc,nkc->nk", g, feats.data)),
        (feats, lambda g: alpha.data[:, :, None] * g[:, None, :]),
    ])

"""Attention-guided graph propagation between observed pixels.

Edge weights come from a two-layer MLP over [spatial offset || feature
differences]; with two modalities each stream's MLP sees both streams'
feature differences (its own first, the partner's second). Weights are
softmax-normalized per node and used to aggregate neighbor features, which
are scattered back onto the grid and enhanced by a convolution with a
residual connection.
"""

import numpy as np

from . import ops
from .layers import Conv2d, EdgeMLP
from .tensor import Tensor


def _edge_differences(node_feats, graph):
    """Per-edge neighbor-minus-center feature differences [n, k, C]."""
    k = graph.neighbors.shape[1]
    nb = ops.take_rows(node_feats, graph.neighbors)
    return ops.sub(nb, ops.expand_center(node_feats, k))


def _run_mlp(mlp, parts, n, k):
    edges = ops.concat(parts, axis=2)
    flat = ops.reshape(edges, (n * k, edges.shape[2]))
    return ops.reshape(mlp(flat), (n, k))


def edge_weights_single(node_feats, graph, mlp):
    """Single-stream adaptive edge weights [n, k]."""
    n, k = graph.neighbors.shape
    dp = Tensor(graph.delta_p, dtype=node_feats.dtype)
    df = _edge_differences(node_feats, graph)
    return _run_mlp(mlp, [dp, df], n, k)


def edge_weights_co(depth_feats, image_feats, graph, depth_mlp, image_mlp):
    """Co-attention edge weights: each stream sees both feature differences.

    The depth MLP reads [dp || dF_depth || dF_image]; the image MLP reads the
    swapped order [dp || dF_image || dF_depth].
    """
    n, k = graph.neighbors.shape
    dp = Tensor(graph.delta_p, dtype=depth_feats.dtype)
    df_d = _edge_differences(depth_feats, graph)
    df_i = _edge_differences(image_feats, graph)
    w_depth = _run_mlp(depth_mlp, [dp, df_d, df_i], n, k)
    w_image = _run_mlp(image_mlp, [dp, df_i, df_d], n, k)
    return w_depth, w_image


def attention_aggregate(node_feats, weights, graph):
    """Softmax the edge weights per node and mix the neighbor features."""
    alpha = ops.softmax_last(weights)
    nb = ops.take_rows(node_feats, graph.neighbors)
    return ops.attend(alpha, nb)


class CoPropagation:
    """Paired-stream propagation over one graph level's nodes."""

    def __init__(self, store, name, channels, dp_dim, hidden, slope):
        in_width = dp_dim + 2 * channels
        self.depth_mlp = EdgeMLP(store, f"{name}.depth_edge", in_width, hidden, slope)
        self.image_mlp = EdgeMLP(store, f"{name}.image_edge", in_width, hidden, slope)

    def __call__(self, depth_map, image_map, graph, collect=None):
        rows, cols = graph.rows, graph.cols
        nodes_d = ops.gather_pixels(depth_map, rows, cols)
        nodes_i = ops.gather_pixels(image_map, rows, cols)
        w_d, w_i = edge_weights_co(nodes_d, nodes_i, graph, self.depth_mlp, self.image_mlp)
        agg_d = attention_aggregate(nodes_d, w_d, graph)
        agg_i = attention_aggregate(nodes_i, w_i, graph)
        if collect is not None:
            collect.append((graph.level, graph.neighbors,
                            ops.softmax_last(w_d).data.copy(),
                            ops.softmax_last(w_i).data.copy()))
        out_d = ops.scatter_pixels(agg_d, rows, cols, depth_map)
        out_i = ops.scatter_pixels(agg_i, rows, cols, image_map)
        return out_d, out_i


class SinglePropagation:
    """One-stream propagation for decoders without a second modality."""

    def __init__(self, store, name, channels, dp_dim, hidden, slope):
        self.mlp = EdgeMLP(store, f"{name}.edge", dp_dim + channels, hidden, slope)

    def __call__(self, fmap, graph, collect=None):
        rows, cols = graph.rows, graph.cols
        nodes = ops.gather_pixels(fmap, rows, cols)
        w = edge_weights_single(nodes, graph, self.mlp)
        agg = attention_aggregate(nodes, w, graph)
        if collect is not None:
            alpha = ops.softmax_last(w).data.copy()
            collect.append((graph.level, graph.neighbors, alpha, alpha))
        return ops.scatter_pixels(agg, rows, cols, fmap)


class CGPM:
    """One propagation block: per-stream conv, node propagation, enhancement.

    The level's first block carries the stride-2 conv that moves to the next
    scale; the second keeps resolution. Without a usable graph (or when
    propagation is disabled) the block reduces to its convolutional path.
    """

    def __init__(self, store, name, c_in, c_out, stride, slope, with_prop, dp_dim, hidden):
        self.slope = slope
        self.conv_in_d = Conv2d(store, f"{name}.depth_in", c_in, c_out, stride=stride)
        self.conv_in_i = Conv2d(store, f"{name}.image_in", c_in, c_out, stride=stride)
        self.conv_enh_d = Conv2d(store, f"{name}.depth_enh", c_out, c_out)
        self.conv_enh_i = Conv2d(store, f"{name}.image_enh", c_out, c_out)
        self.prop = CoPropagation(store, f"{name}.prop", c_out, dp_dim, hidden, slope) \
            if with_prop else None

    def __call__(self, depth_in, image_in, graph, collect=None):
        f_d = ops.leaky_relu(self.conv_in_d(depth_in), self.slope)
        f_i = ops.leaky_relu(self.conv_in_i(image_in), self.slope)
        if self.prop is not None and graph is not None and not graph.empty:
            f_d, f_i = self.prop(f_d, f_i, graph, collect)
        out_d = ops.add(ops.leaky_relu(self.conv_enh_d(f_d), self.slope), f_d)
        out_i = ops.add(ops.leaky_relu(self.conv_enh_i(f_i), self.slope), f_i)
        return out_d, out_i

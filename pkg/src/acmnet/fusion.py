"""Decoder fusion: gated symmetric fusion, the direct baselines, and branch integration."""

from dataclasses import dataclass

from . import ops
from .errors import ConfigError
from .layers import Conv2d, ConvTranspose2d, ResBlock
from .tensor import Tensor


@dataclass
class ConfidencePair:
    """Pre-exponential confidence logits of the two decoder branches."""
    depth: Tensor
    image: Tensor


def fuse_df(f_depth, f_image, conv):
    """Direct fusion: plain conv over the channel concatenation."""
    return conv(ops.concat([f_depth, f_image], axis=0))


def fuse_daf(f_depth, f_image, attn_conv, conv):
    """Direct attention fusion: one sigmoid conv yields both attention maps."""
    c = f_depth.shape[0]
    if f_image.shape[0] != c:
        raise ConfigError("fuse_daf expects equal channel counts")
    gates = ops.sigmoid(attn_conv(ops.concat([f_depth, f_image], axis=0)))
    a_depth = ops.narrow(gates, 0, 0, c)
    a_image = ops.narrow(gates, 0, c, c)
    return conv(ops.concat([ops.mul(f_depth, a_depth), ops.mul(f_image, a_image)], axis=0))


def end_integrate(y_depth, y_image, conf):
    """Confidence-softmax blend of the two branch predictions.

    Numerically stable form of exp-weighted averaging: sigma(c_d - c_i) * y_d
    + sigma(c_i - c_d) * y_i, immune to logit overflow and invariant to adding
    a shared constant to both logits.
    """
    w_depth = ops.sigmoid(ops.sub(conf.depth, conf.image))
    w_image = ops.sigmoid(ops.sub(conf.image, conf.depth))
    return ops.add(ops.mul(w_depth, y_depth), ops.mul(w_image, y_image))


class SGFMLevel:
    """Symmetric gated fusion at one decoder scale.

    Each branch derives a sigmoid gate from its own carrier features (the
    encoder features at the coarsest level, the upsampled fused features
    elsewhere), gates the partner modality, and refines the concatenation
    through two ResBlocks (a single conv at the full-resolution level).
    An optional propagation pair runs on the fused maps before upsampling.
    """

    def __init__(self, store, name, level, total_levels, channels, slope, prop=None):
        self.level = level
        self.top = level == total_levels
        self.slope = slope
        self.prop = prop
        c = channels
        in_ch = 2 * c if self.top else 3 * c
        self.gate_d = Conv2d(store, f"{name}.depth_gate", c, c)
        self.gate_i = Conv2d(store, f"{name}.image_gate", c, c)
        if level == 0:
            self.trunk_d = [Conv2d(store, f"{name}.depth_fuse", in_ch, c)]
            self.trunk_i = [Conv2d(store, f"{name}.image_fuse", in_ch, c)]
        else:
            self.trunk_d = [ResBlock(store, f"{name}.depth_rb1", in_ch, c, slope),
                            ResBlock(store, f"{name}.depth_rb2", c, c, slope)]
            self.trunk_i = [ResBlock(store, f"{name}.image_rb1", in_ch, c, slope),
                            ResBlock(store, f"{name}.image_rb2", c, c, slope)]
        if level > 0:
            self.up_d = ConvTranspose2d(store, f"{name}.depth_up", c, c)
            self.up_i = ConvTranspose2d(store, f"{name}.image_up", c, c)

    def _branch(self, gate_conv, trunk, up_feat, f_own, f_other):
        gate_src = f_own if self.top else up_feat
        gate = ops.sigmoid(gate_conv(gate_src))
        gated = ops.mul(gate, f_other)
        parts = [f_own, gated] if self.top else [up_feat, f_own, gated]
        x = ops.concat(parts, axis=0)
        if self.level == 0:
            x = ops.leaky_relu(trunk[0](x), self.slope)
        else:
            for block in trunk:
                x = block(x)
        return x, gate

    def __call__(self, up_depth, up_image, f_depth, f_image, graph=None, collect=None,
                 gates_out=None):
        if not self.top:
            if up_depth is None or up_image is None:
                raise ConfigError(f"decoder level {self.level} needs upsampled inputs")
            if up_depth.shape[1:] != f_depth.shape[1:]:
                raise ConfigError(
                    f"decoder level {self.level}: upsampled dims {up_depth.shape[1:]} "
                    f"!= encoder dims {f_depth.shape[1:]}")
        q_depth, gate_d = self._branch(self.gate_d, self.trunk_d, up_depth, f_depth, f_image)
        q_image, gate_i = self._branch(self.gate_i, self.trunk_i, up_image, f_image, f_depth)
        if gates_out is not None:
            gates_out[self.level] = (gate_d.data.copy(), gate_i.data.copy())
        if self.prop is not None and graph is not None and not graph.empty:
            q_depth, q_image = self.prop(q_depth, q_image, graph, collect)
        if self.level > 0:
            return q_depth, q_image, self.up_d(q_depth), self.up_i(q_image)
        return q_depth, q_image, None, None


class DirectFusionLevel:
    """DF/DAF decoder scale: one fused stream, same trunk depth as SGFM."""

    def __init__(self, store, name, level, total_levels, channels, slope,
                 attention=False, prop=None):
        self.level = level
        self.top = level == total_levels
        self.slope = slope
        self.attention = attention
        self.prop = prop
        c = channels
        self.attn = Conv2d(store, f"{name}.attn", 2 * c, 2 * c) if attention else None
        self.fuse = Conv2d(store, f"{name}.fuse", 2 * c, c)
        in_ch = c if self.top else 2 * c
        if level == 0:
            self.trunk = [Conv2d(store, f"{name}.conv", in_ch, c)]
        else:
            self.trunk = [ResBlock(store, f"{name}.rb1", in_ch, c, slope),
                          ResBlock(store, f"{name}.rb2", c, c, slope)]
        if level > 0:
            self.up = ConvTranspose2d(store, f"{name}.up", c, c)

    def __call__(self, up_feat, f_depth, f_image, graph=None, collect=None):
        if self.attention:
            fused = fuse_daf(f_depth, f_image, self.attn, self.fuse)
        else:
            fused = fuse_df(f_depth, f_image, self.fuse)
        fused = ops.leaky_relu(fused, self.slope)
        x = fused if self.top else ops.concat([up_feat, fused], axis=0)
        if self.level == 0:
            x = ops.leaky_relu(self.trunk[0](x), self.slope)
        else:
            for block in self.trunk:
                x = block(x)
        if self.prop is not None and graph is not None and not graph.empty:
            x = self.prop(x, graph, collect)
        if self.level > 0:
            return x, self.up(x)
        return x, None


class FeatureIntegrator:
    """Progressively fuse the two branches' per-level features into one prediction."""

    def __init__(self, store, name, total_levels, channels, fi_channels, slope):
        self.levels = total_levels
        self.slope = slope
        self.stages = {}
        self.ups = {}
        for level in range(total_levels, -1, -1):
            in_ch = 2 * channels if level == total_levels else 2 * channels + fi_channels
            self.stages[level] = (
                Conv2d(store, f"{name}.l{level}.conv1", in_ch, fi_channels),
                Conv2d(store, f"{name}.l{level}.conv2", fi_channels, fi_channels),
            )
            if level < total_levels:
                self.ups[level] = ConvTranspose2d(store, f"{name}.l{level}.up",
                                                  fi_channels, fi_channels)
        self.out = Conv2d(store, f"{name}.out", fi_channels, 1)

    def __call__(self, q_depth_levels, q_image_levels):
        fused = None
        for level in range(self.levels, -1, -1):
            parts = [q_depth_levels[level], q_image_levels[level]]
            if fused is not None:
                parts.insert(0, self.ups[level](fused))
            conv1, conv2 = self.stages[level]
            fused = ops.leaky_relu(conv1(ops.concat(parts, axis=0)), self.slope)
            fused = ops.leaky_relu(conv2(fused), self.slope)
        return self.out(fused)

"""Two-stream encoder/decoder depth completion network.

Encoder: two stem convs per stream, then two propagation blocks (CGPM) per
level; the first block of each level does the stride-2 downsampling. The
decoder mirrors the levels with the configured fusion (gated symmetric, or
the direct DF/DAF baselines), producing per-level fused features. The final
prediction comes from either confidence-weighted end integration of the two
branch heads or the progressive feature integrator.
"""

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .config import ModelConfig
from .errors import ConfigError
from .fusion import (ConfidencePair, DirectFusionLevel, FeatureIntegrator, SGFMLevel,
                     end_integrate)
from .layers import Conv2d, ParamStore
from .propagation import CGPM, CoPropagation, SinglePropagation
from .tensor import Tensor


@dataclass
class ForwardResult:
    prediction: Tensor
    depth_branch: Tensor | None
    image_branch: Tensor | None
    confidence: ConfidencePair | None
    graph_free: bool
    attention: list = field(default_factory=list)
    gates: dict = field(default_factory=dict)


class DepthCompletionNet:
    def __init__(self, cfg: ModelConfig, dtype=np.float32):
        self.cfg = cfg
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 101]))
        self.store = ParamStore(rng, dtype=dtype, slope=cfg.leaky_slope)
        s = self.store
        slope = cfg.leaky_slope
        L = cfg.levels
        ch = cfg.channels
        dp_dim = 2 if cfg.coord_system == "2d" else 3
        hidden = cfg.hidden_width
        enc_prop = cfg.propagation in ("encoder", "both")
        dec_prop = cfg.propagation in ("decoder", "both")

        c0 = ch[0]
        self.stem_d1 = Conv2d(s, "stem.depth1", 1, c0)
        self.stem_d2 = Conv2d(s, "stem.depth2", c0, c0)
        self.stem_i1 = Conv2d(s, "stem.image1", 3, c0)
        self.stem_i2 = Conv2d(s, "stem.image2", c0, c0)

        self.encoder = []
        for level in range(1, L + 1):
            c_in = c0 if level == 1 else ch[level - 2]
            c_out = ch[level - 1]
            self.encoder.append((
                CGPM(s, f"enc.l{level}.a", c_in, c_out, 2, slope, enc_prop, dp_dim, hidden),
                CGPM(s, f"enc.l{level}.b", c_out, c_out, 1, slope, enc_prop, dp_dim, hidden),
            ))

        # decoder levels L..0 (uniform channel width keeps skip shapes aligned)
        if len(set(ch)) != 1:
            raise ConfigError("decoder requires equal channels at every level")
        c = ch[0]
        self.decoder = {}
        for level in range(L, -1, -1):
            prop = None
            if cfg.fusion == "sg":
                if dec_prop and level >= 1:
                    prop = CoPropagation(s, f"dec.l{level}.prop", c, dp_dim, hidden, slope)
                self.decoder[level] = SGFMLevel(s, f"dec.l{level}", level, L, c, slope, prop)
            else:
                if dec_prop and level >= 1:
                    prop = SinglePropagation(s, f"dec.l{level}.prop", c, dp_dim, hidden, slope)
                self.decoder[level] = DirectFusionLevel(
                    s, f"dec.l{level}", level, L, c, slope,
                    attention=cfg.fusion == "daf", prop=prop)

        if cfg.fusion == "sg":
            self.head_pred_d = Conv2d(s, "head.depth_pred", c, 1)
            self.head_pred_i = Conv2d(s, "head.image_pred", c, 1)
            self.head_conf_d = Conv2d(s, "head.depth_conf", c, 1)
            self.head_conf_i = Conv2d(s, "head.image_conf", c, 1)
        else:
            self.head_pred = Conv2d(s, "head.pred", c, 1)

        self.integrator = None
        if cfg.fusion == "sg" and cfg.integration == "feature":
            self.integrator = FeatureIntegrator(s, "fi", L, c, cfg.fi_channels, slope)

    # -- parameters -----------------------------------------------------------

    def parameters(self):
        return list(self.store)

    def trainable_parameters(self):
        """Parameters on the loss path for this config.

        With feature integration the confidence heads never reach the loss;
        without auxiliary losses (gamma1 == 0) neither do the branch heads.
        """
        cfg = self.cfg
        excluded = set()
        if cfg.fusion == "sg" and cfg.integration == "feature":
            excluded.update(p.name for p in (self.head_conf_d.w, self.head_conf_d.b,
                                             self.head_conf_i.w, self.head_conf_i.b))
            if cfg.gamma1 == 0:
                excluded.update(p.name for p in (self.head_pred_d.w, self.head_pred_d.b,
                                                 self.head_pred_i.w, self.head_pred_i.b))
        return [p for p in self.store if p.name not in excluded]

    def param_count(self):
        return self.store.total_size()

    # -- forward ---------------------------------------------------------------

    def forward(self, sample, dump_attention=False, dump_gates=False):
        cfg = self.cfg
        h, w = sample.sparse.shape
        if h % (2 ** cfg.levels) or w % (2 ** cfg.levels):
            raise ConfigError(f"input dims {h}x{w} must be multiples of 2^{cfg.levels}")
        graphs = sample.graphs
        if len(graphs) != cfg.levels:
            raise ConfigError(f"sample carries {len(graphs)} graphs, model needs {cfg.levels}")
        dtype = self.store.dtype
        slope = cfg.leaky_slope
        collect = [] if dump_attention else None
        gates_out = {} if dump_gates else None

        x_d = Tensor(sample.sparse.depth[None, :, :], dtype=dtype)
        x_i = Tensor(np.asarray(sample.rgb), dtype=dtype)

        f_d = ops.leaky_relu(self.stem_d2(ops.leaky_relu(self.stem_d1(x_d), slope)), slope)
        f_i = ops.leaky_relu(self.stem_i2(ops.leaky_relu(self.stem_i1(x_i), slope)), slope)

        feats = {0: (f_d, f_i)}
        for level, (block_a, block_b) in enumerate(self.encoder, start=1):
            g = graphs[level - 1]
            f_d, f_i = block_a(f_d, f_i, g, collect)
            f_d, f_i = block_b(f_d, f_i, g, collect)
            feats[level] = (f_d, f_i)

        L = cfg.levels
        if cfg.fusion == "sg":
            q_d, q_i = {}, {}
            up_d = up_i = None
            for level in range(L, -1, -1):
                g = graphs[level - 1] if level >= 1 else None
                fd, fi = feats[level]
                q_d[level], q_i[level], up_d, up_i = self.decoder[level](
                    up_d, up_i, fd, fi, graph=g, collect=collect, gates_out=gates_out)
            y_d = ops.reshape(self.head_pred_d(q_d[0]), (h, w))
            y_i = ops.reshape(self.head_pred_i(q_i[0]), (h, w))
            conf = ConfidencePair(ops.reshape(self.head_conf_d(q_d[0]), (h, w)),
                                  ops.reshape(self.head_conf_i(q_i[0]), (h, w)))
            if cfg.integration == "end":
                y = end_integrate(y_d, y_i, conf)
            else:
                y = ops.reshape(self.integrator(q_d, q_i), (h, w))
            result = ForwardResult(y, y_d, y_i, conf,
                                   graph_free=all(g.empty for g in graphs))
        else:
            q = {}
            up = None
            for level in range(L, -1, -1):
                g = graphs[level - 1] if level >= 1 else None
                fd, fi = feats[level]
                q[level], up = self.decoder[level](up, fd, fi, graph=g, collect=collect)
            y = ops.reshape(self.head_pred(q[0]), (h, w))
            result = ForwardResult(y, y, y, None, graph_free=all(g.empty for g in graphs))
        if dump_attention:
            result.attention = collect
        if dump_gates and gates_out is not None:
            result.gates = gates_out
        return result

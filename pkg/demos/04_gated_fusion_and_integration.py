#!/usr/bin/env python3
"""Gated fusion vs. the direct baselines, and the two branch-integration routes."""

import numpy as np

from acmnet import ops
from acmnet.fusion import ConfidencePair, SGFMLevel, end_integrate
from acmnet.layers import ParamStore
from acmnet.tensor import Tensor

rng = np.random.default_rng(5)


def t(*shape):
    return Tensor(rng.normal(size=shape).astype(np.float32))


store = ParamStore(np.random.default_rng(2))
level = SGFMLevel(store, "sgfm", 2, 2, 8, 0.2)

f_depth, f_image = t(8, 8, 8), t(8, 8, 8)
gates = {}
q_depth, q_image, up_d, up_i = level(None, None, f_depth, f_image, gates_out=gates)
gate_d, gate_i = gates[2]
print(f"fused features {q_depth.shape}, upsampled {up_d.shape}")
print(f"gates live in (0,1): depth [{gate_d.min():.3f}, {gate_d.max():.3f}], "
      f"image [{gate_i.min():.3f}, {gate_i.max():.3f}]")

# Slamming the depth branch's gate shut cuts the image modality out of it.
level.gate_d.w.tensor.data[:] = 0.0
level.gate_d.b.tensor.data[:] = -20.0
qa, _, _, _ = level(None, None, f_depth, t(8, 8, 8))
qb, _, _, _ = level(None, None, f_depth, t(8, 8, 8))
print(f"closed gate: output shift under a different image input = {np.abs(qa.data - qb.data).max():.2e}")

# End-integration blends the branch predictions by confidence; it is a convex
# combination, so the result always lies between the two predictions.
y_d, y_i = t(16, 16), t(16, 16)
conf = ConfidencePair(t(16, 16), t(16, 16))
blended = end_integrate(y_d, y_i, conf).data
inside = ((blended >= np.minimum(y_d.data, y_i.data) - 1e-6)
          & (blended <= np.maximum(y_d.data, y_i.data) + 1e-6)).all()
print(f"end-integration stays within the branch envelope: {inside}")

one_sided = end_integrate(y_d, y_i, ConfidencePair(ops.add(conf.depth, 50.0), conf.image)).data
print(f"+50 depth-confidence logits pull the blend onto the depth branch: "
      f"max dev {np.abs(one_sided - y_d.data).max():.2e}")

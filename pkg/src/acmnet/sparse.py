"""Sparse depth maps, camera intrinsics, and pyramid downsampling."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ConfigError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    def scaled(self, factor):
        """Intrinsics for a grid scaled by `factor` (e.g. 0.5 per pyramid level)."""
        return CameraIntrinsics(self.fx * factor, self.fy * factor,
                                self.cx * factor, self.cy * factor)

    def to_dict(self):
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}

    @classmethod
    def from_dict(cls, d):
        return cls(d["fx"], d["fy"], d["cx"], d["cy"])


class SparseDepthMap:
    """H x W depth grid in meters with an explicit observed mask.

    Invariant: depth > 0 exactly where mask is true, depth == 0 elsewhere.
    """

    __slots__ = ("depth", "mask")

    def __init__(self, depth, mask=None):
        depth = np.asarray(depth, dtype=np.float32)
        if depth.ndim != 2:
            raise ConfigError(f"depth map must be 2-D, got shape {depth.shape}")
        if mask is None:
            mask = depth > 0
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != depth.shape:
            raise ConfigError("mask shape does not match depth shape")
        if (depth[mask] <= 0).any() or (depth[~mask] != 0).any():
            raise ConfigError("depth/mask inconsistency: need depth>0 iff observed, 0 elsewhere")
        self.depth = depth
        self.mask = mask

    @property
    def shape(self):
        return self.depth.shape

    @property
    def observed_count(self):
        return int(self.mask.sum())

    def copy(self):
        return SparseDepthMap(self.depth.copy(), self.mask.copy())


def downsample_sparse(m):
    """Half-resolution map: 2x2 max-pool on depth, OR on the mask."""
    h, w = m.shape
    if h % 2 or w % 2:
        raise ConfigError(f"downsample needs even dims, got {h}x{w}")
    d = m.depth.reshape(h // 2, 2, w // 2, 2).max(axis=(1, 3))
    mask = m.mask.reshape(h // 2, 2, w // 2, 2).any(axis=(1, 3))
    return SparseDepthMap(d, mask)


def sample_nodes(m, n, seed):
    """Sample min(n, observed) distinct observed pixels, uniform, seeded.

    Returns an [count, 2] int array of (u, v) = (col, row) coordinates;
    empty when the map has no observed pixels (graph-free fallback).
    """
    if n < 1:
        raise ConfigError(f"node count must be >= 1, got {n}")
    flat = np.flatnonzero(m.mask)
    if flat.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    rng = np.random.default_rng(seed)
    take = min(n, flat.size)
    chosen = rng.choice(flat, size=take, replace=False)
    _, w = m.shape
    return np.stack([chosen % w, chosen // w], axis=1).astype(np.int64)


def pad_to_multiple(m, multiple):
    """Zero-pad bottom/right so dims divide `multiple` (for real data of odd sizes)."""
    h, w = m.shape
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph == 0 and pw == 0:
        return m
    depth = np.pad(m.depth, ((0, ph), (0, pw)))
    mask = np.pad(m.mask, ((0, ph), (0, pw)))
    return SparseDepthMap(depth, mask)

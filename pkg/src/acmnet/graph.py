"""Multi-scale k-nearest-neighbor graphs over observed pixels.

The kNN search uses an exact uniform-grid spatial index: nodes are bucketed
into cells sized from the expected neighbor radius; each bucket's queries
expand Chebyshev rings of cells until the next ring provably cannot contain
a closer (distance, index) pair. Ties are broken by the lower node index,
so results match an O(n^2) scan exactly.
"""

import csv
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import ConfigError
from .sparse import CameraIntrinsics, SparseDepthMap, downsample_sparse, sample_nodes

COORD_2D = "2d"
COORD_3D = "3d"


def unproject(u, v, d, intr):
    """Pixel (u, v) with depth d meters -> camera coordinates (x, y, z)."""
    d = np.asarray(d, dtype=np.float64)
    if (d <= 0).any():
        raise ConfigError("unproject requires positive depth")
    z = d
    x = z * (np.asarray(u) - intr.cx) / intr.fx
    y = z * (np.asarray(v) - intr.cy) / intr.fy
    return x, y, z


_ring_cache = {}


def _ring_offsets(dim, r):
    key = (dim, r)
    if key not in _ring_cache:
        if r == 0:
            _ring_cache[key] = [(0,) * dim]
        else:
            _ring_cache[key] = [off for off in product(range(-r, r + 1), repeat=dim)
                                if max(abs(o) for o in off) == r]
    return _ring_cache[key]


def knn_indices(points, k):
    """Exact k-nearest neighbors under squared Euclidean distance.

    Returns (neighbors [n, k_eff], degenerate flag). When n <= k every node
    is connected to all others (k_eff = n-1) and the flag is set. Neighbor
    lists are ordered by (distance, index); ties go to the lower index.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    n, dim = pts.shape
    if n <= 1:
        return np.zeros((n, 0), dtype=np.int64), True
    degenerate = n <= k
    k_eff = min(k, n - 1)

    lo = pts.min(axis=0)
    span = float((pts.max(axis=0) - lo).max())
    cells_per_axis = max(1, int(np.ceil((n / (k_eff + 1.0)) ** (1.0 / dim))))
    cell = span / cells_per_axis if span > 0 else 1.0

    cidx = np.floor((pts - lo) / cell).astype(np.int64)
    buckets = {}
    for i, key in enumerate(map(tuple, cidx)):
        buckets.setdefault(key, []).append(i)
    buckets = {key: np.asarray(v, dtype=np.int64) for key, v in buckets.items()}
    max_ring = int(cidx.max() - cidx.min()) + 1

    neighbors = np.empty((n, k_eff), dtype=np.int64)
    for key, members in buckets.items():
        cand_parts = []
        r = 0
        while True:
            for off in _ring_offsets(dim, r):
                hit = buckets.get(tuple(c + o for c, o in zip(key, off)))
                if hit is not None:
                    cand_parts.append(hit)
            cand = np.concatenate(cand_parts) if len(cand_parts) > 1 else cand_parts[0]
            if cand.size - 1 >= k_eff:
                diff = pts[cand][None, :, :] - pts[members][:, None, :]
                d2 = (diff * diff).sum(axis=2)
                self_pos = np.searchsorted(np.sort(cand), members)
                order = np.argsort(cand)
                d2[np.arange(members.size), order[self_pos]] = np.inf
                kth = np.partition(d2, k_eff - 1, axis=1)[:, k_eff - 1]
                lower_bound = (r * cell) ** 2
                if lower_bound > kth.max() or r >= max_ring:
                    break
            elif r >= max_ring:
                diff = pts[cand][None, :, :] - pts[members][:, None, :]
                d2 = (diff * diff).sum(axis=2)
                order = np.argsort(cand)
                self_pos = np.searchsorted(np.sort(cand), members)
                d2[np.arange(members.size), order[self_pos]] = np.inf
                break
            r += 1
        # stable sort over index-sorted candidates realizes the (d2, index) order
        srt = np.argsort(cand)
        cand_sorted = cand[srt]
        d2_sorted = d2[:, srt]
        pick = np.argsort(d2_sorted, axis=1, kind="stable")[:, :k_eff]
        neighbors[members] = cand_sorted[pick]
    return neighbors, degenerate


@dataclass
class GraphLevel:
    """Sampled observed-pixel graph at one pyramid scale."""

    level: int
    node_pix: np.ndarray      # [n, 2] int (u, v) at level resolution
    node_xyz: np.ndarray      # [n, 3] float camera coords, meters
    node_depth: np.ndarray    # [n] meters
    neighbors: np.ndarray     # [n, k_eff] int
    coord_system: str
    grid_h: int
    grid_w: int
    degenerate: bool
    delta_p: np.ndarray       # [n, k_eff, 2 or 3] float32 edge offsets

    @property
    def n_nodes(self):
        return self.node_pix.shape[0]

    @property
    def empty(self):
        return self.n_nodes < 2

    @property
    def rows(self):
        return self.node_pix[:, 1]

    @property
    def cols(self):
        return self.node_pix[:, 0]


def build_graph_level(m, level, intr_at_level, n_nodes, k, coord_system, seed):
    if coord_system not in (COORD_2D, COORD_3D):
        raise ConfigError(f"coord_system must be '2d' or '3d', got {coord_system!r}")
    pix = sample_nodes(m, n_nodes, seed)
    h, w = m.shape
    if pix.shape[0] == 0:
        dim = 2 if coord_system == COORD_2D else 3
        return GraphLevel(level, pix, np.zeros((0, 3)), np.zeros(0),
                          np.zeros((0, 0), dtype=np.int64), coord_system, h, w, True,
                          np.zeros((0, 0, dim), dtype=np.float32))
    u, v = pix[:, 0], pix[:, 1]
    # distinct cells guarantee collision-free gather/scatter at this level
    assert len(np.unique(v.astype(np.int64) * w + u)) == len(pix)
    d = m.depth[v, u].astype(np.float64)
    x, y, z = unproject(u, v, d, intr_at_level)
    xyz = np.stack([x, y, z], axis=1)
    coords = pix.astype(np.float64) if coord_system == COORD_2D else xyz
    nbrs, degenerate = knn_indices(coords, k)
    if nbrs.shape[1] > 0:
        delta_p = (coords[nbrs] - coords[:, None, :]).astype(np.float32)
    else:
        delta_p = np.zeros((pix.shape[0], 0, coords.shape[1]), dtype=np.float32)
    return GraphLevel(level, pix, xyz, d.astype(np.float32), nbrs,
                      coord_system, h, w, degenerate, delta_p)


def build_pyramid(m, intr, levels, nodes_per_level, k, coord_system, seed):
    """Downsample L times and build one graph per scale.

    Level l's graph lives on the l-times-downsampled grid, with intrinsics
    scaled by 2^-l. Returns (graphs[1..L], maps[0..L]).
    """
    if len(nodes_per_level) != levels:
        raise ConfigError("nodes_per_level length must equal the level count")
    h, w = m.shape
    div = 2 ** levels
    if h % div or w % div:
        raise ConfigError(f"map dims {h}x{w} must be multiples of 2^{levels}")
    maps = [m]
    graphs = []
    for level in range(1, levels + 1):
        maps.append(downsample_sparse(maps[-1]))
        level_seed = np.random.SeedSequence([int(seed), level])
        graphs.append(build_graph_level(
            maps[-1], level, intr.scaled(2.0 ** -level),
            nodes_per_level[level - 1], k, coord_system, level_seed))
    return graphs, maps


def dump_graph_csv(graphs, path):
    """Debug dump: level,node,u,v,x,y,z,neighbor_0..neighbor_{k-1}."""
    k_max = max((g.neighbors.shape[1] for g in graphs), default=0)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "node", "u", "v", "x", "y", "z"]
                        + [f"neighbor_{i}" for i in range(k_max)])
        for g in graphs:
            for i in range(g.n_nodes):
                row = [g.level, i, int(g.node_pix[i, 0]), int(g.node_pix[i, 1]),
                       f"{g.node_xyz[i, 0]:.6f}", f"{g.node_xyz[i, 1]:.6f}", f"{g.node_xyz[i, 2]:.6f}"]
                row += [int(j) for j in g.neighbors[i]]
                row += [""] * (k_max - g.neighbors.shape[1])
                writer.writerow(row)

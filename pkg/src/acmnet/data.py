"""Depth/RGB file I/O, synthetic scene generation, sparsifiers, and samples.

Depth PNGs follow the 16-bit convention: meters = pixel / 256, pixel 0 means
unobserved. Synthetic scenes are seeded piecewise-planar compositions (ground
ramp plus floating boxes) whose RGB edges coincide with depth discontinuities
and whose shading falls off with depth, so the image stream carries signal.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .config import DataConfig, ModelConfig
from .errors import AcmnetError, ConfigError, FormatError
from .graph import build_pyramid
from .sparse import CameraIntrinsics, SparseDepthMap

DEPTH_PNG_SCALE = 256.0
_DEPTH_MODES = {"I", "I;16", "I;16B", "I;16L"}

# surface palette: any two lattice colors differ by >= 0.4 in some channel.
# mid-gray is excluded: it is shade-proportional to bright-gray within the
# reachable shading ratios, which could hide an occlusion edge in RGB.
_PALETTE = np.array([(r, g, b)
                     for r in (0.1, 0.5, 0.9)
                     for g in (0.1, 0.5, 0.9)
                     for b in (0.1, 0.5, 0.9)
                     if (r, g, b) != (0.5, 0.5, 0.5)])

DEPTH_NEAR_M = 2.0
DEPTH_FAR_M = 40.0


# -- PNG I/O -------------------------------------------------------------------

def save_depth_png(depth_or_map, path):
    """Write meters to a 16-bit single-channel PNG (pixel = round(256 * m))."""
    depth = depth_or_map.depth if isinstance(depth_or_map, SparseDepthMap) else np.asarray(depth_or_map)
    px = np.rint(np.clip(depth, 0, 65535 / DEPTH_PNG_SCALE) * DEPTH_PNG_SCALE)
    Image.fromarray(px.astype(np.uint16)).save(path, format="PNG")


def load_depth_png(path):
    img = Image.open(path)
    if img.mode not in _DEPTH_MODES:
        raise FormatError(f"{path}: expected a 16-bit single-channel PNG, got mode {img.mode!r}")
    arr = np.asarray(img, dtype=np.float32)
    return SparseDepthMap(arr / DEPTH_PNG_SCALE)


def save_rgb_png(rgb, path):
    """rgb [3,H,W] in [0,1] -> 8-bit color PNG."""
    arr = (np.clip(np.asarray(rgb), 0, 1) * 255).round().astype(np.uint8)
    Image.fromarray(arr.transpose(1, 2, 0)).save(path, format="PNG")


def load_rgb_png(path):
    img = Image.open(path)
    if img.mode != "RGB":
        img = img.convert("RGB")
    return np.asarray(img, dtype=np.float32).transpose(2, 0, 1) / 255.0


def save_gray_png(values, path, normalize=True):
    """Export a map (confidence/gate) as 8-bit grayscale for inspection."""
    arr = np.asarray(values, dtype=np.float64)
    if normalize:
        lo, hi = arr.min(), arr.max()
        arr = (arr - lo) / (hi - lo) if hi > lo else np.zeros_like(arr)
    Image.fromarray((np.clip(arr, 0, 1) * 255).round().astype(np.uint8)).save(path, format="PNG")


# -- synthetic scenes ------------------------------------------------------------

@dataclass
class SyntheticScene:
    dense_depth: np.ndarray   # [H, W] meters, > 0 everywhere
    rgb: np.ndarray           # [3, H, W] in [0, 1]
    intrinsics: CameraIntrinsics
    seed: int


def _shade(depth):
    return np.clip(1.1 - depth / 45.0, 0.35, 1.0)


def generate_scene(h, w, seed):
    """Ground ramp plus 2-5 axis-aligned boxes at 2-30 m, min-depth composited."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7001]))
    rows = np.arange(h, dtype=np.float64)[:, None]
    depth = DEPTH_FAR_M - (DEPTH_FAR_M - DEPTH_NEAR_M) * rows / max(h - 1, 1)
    depth = np.broadcast_to(depth, (h, w)).copy()
    surface = np.zeros((h, w), dtype=np.int64)

    n_boxes = int(rng.integers(2, 6))
    palette_idx = rng.permutation(len(_PALETTE))[:n_boxes + 1]
    colors = _PALETTE[palette_idx]
    for b in range(1, n_boxes + 1):
        bw = int(rng.integers(max(3, w // 8), max(4, w // 2)))
        bh = int(rng.integers(max(3, h // 8), max(4, h // 2)))
        u0 = int(rng.integers(0, max(1, w - bw)))
        v0 = int(rng.integers(0, max(1, h - bh)))
        z = float(rng.uniform(2.0, 30.0))
        region = np.s_[v0:v0 + bh, u0:u0 + bw]
        closer = depth[region] > z
        depth[region][closer] = z
        surface[region][closer] = b

    rgb = colors[surface].transpose(2, 0, 1) * _shade(depth)[None, :, :]
    rgb = rgb + rng.normal(0.0, 0.02, size=rgb.shape)
    rgb = np.clip(rgb, 0.0, 1.0)
    intr = CameraIntrinsics(float(max(h, w)), float(max(h, w)), (w - 1) / 2.0, (h - 1) / 2.0)
    return SyntheticScene(depth.astype(np.float32), rgb.astype(np.float32), intr, int(seed))


# -- sparsifiers -------------------------------------------------------------------

def sparsify(depth, pattern, ratio, seed, scan_rows=None):
    """Subsample a depth map into a sparse input.

    lidar-lines: jittered scanline rows over valid pixels, then the ratio is
    applied to that base set. uniform-random: keep round(ratio * valid count)
    pixels uniformly. Deterministic per seed.
    """
    if not 0 < ratio <= 1:
        raise ConfigError(f"sparsity ratio must lie in (0, 1], got {ratio}")
    depth = np.asarray(depth, dtype=np.float32)
    h, w = depth.shape
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7002]))
    valid = depth > 0
    if pattern == "lidar-lines":
        n_lines = scan_rows if scan_rows else max(4, h // 4)
        mask = np.zeros((h, w), dtype=bool)
        base_rows = np.linspace(1, h - 2, n_lines).round().astype(int)
        cols = np.arange(w)
        for r in base_rows:
            jit = np.clip(r + rng.integers(-1, 2, size=w), 0, h - 1)
            mask[jit, cols] = True
        mask &= valid
    elif pattern == "uniform-random":
        mask = valid.copy()
    else:
        raise ConfigError(f"unknown sparsify pattern {pattern!r}")
    if ratio < 1.0:
        flat = np.flatnonzero(mask)
        keep = int(round(ratio * flat.size))
        chosen = rng.choice(flat, size=keep, replace=False)
        mask = np.zeros((h, w), dtype=bool)
        mask.reshape(-1)[chosen] = True
    return SparseDepthMap(np.where(mask, depth, 0.0), mask)


def nearest_fill(sparse_map):
    """Baseline predictor: every pixel takes its nearest observed depth."""
    if not sparse_map.mask.any():
        return np.full(sparse_map.shape, 10.0, dtype=np.float32)
    idx = ndimage.distance_transform_edt(~sparse_map.mask, return_distances=False,
                                         return_indices=True)
    return sparse_map.depth[idx[0], idx[1]]


# -- samples and dataset manifests ---------------------------------------------------

@dataclass
class Sample:
    sample_id: str
    sparse: SparseDepthMap
    rgb: np.ndarray
    gt: np.ndarray
    intrinsics: CameraIntrinsics
    graphs: list
    seed: int


def make_sample(sample_id, rgb, gt, sparse_map, intr, model_cfg: ModelConfig, seed):
    graphs, _ = build_pyramid(sparse_map, intr, model_cfg.levels,
                              model_cfg.nodes_per_level, model_cfg.k,
                              model_cfg.coord_system, seed)
    return Sample(sample_id, sparse_map, rgb, gt, intr, graphs, int(seed))


def build_dataset(data_cfg: DataConfig, model_cfg: ModelConfig, split="train"):
    """Generate the in-memory synthetic split with per-sample graphs."""
    if split == "train":
        count, offset, ratio = data_cfg.n_train, 0, data_cfg.train_ratio
    elif split == "eval":
        count, offset, ratio = data_cfg.n_eval, data_cfg.n_train, data_cfg.eval_ratio
    else:
        raise ConfigError(f"unknown split {split!r}")
    samples = []
    for i in range(count):
        scene_seed = data_cfg.seed + offset + i
        scene = generate_scene(data_cfg.height, data_cfg.width, scene_seed)
        base = sparsify(scene.dense_depth, data_cfg.pattern, 1.0, scene_seed,
                        scan_rows=data_cfg.scan_rows)
        sp = base if ratio >= 1.0 else sparsify(base.depth, "uniform-random", ratio, scene_seed)
        samples.append(make_sample(f"{split}_{i:04d}", scene.rgb, scene.dense_depth,
                                   sp, scene.intrinsics, model_cfg, scene_seed))
    return samples


def write_dataset(out_dir, data_cfg: DataConfig):
    """Write scenes (rgb/gt/base-sparse PNGs) plus a manifest JSON."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for split, count, offset in (("train", data_cfg.n_train, 0),
                                 ("eval", data_cfg.n_eval, data_cfg.n_train)):
        for i in range(count):
            scene_seed = data_cfg.seed + offset + i
            scene = generate_scene(data_cfg.height, data_cfg.width, scene_seed)
            base = sparsify(scene.dense_depth, data_cfg.pattern, 1.0, scene_seed,
                            scan_rows=data_cfg.scan_rows)
            sid = f"{split}_{i:04d}"
            save_rgb_png(scene.rgb, out / f"{sid}_rgb.png")
            save_depth_png(scene.dense_depth, out / f"{sid}_gt.png")
            save_depth_png(base, out / f"{sid}_sparse.png")
            entries.append({
                "id": sid, "split": split, "seed": scene_seed,
                "rgb": f"{sid}_rgb.png", "gt": f"{sid}_gt.png", "sparse": f"{sid}_sparse.png",
                "intrinsics": scene.intrinsics.to_dict(),
            })
    manifest = {
        "version": 1,
        "height": data_cfg.height, "width": data_cfg.width,
        "pattern": data_cfg.pattern, "scan_rows": data_cfg.scan_rows,
        "seed": data_cfg.seed,
        "samples": entries,
    }
    path = out / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def load_manifest(path):
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("version") != 1:
        raise FormatError(f"{path}: unsupported manifest version {manifest.get('version')!r}")
    return manifest


def samples_from_manifest(manifest_path, model_cfg: ModelConfig, split="eval",
                          ratio=1.0, ratio_seed=0):
    """Load a written dataset split, optionally subsampling the sparse input."""
    manifest = load_manifest(manifest_path)
    root = Path(manifest_path).parent
    samples = []
    for entry in manifest["samples"]:
        if entry["split"] != split:
            continue
        rgb = load_rgb_png(root / entry["rgb"])
        gt = load_depth_png(root / entry["gt"]).depth
        sp = load_depth_png(root / entry["sparse"])
        if ratio < 1.0:
            sp = sparsify(sp.depth, "uniform-random", ratio, entry["seed"] + ratio_seed)
        intr = CameraIntrinsics.from_dict(entry["intrinsics"])
        samples.append(make_sample(entry["id"], rgb, gt, sp, intr, model_cfg, entry["seed"]))
    if not samples:
        raise AcmnetError(f"manifest {manifest_path} has no samples in split {split!r}")
    return samples

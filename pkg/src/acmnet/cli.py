"""Command-line entry points: train, eval, sweep, ablate, gen-data, gradcheck.

Every artifact is written to a temporary name and renamed on success, so a
failed run never leaves a partial output behind. All error paths exit
nonzero. ACMNET_THREADS caps evaluation parallelism (default 1).
"""

import argparse
import contextlib
import csv
import json
import os
import sys
from itertools import product
from pathlib import Path

import numpy as np

from .checkpoint import load_into_store, save_checkpoint
from .config import (SWEEP_RATIOS, DataConfig, desk_config, load_run_config,
                     run_config_from_dict)
from .data import build_dataset, save_gray_png, samples_from_manifest, write_dataset
from .errors import AcmnetError
from .gradcheck import check_grad, probe_parameters
from .metrics import CSV_COLUMNS, write_metrics_csv
from .model import DepthCompletionNet
from .train import (evaluate_baseline, evaluate_model, train_model, write_manifest)


@contextlib.contextmanager
def atomic_output(path):
    """Yield a temp path; rename it over `path` only if the block succeeds."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def _load_config(args):
    cfg = load_run_config(args.config) if args.config else desk_config()
    if getattr(args, "seed", None) is not None:
        cfg.model.seed = args.seed
    return cfg


# -- subcommands -----------------------------------------------------------------


def cmd_gen_data(args):
    cfg = _load_config(args)
    if args.seed is not None:
        cfg.data.seed = args.seed
    out = Path(args.out)
    manifest = write_dataset(out, cfg.data)
    print(f"wrote dataset manifest {manifest}")
    return 0


def cmd_train(args):
    cfg = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def log(step, loss):
        print(f"step {step:5d}  loss {loss:.4f}")

    model, manifest = train_model(cfg, log_fn=log)
    eval_samples = None
    if cfg.data.n_eval > 0:
        eval_samples = build_dataset(cfg.data, cfg.model, split="eval")
        _, aggregate = evaluate_model(model, eval_samples)
        manifest["final_metrics"] = aggregate.__dict__
    with atomic_output(out / "checkpoint.acmn") as tmp:
        save_checkpoint(tmp, model.store)
    with atomic_output(out / "loss_log.csv") as tmp:
        with open(tmp, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "loss"])
            for i, value in enumerate(manifest["loss_log"], start=1):
                writer.writerow([i, f"{value:.6f}"])
    manifest["checkpoint"] = "checkpoint.acmn"
    with atomic_output(out / "manifest.json") as tmp:
        write_manifest(tmp, manifest)
    rmse = manifest["final_metrics"]["rmse_mm"] if manifest["final_metrics"] else float("nan")
    print(f"trained {cfg.train.steps} steps; params {manifest['param_count']}; "
          f"eval rmse {rmse:.2f} mm; wall {manifest['wall_clock_sec']:.1f}s")
    return 0


def _restore_model(args, cfg):
    model = DepthCompletionNet(cfg.model)
    load_into_store(args.checkpoint, model.store)
    return model


def cmd_eval(args):
    cfg = _load_config(args)
    samples = samples_from_manifest(args.data, cfg.model, split=args.split,
                                    ratio=args.ratio)
    if args.baseline:
        per_sample, aggregate = evaluate_baseline(samples)
    else:
        if not args.checkpoint:
            raise AcmnetError("eval needs --checkpoint (or --baseline)")
        model = _restore_model(args, cfg)
        per_sample, aggregate = evaluate_model(model, samples)
        if args.dump_attention or args.dump_confidence:
            _dump_inspection(model, samples[0], args)
    with atomic_output(args.out) as tmp:
        write_metrics_csv(tmp, per_sample, aggregate)
    print(f"evaluated {len(samples)} samples: rmse {aggregate.rmse_mm:.2f} mm, "
          f"mae {aggregate.mae_mm:.2f} mm -> {args.out}")
    return 0


def _dump_inspection(model, sample, args):
    result = model.forward(sample, dump_attention=bool(args.dump_attention),
                           dump_gates=bool(args.dump_confidence))
    if args.dump_attention:
        out = Path(args.dump_attention)
        out.mkdir(parents=True, exist_ok=True)
        with atomic_output(out / f"{sample.sample_id}_attention.csv") as tmp:
            with open(tmp, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["level", "block", "stream", "i", "j", "alpha"])
                for block, (level, neighbors, alpha_d, alpha_i) in enumerate(result.attention):
                    for stream, alpha in (("depth", alpha_d), ("image", alpha_i)):
                        for i in range(neighbors.shape[0]):
                            for pos in range(neighbors.shape[1]):
                                writer.writerow([level, block, stream, i,
                                                 int(neighbors[i, pos]), f"{alpha[i, pos]:.6f}"])
    if args.dump_confidence:
        out = Path(args.dump_confidence)
        out.mkdir(parents=True, exist_ok=True)
        if result.confidence is not None:
            save_gray_png(result.confidence.depth.data, out / f"{sample.sample_id}_conf_depth.png")
            save_gray_png(result.confidence.image.data, out / f"{sample.sample_id}_conf_image.png")
        for level, (gate_d, gate_i) in result.gates.items():
            save_gray_png(gate_d.mean(axis=0), out / f"{sample.sample_id}_gate_depth_l{level}.png")
            save_gray_png(gate_i.mean(axis=0), out / f"{sample.sample_id}_gate_image_l{level}.png")


def cmd_sweep(args):
    cfg = _load_config(args)
    ratios = [float(r) for r in args.ratios.split(",")] if args.ratios else list(SWEEP_RATIOS)
    model = _restore_model(args, cfg)
    rows = []
    for ratio in ratios:
        samples = samples_from_manifest(args.data, cfg.model, split=args.split, ratio=ratio)
        _, aggregate = evaluate_model(model, samples)
        rows.append((ratio, aggregate))
    base_samples = samples_from_manifest(args.data, cfg.model, split=args.split, ratio=1.0)
    total_px = sum(s.sparse.mask.size for s in base_samples)
    base_density = sum(s.sparse.observed_count for s in base_samples) / total_px
    with atomic_output(args.out) as tmp:
        with open(tmp, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["ratio", "density"] + CSV_COLUMNS[1:])
            for ratio, agg in rows:
                writer.writerow([ratio, f"{ratio * base_density:.6f}"] + agg.row("")[1:])
    for ratio, agg in rows:
        print(f"ratio {ratio:5.3f}: rmse {agg.rmse_mm:.2f} mm, mae {agg.mae_mm:.2f} mm")
    return 0


def _graph_tag(nodes_per_level, coord_system, k):
    n = nodes_per_level[0]
    label = f"{n // 1000}K" if n >= 1000 and n % 1000 == 0 else str(n)
    return f"{label}_{coord_system.upper()}_{k}NN"


def _cell_name(fusion, placement, graph_tag=None):
    prefix = {"none": "", "encoder": "GP+", "decoder": "GP/D+", "both": "GP/W+"}[placement]
    name = prefix + fusion.upper()
    if graph_tag:
        name += "_" + graph_tag
    return name


def cmd_ablate(args):
    with open(args.matrix) as fh:
        matrix = json.load(fh)
    base = run_config_from_dict(matrix.get("base", {}))
    fusions = matrix.get("fusions", [base.model.fusion])
    placements = matrix.get("placements", [base.model.propagation])
    graphs = matrix.get("graphs", [None])
    seeds = matrix.get("seeds", [base.model.seed])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for fusion, placement, graph, seed in product(fusions, placements, graphs, seeds):
        cfg = run_config_from_dict(matrix.get("base", {}))
        cfg.model.fusion = fusion
        cfg.model.propagation = placement
        tag = None
        if graph:
            cfg.model.nodes_per_level = tuple(graph.get("nodes_per_level", cfg.model.nodes_per_level))
            cfg.model.k = graph.get("k", cfg.model.k)
            cfg.model.coord_system = graph.get("coord_system", cfg.model.coord_system)
            tag = _graph_tag(cfg.model.nodes_per_level, cfg.model.coord_system, cfg.model.k)
        cfg.model.seed = seed
        name = _cell_name(fusion, placement, tag)
        print(f"[ablate] {name} seed {seed}")
        model, manifest = train_model(cfg)
        eval_samples = build_dataset(cfg.data, cfg.model, split="eval")
        _, aggregate = evaluate_model(model, eval_samples)
        manifest["final_metrics"] = aggregate.__dict__
        cell_dir = out / name.replace("/", "-").replace("+", "_") / f"seed{seed}"
        cell_dir.mkdir(parents=True, exist_ok=True)
        with atomic_output(cell_dir / "checkpoint.acmn") as tmp:
            save_checkpoint(tmp, model.store)
        manifest["checkpoint"] = "checkpoint.acmn"
        with atomic_output(cell_dir / "manifest.json") as tmp:
            write_manifest(tmp, manifest)
        rows.append((name, fusion, placement, tag or "", seed, aggregate))
    with atomic_output(out / "ablation.csv") as tmp:
        with open(tmp, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["variant", "fusion", "placement", "graph", "seed"] + CSV_COLUMNS[1:])
            for name, fusion, placement, tag, seed, agg in rows:
                writer.writerow([name, fusion, placement, tag, seed] + agg.row("")[1:])
    for name, _, _, _, seed, agg in rows:
        print(f"{name:>16} seed {seed}: rmse {agg.rmse_mm:.2f} mm")
    return 0


def cmd_gradcheck(args):
    from . import ops
    from .tensor import Tensor
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    failures = []

    def report(name, err, tol=2e-3):
        status = "ok" if err <= tol else "FAIL"
        print(f"{name:<24} rel_err {err:.2e}  {status}")
        if err > tol:
            failures.append(name)

    x = rng.uniform(-1, 1, (3, 6, 6))
    w = rng.uniform(-1, 1, (2, 3, 3, 3))
    probe = rng.uniform(-1, 1, (2, 6, 6))
    report("conv2d/input", check_grad(
        lambda t: ops.sum_(ops.mul(ops.conv2d(t, Tensor(w, dtype=np.float64), stride=1, padding=1),
                                   Tensor(probe, dtype=np.float64))), x))
    report("conv2d/weight", check_grad(
        lambda t: ops.sum_(ops.mul(ops.conv2d(Tensor(x, dtype=np.float64), t, stride=1, padding=1),
                                   Tensor(probe, dtype=np.float64))), w))
    wt = rng.uniform(-1, 1, (3, 2, 3, 3))
    probe_up = rng.uniform(-1, 1, (2, 12, 12))
    report("conv_transpose2d", check_grad(
        lambda t: ops.sum_(ops.mul(ops.conv_transpose2d(t, Tensor(wt, dtype=np.float64)),
                                   Tensor(probe_up, dtype=np.float64))), x))
    xl = rng.uniform(-1, 1, (5, 4))
    wl = rng.uniform(-1, 1, (3, 4))
    probe_l = rng.uniform(-1, 1, (5, 3))
    report("linear", check_grad(
        lambda t: ops.sum_(ops.mul(ops.linear(t, Tensor(wl, dtype=np.float64)),
                                   Tensor(probe_l, dtype=np.float64))), xl))
    xa = np.concatenate([rng.uniform(0.2, 1, 20), rng.uniform(-1, -0.2, 20)])
    pa = rng.uniform(-1, 1, 40)
    report("leaky_relu", check_grad(
        lambda t: ops.sum_(ops.mul(ops.leaky_relu(t, 0.2), Tensor(pa, dtype=np.float64))), xa))
    report("sigmoid", check_grad(
        lambda t: ops.sum_(ops.mul(ops.sigmoid(t), Tensor(pa, dtype=np.float64))),
        rng.uniform(-3, 3, 40)))
    ws = rng.uniform(-2, 2, (6, 5))
    ps = rng.uniform(-1, 1, (6, 5))
    report("softmax", check_grad(
        lambda t: ops.sum_(ops.mul(ops.softmax_last(t), Tensor(ps, dtype=np.float64))), ws))

    print("network probes:")
    from .config import ModelConfig
    from .data import build_dataset
    from .train import sample_loss
    cfg = desk_config(seed=int(args.seed or 0))
    cfg.model = ModelConfig(levels=2, channels=(8, 8), nodes_per_level=(24, 12), k=4,
                            fi_channels=8, seed=int(args.seed or 0))
    cfg.data = DataConfig(height=16, width=16, n_train=1, n_eval=0, scan_rows=6,
                          train_ratio=1.0, seed=int(args.seed or 0) + 99)
    samples = build_dataset(cfg.data, cfg.model, split="train")
    model = DepthCompletionNet(cfg.model, dtype=np.float64)
    params = model.trainable_parameters()
    # smaller step for the assembled net: attention saturation makes the
    # loss highly curved, and fd truncation error grows as h^2
    results = probe_parameters(lambda build: sample_loss(model, samples[0]),
                               params, n_probes=10, rng=rng, h=3e-5)
    worst = 0.0
    for name, idx, ana, num, err in results:
        worst = max(worst, err)
        print(f"  {name}[{idx}]: tape {ana:+.5e} fd {num:+.5e} rel {err:.2e}")
    report("network/10-probes", worst)

    if failures:
        print(f"FAILED: {failures}", file=sys.stderr)
        return 1
    print("all gradient checks passed")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="acmnet",
                                     description="depth completion experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset + manifest")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset manifest")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--data", required=True, help="dataset manifest JSON")
    p.add_argument("--out", required=True, help="metrics CSV path")
    p.add_argument("--split", default="eval")
    p.add_argument("--ratio", type=float, default=1.0)
    p.add_argument("--baseline", action="store_true",
                   help="score the nearest-observed-fill predictor instead")
    p.add_argument("--dump-attention", default=None)
    p.add_argument("--dump-confidence", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep", help="evaluate one checkpoint across sparsity ratios")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="eval")
    p.add_argument("--ratios", default=None, help="comma-separated, default the 8 standard ratios")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("ablate", help="train/evaluate a config matrix")
    p.add_argument("--matrix", required=True, help="matrix JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference check of ops and network")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_gradcheck)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (AcmnetError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

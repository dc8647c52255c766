"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The expensive criteria share trained models through session fixtures. Set
ACMNET_ACCEPT_CACHE=<dir> to keep checkpoints between invocations while
iterating locally; CI runs without it and trains from scratch.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines on a green run.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from acmnet import ops
from acmnet.checkpoint import load_into_store, save_checkpoint
from acmnet.config import SWEEP_RATIOS, desk_config
from acmnet.data import build_dataset, load_depth_png, save_depth_png, sparsify
from acmnet.gradcheck import check_grad, probe_parameters
from acmnet.graph import build_pyramid, knn_indices
from acmnet.losses import loss_mse, loss_smooth, loss_total
from acmnet.model import DepthCompletionNet
from acmnet.propagation import attention_aggregate
from acmnet.sparse import CameraIntrinsics, SparseDepthMap
from acmnet.tensor import Tensor
from acmnet.train import evaluate_baseline, evaluate_model, sample_loss, train_model

SEEDS = (0, 1, 2)
EVAL_RATIO = 0.05


def report(criterion, passed, detail):
    status = "PASS" if passed else "FAIL"
    print(f"\n[ACCEPTANCE {criterion}] {status}: {detail}")
    return passed


def desk_run_config(seed, fusion="sg", train_ratio=EVAL_RATIO):
    cfg = desk_config(seed=seed)
    cfg.model.fusion = fusion
    if fusion != "sg":
        cfg.model.integration = "end"
    cfg.data.train_ratio = train_ratio
    cfg.data.eval_ratio = EVAL_RATIO
    return cfg


def _train_cached(cache_dir, tag, cfg, train_samples):
    """Train once per (tag); reuse a cached checkpoint when present."""
    model = DepthCompletionNet(cfg.model)
    wall = 0.0
    if cache_dir is not None:
        ck = Path(cache_dir) / f"{tag}.acmn"
        meta = Path(cache_dir) / f"{tag}.json"
        if ck.exists() and meta.exists():
            load_into_store(ck, model.store)
            return model, json.loads(meta.read_text())["wall_clock_sec"]
    t0 = time.perf_counter()
    model, manifest = train_model(cfg, train_samples=train_samples)
    wall = time.perf_counter() - t0
    if cache_dir is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        save_checkpoint(Path(cache_dir) / f"{tag}.acmn", model.store)
        (Path(cache_dir) / f"{tag}.json").write_text(
            json.dumps({"wall_clock_sec": wall}))
    return model, wall


@pytest.fixture(scope="session")
def cache_dir():
    return os.environ.get("ACMNET_ACCEPT_CACHE")


@pytest.fixture(scope="session")
def desk_data():
    """Shared 200-train/50-eval desk dataset at ratio 0.05 plus the baseline score."""
    cfg = desk_run_config(seed=0)
    train = build_dataset(cfg.data, cfg.model, "train")
    evals = build_dataset(cfg.data, cfg.model, "eval")
    _, baseline = evaluate_baseline(evals)
    return train, evals, baseline


@pytest.fixture(scope="session")
def trained_sg(desk_data, cache_dir):
    """The criterion-6 models: SG fusion, feature integration, 3 seeds."""
    train, evals, _ = desk_data
    runs = {}
    for seed in SEEDS:
        cfg = desk_run_config(seed=seed)
        model, wall = _train_cached(cache_dir, f"sg_seed{seed}", cfg, train)
        _, agg = evaluate_model(model, evals)
        runs[seed] = (agg, wall)
    return runs


class TestCriterion1Gradients:
    def test_gradient_suite(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(1001)
        tol = 2e-3
        failures = []

        def many(name, make_loss_factory, x_shape, n=10, lo=-1.0, hi=1.0):
            worst = 0.0
            for _ in range(n):
                x0 = rng.uniform(lo, hi, x_shape)
                worst = max(worst, check_grad(make_loss_factory(), x0))
            if worst > tol:
                failures.append((name, worst))
            return worst

        def probe_loss(op):
            probe_holder = {}

            def factory():
                def loss(t):
                    out = op(t)
                    key = out.shape
                    if key not in probe_holder:
                        probe_holder[key] = rng.uniform(-1, 1, out.shape)
                    return ops.sum_(ops.mul(out, Tensor(probe_holder[key], dtype=np.float64)))
                return loss
            return factory

        w_c = rng.uniform(-1, 1, (4, 3, 3, 3))
        many("conv2d", probe_loss(
            lambda t: ops.conv2d(t, Tensor(w_c, dtype=np.float64), stride=1, padding=1)), (3, 6, 6))
        many("conv2d/s2", probe_loss(
            lambda t: ops.conv2d(t, Tensor(w_c, dtype=np.float64), stride=2, padding=1)), (3, 6, 6))
        w_t = rng.uniform(-1, 1, (3, 2, 3, 3))
        many("conv_transpose2d", probe_loss(
            lambda t: ops.conv_transpose2d(t, Tensor(w_t, dtype=np.float64))), (3, 5, 5))
        w_l = rng.uniform(-1, 1, (4, 6))
        many("linear", probe_loss(
            lambda t: ops.linear(t, Tensor(w_l, dtype=np.float64))), (7, 6))
        many("leaky_relu", probe_loss(lambda t: ops.leaky_relu(t, 0.2)), (40,), lo=0.05, hi=1.0)
        many("leaky_relu/neg", probe_loss(lambda t: ops.leaky_relu(t, 0.2)), (40,), lo=-1.0, hi=-0.05)
        many("sigmoid", probe_loss(ops.sigmoid), (40,), lo=-3, hi=3)
        many("softmax", probe_loss(ops.softmax_last), (8, 6), lo=-2, hi=2)
        many("abs", probe_loss(ops.abs_), (30,), lo=0.05, hi=1.0)
        idx = np.stack([np.random.default_rng(5).permutation(10)[:4] for _ in range(10)])
        many("take_rows", probe_loss(lambda t: ops.take_rows(t, idx)), (10, 5))
        feats_const = Tensor(rng.uniform(-1, 1, (6, 4, 5)), dtype=np.float64)
        many("attend", probe_loss(lambda t: ops.attend(t, feats_const)), (6, 4))
        rows = np.array([0, 2, 5, 7])
        cols = np.array([1, 6, 3, 0])
        many("gather_pixels", probe_loss(lambda t: ops.gather_pixels(t, rows, cols)), (3, 8, 8))
        base_const = Tensor(rng.uniform(-1, 1, (3, 8, 8)), dtype=np.float64)
        many("scatter_pixels", probe_loss(
            lambda t: ops.scatter_pixels(t, rows, cols, base_const)), (4, 3))

        # full 64x64 network, 10 random parameter probes in float64
        from acmnet.config import DataConfig, ModelConfig
        net_cfg = ModelConfig(levels=3, channels=(8, 8, 8), nodes_per_level=(64, 32, 16),
                              k=4, fi_channels=8, seed=0)
        data_cfg = DataConfig(height=64, width=64, n_train=1, n_eval=0, scan_rows=12, seed=3)
        sample = build_dataset(data_cfg, net_cfg, "train")[0]
        model = DepthCompletionNet(net_cfg, dtype=np.float64)
        results = probe_parameters(lambda build: sample_loss(model, sample),
                                   model.trainable_parameters(), n_probes=10,
                                   rng=np.random.default_rng(77), h=3e-5)
        worst_net = max(r[4] for r in results)
        if worst_net > tol:
            failures.append(("network", worst_net))

        elapsed = time.perf_counter() - t0
        ok = not failures and elapsed < 300
        assert report(1, ok, f"primitives+network fd checks, worst_net={worst_net:.2e}, "
                             f"failures={failures}, runtime={elapsed:.1f}s (<300s)")


class TestCriterion2Attention:
    def test_alpha_normalization_and_order_invariance(self):
        # edge weights come from a real propagation block applied to random scenes
        from acmnet.data import generate_scene
        from acmnet.graph import GraphLevel
        from acmnet.layers import ParamStore
        from acmnet.propagation import CoPropagation, edge_weights_co

        rng = np.random.default_rng(2002)
        store = ParamStore(np.random.default_rng(8))
        prop = CoPropagation(store, "p", 16, 3, 16, 0.2)
        worst_sum = 0.0
        worst_perm = 0.0
        levels_seen = set()
        for trial in range(20):
            scene = generate_scene(64, 64, seed=5000 + trial)
            sp = sparsify(scene.dense_depth, "lidar-lines", 1.0, seed=trial, scan_rows=16)
            graphs, _ = build_pyramid(sp, scene.intrinsics, 3, (256, 128, 64), 6, "3d",
                                      seed=trial)
            assert len(graphs) == 3
            for g in graphs:
                if g.empty:
                    continue
                levels_seen.add(g.level)
                n, k = g.neighbors.shape
                # float64 keeps BLAS reordering noise far below the 1e-6 bound
                feats_d = rng.normal(size=(n, 16))
                feats_i = rng.normal(size=(n, 16))
                w_d, _ = edge_weights_co(Tensor(feats_d), Tensor(feats_i), g,
                                         prop.depth_mlp, prop.image_mlp)
                alpha = ops.softmax_last(w_d).data
                worst_sum = max(worst_sum, float(np.abs(alpha.sum(axis=1) - 1.0).max()))

                out = attention_aggregate(Tensor(feats_d), w_d, g).data
                order = np.argsort(rng.random((n, k)), axis=1)
                g2 = GraphLevel(g.level, g.node_pix, g.node_xyz, g.node_depth,
                                np.take_along_axis(g.neighbors, order, axis=1),
                                g.coord_system, g.grid_h, g.grid_w, g.degenerate,
                                np.take_along_axis(g.delta_p, order[:, :, None], 1))
                w2_d, _ = edge_weights_co(Tensor(feats_d), Tensor(feats_i), g2,
                                          prop.depth_mlp, prop.image_mlp)
                out2 = attention_aggregate(Tensor(feats_d), w2_d, g2).data
                worst_perm = max(worst_perm, float(np.abs(out - out2).max()))
        ok = worst_sum < 1e-5 and worst_perm < 1e-6 and levels_seen == {1, 2, 3}
        assert report(2, ok, f"sum-to-one dev {worst_sum:.2e} (<1e-5), "
                             f"neighbor-order dev {worst_perm:.2e} (<1e-6), 20 samples x 3 levels")


class TestCriterion3Knn:
    def test_oracle_equivalence(self):
        rng = np.random.default_rng(3003)
        mismatches = 0
        for trial in range(100):
            n = int(rng.integers(10, 501))
            k = int(rng.integers(1, 9))
            dim = 2 if trial % 2 == 0 else 3
            scale = rng.uniform(0.5, 50)
            pts = rng.normal(size=(n, dim)) * scale
            got, _ = knn_indices(pts, k)
            diff = pts[:, None, :] - pts[None, :, :]
            d2 = (diff * diff).sum(axis=2)
            np.fill_diagonal(d2, np.inf)
            order = np.lexsort((np.broadcast_to(np.arange(n), (n, n)), d2), axis=1)
            want = order[:, :min(k, n - 1)]
            if not np.array_equal(got, want):
                mismatches += 1
        assert report(3, mismatches == 0,
                      f"{mismatches} mismatches over 100 instances (<=500 nodes, 2D+3D)")


class TestCriterion4EndIntegration:
    def test_convexity_and_shift_invariance(self):
        from acmnet.fusion import ConfidencePair, end_integrate
        rng = np.random.default_rng(4004)
        worst_bound = 0.0
        worst_shift = 0.0
        for _ in range(50):
            shape = (int(rng.integers(4, 20)), int(rng.integers(4, 20)))
            y_d = rng.normal(size=shape) * 20
            y_i = rng.normal(size=shape) * 20
            c_d = rng.normal(size=shape) * 10
            c_i = rng.normal(size=shape) * 10
            out = end_integrate(Tensor(y_d, dtype=np.float64), Tensor(y_i, dtype=np.float64),
                                ConfidencePair(Tensor(c_d, dtype=np.float64),
                                               Tensor(c_i, dtype=np.float64))).data
            lo = np.minimum(y_d, y_i)
            hi = np.maximum(y_d, y_i)
            worst_bound = max(worst_bound, float((lo - out).max()), float((out - hi).max()))
            shift = float(rng.uniform(-200, 200))
            out_s = end_integrate(Tensor(y_d, dtype=np.float64), Tensor(y_i, dtype=np.float64),
                                  ConfidencePair(Tensor(c_d + shift, dtype=np.float64),
                                                 Tensor(c_i + shift, dtype=np.float64))).data
            worst_shift = max(worst_shift, float(np.abs(out_s - out).max()))
        ok = worst_bound <= 1e-9 and worst_shift < 1e-6
        assert report(4, ok, f"bound violation {worst_bound:.2e} (<=1e-9 fp slack), "
                             f"shift sensitivity {worst_shift:.2e} (<1e-6), 50 tensors")


class TestCriterion5Losses:
    def test_hand_values_and_defaults(self):
        checks = []
        gt = np.array([[2.0, 0.0, 4.0]])
        checks.append(abs(loss_mse(gt, Tensor([[3.0, 9.0, 4.0]])).item() - 0.5) < 1e-6)
        perfect = np.array([[1.5, 2.5]])
        checks.append(loss_mse(perfect, Tensor(perfect)).item() == 0.0)

        h, w, s = 6, 8, 0.75
        ramp = np.tile(np.arange(w, dtype=np.float64) * s, (h, 1))
        got = loss_smooth(Tensor(ramp, dtype=np.float64), np.full((3, h, w), 0.3)).item()
        checks.append(abs(got - s * h * (w - 1) / (h * w)) < 1e-6)
        checks.append(loss_smooth(Tensor(np.full((4, 4), 2.0)), np.random.rand(3, 4, 4)).item() == 0.0)

        rgb = np.full((3, 1, 3), 0.5)
        y = Tensor(np.array([[3.0, 9.0, 4.0]]), dtype=np.float64)
        ys = Tensor(np.array([[2.0, 1.0, 5.0]]), dtype=np.float64)
        yi = Tensor(np.array([[2.5, 0.0, 4.0]]), dtype=np.float64)
        expected = 0.5 + 0.5 * 0.5 + 0.5 * 0.125 + 0.01 * (11.0 / 3.0)
        got_total = loss_total(y, ys, yi, gt, rgb, gamma1=0.5, gamma2=0.01).item()
        checks.append(abs(got_total - expected) < 1e-6)

        import inspect
        sig = inspect.signature(loss_total)
        checks.append(sig.parameters["gamma1"].default == 0.5)
        checks.append(sig.parameters["gamma2"].default == 0.01)
        assert report(5, all(checks), f"hand-computed loss values within 1e-6, "
                                      f"gamma defaults (0.5, 0.01); checks={checks}")


class TestCriterion6DeskLearning:
    def test_learning_beats_baseline(self, desk_data, trained_sg):
        _, _, baseline = desk_data
        details = []
        ok = True
        for seed in SEEDS:
            agg, wall = trained_sg[seed]
            ratio = agg.rmse_mm / baseline.rmse_mm
            seed_ok = ratio <= 0.75 and wall < 1800
            ok &= seed_ok
            details.append(f"seed{seed}: rmse {agg.rmse_mm:.0f}mm vs baseline "
                           f"{baseline.rmse_mm:.0f}mm (ratio {ratio:.3f}, wall {wall:.0f}s)")
        assert report(6, ok, "; ".join(details) + " [need ratio<=0.75, wall<1800s, 3/3 seeds]")


class TestCriterion7AblationDirection:
    def test_fusion_ordering_reported_not_gated(self, desk_data, trained_sg, cache_dir):
        train, evals, _ = desk_data
        rmse = {"sg": {seed: trained_sg[seed][0].rmse_mm for seed in SEEDS}}
        for fusion in ("daf", "df"):
            rmse[fusion] = {}
            for seed in SEEDS:
                cfg = desk_run_config(seed=seed, fusion=fusion)
                model, _ = _train_cached(cache_dir, f"{fusion}_seed{seed}", cfg, train)
                _, agg = evaluate_model(model, evals)
                rmse[fusion][seed] = agg.rmse_mm
        ordered = sum(rmse["sg"][s] <= rmse["daf"][s] <= rmse["df"][s] for s in SEEDS)
        lines = [f"seed{s}: SG {rmse['sg'][s]:.0f} / DAF {rmse['daf'][s]:.0f} / "
                 f"DF {rmse['df'][s]:.0f} mm" for s in SEEDS]
        # soft criterion: the ordering is recorded for inspection, not gated
        report(7, True, f"SG<=DAF<=DF held for {ordered}/3 seeds (soft, reported); "
                        + "; ".join(lines))


class TestCriterion8SparsitySweep:
    def test_sweep_shape(self, desk_data, cache_dir, tmp_path):
        train_full = None
        cfg = desk_run_config(seed=0, train_ratio=1.0)
        train_full = build_dataset(cfg.data, cfg.model, "train")
        model, _ = _train_cached(cache_dir, "sg_full_seed0", cfg, train_full)
        rows = []
        for ratio in SWEEP_RATIOS:
            eval_cfg = desk_run_config(seed=0)
            eval_cfg.data.eval_ratio = ratio
            evals = build_dataset(eval_cfg.data, eval_cfg.model, "eval")
            _, agg = evaluate_model(model, evals)
            rows.append((ratio, agg.rmse_mm))
        csv_path = tmp_path / "sweep.csv"
        with open(csv_path, "w") as fh:
            fh.write("ratio,rmse_mm\n")
            for ratio, value in rows:
                fh.write(f"{ratio},{value:.4f}\n")
        by_ratio = dict(rows)
        ok = by_ratio[1.0] < by_ratio[0.025]
        assert report(8, ok, f"rmse@1.0 {by_ratio[1.0]:.0f}mm < rmse@0.025 "
                             f"{by_ratio[0.025]:.0f}mm; full curve {rows}")


class TestCriterion9RoundTripDeterminism:
    def test_png_roundtrip_1000_maps(self, tmp_path):
        rng = np.random.default_rng(9009)
        bad = 0
        for i in range(1000):
            q = rng.integers(0, 20000, (8, 11)).astype(np.float32) / 256.0
            p = tmp_path / "m.png"
            save_depth_png(q, p)
            if not np.array_equal(load_depth_png(p).depth, q):
                bad += 1
        ok_png = bad == 0

        from acmnet.config import DataConfig, ModelConfig, RunConfig, TrainConfig
        run = RunConfig(model=ModelConfig(levels=2, channels=(8, 8), nodes_per_level=(24, 12),
                                          k=4, fi_channels=8, seed=0),
                        data=DataConfig(height=16, width=16, n_train=3, n_eval=0,
                                        scan_rows=6, seed=91),
                        train=TrainConfig(steps=8, batch_size=1, epoch_steps=3))
        _, m1 = train_model(run)
        _, m2 = train_model(run)
        ok_det = m1["loss_log"] == m2["loss_log"]
        assert report(9, ok_png and ok_det,
                      f"png roundtrip failures {bad}/1000; identical loss curves: {ok_det}")

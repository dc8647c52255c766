"""Training loop, evaluation, and run manifests."""

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import ops
from .config import RunConfig
from .data import build_dataset, nearest_fill
from .errors import TrainingDiverged
from .losses import loss_total
from .metrics import PixelPool, compute_metrics
from .model import DepthCompletionNet
from .optim import adam_step, lr_at_step


def worker_count(n_items):
    """Worker cap from ACMNET_THREADS (default 1: deterministic, CI-friendly)."""
    cap = int(os.environ.get("ACMNET_THREADS", "1"))
    return max(1, min(cap, n_items))


def sample_loss(model, sample):
    cfg = model.cfg
    out = model.forward(sample)
    return loss_total(out.prediction, out.depth_branch, out.image_branch,
                      sample.gt, sample.rgb, gamma1=cfg.gamma1, gamma2=cfg.gamma2)


def train_model(run_cfg: RunConfig, train_samples=None, log_fn=None):
    """Train a fresh model; returns (model, manifest dict).

    The manifest captures the config snapshot, seed, per-step loss log,
    wall clock, and parameter count. Loss going non-finite aborts with
    TrainingDiverged carrying the offending step.
    """
    t0 = time.perf_counter()
    if train_samples is None:
        train_samples = build_dataset(run_cfg.data, run_cfg.model, split="train")
    model = DepthCompletionNet(run_cfg.model)
    params = model.trainable_parameters()
    tc = run_cfg.train
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([run_cfg.model.seed, 202]))
    order = shuffle_rng.permutation(len(train_samples))
    cursor = 0
    losses = []
    inv_batch = 1.0 / tc.batch_size
    for step in range(1, tc.steps + 1):
        step_loss = 0.0
        for _ in range(tc.batch_size):
            if cursor == len(order):
                order = shuffle_rng.permutation(len(train_samples))
                cursor = 0
            sample = train_samples[order[cursor]]
            cursor += 1
            try:
                loss = sample_loss(model, sample)
            except ValueError as e:
                # NaN weights trip the attention softmax's hard error
                raise TrainingDiverged(step, float("nan")) from e
            ops.mul(loss, inv_batch).backward()
            step_loss += loss.item() * inv_batch
        if not np.isfinite(step_loss):
            raise TrainingDiverged(step, step_loss)
        adam_step(params, lr=lr_at_step(step, tc.lr, tc.epoch_steps, tc.lr_halve_epochs),
                  beta1=tc.beta1, beta2=tc.beta2)
        losses.append(step_loss)
        if log_fn and (step % 100 == 0 or step == 1):
            log_fn(step, step_loss)
    manifest = {
        "config": run_cfg.to_dict(),
        "seed": run_cfg.model.seed,
        "loss_log": losses,
        "final_metrics": None,
        "wall_clock_sec": time.perf_counter() - t0,
        "param_count": model.param_count(),
    }
    return model, manifest


def predict(model, sample):
    return model.forward(sample).prediction.data


def evaluate_samples(predict_fn, samples):
    """Per-sample metrics plus a pixel-pooled aggregate record."""
    workers = worker_count(len(samples))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            preds = list(pool.map(predict_fn, samples))
    else:
        preds = [predict_fn(s) for s in samples]
    per_sample = []
    agg = PixelPool()
    for sample, pred in zip(samples, preds):
        per_sample.append((sample.sample_id, compute_metrics(sample.gt, pred)))
        agg.add(sample.gt, pred)
    return per_sample, agg.record()


def evaluate_model(model, samples):
    return evaluate_samples(lambda s: predict(model, s), samples)


def evaluate_baseline(samples):
    return evaluate_samples(lambda s: nearest_fill(s.sparse), samples)


def write_manifest(path, manifest):
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")

#!/usr/bin/env python3
"""Train a small model on synthetic scenes and compare against nearest-fill.

A shortened run (300 steps, 40 scenes) that still separates the learned model
from the baseline. The full desk protocol lives in the acceptance suite and
the `acmnet train` command.
"""

import time

import numpy as np

from acmnet.config import desk_config
from acmnet.data import build_dataset, nearest_fill
from acmnet.metrics import compute_metrics
from acmnet.train import evaluate_baseline, evaluate_model, train_model

cfg = desk_config(seed=0)
cfg.data.n_train = 40
cfg.data.n_eval = 10
cfg.data.train_ratio = 0.05
cfg.data.eval_ratio = 0.05
cfg.train.steps = 300

train = build_dataset(cfg.data, cfg.model, "train")
evals = build_dataset(cfg.data, cfg.model, "eval")
print(f"{len(train)} train / {len(evals)} eval scenes, "
      f"~{train[0].sparse.observed_count} observed pixels each")

_, baseline = evaluate_baseline(evals)
print(f"nearest-fill baseline: rmse {baseline.rmse_mm:.0f} mm, mae {baseline.mae_mm:.0f} mm")

t0 = time.perf_counter()
model, manifest = train_model(
    cfg, train_samples=train,
    log_fn=lambda s, l: print(f"  step {s:4d} loss {l:8.3f}"))
print(f"trained {cfg.train.steps} steps in {time.perf_counter() - t0:.0f}s "
      f"({manifest['param_count']} parameters)")

_, learned = evaluate_model(model, evals)
print(f"learned model: rmse {learned.rmse_mm:.0f} mm, mae {learned.mae_mm:.0f} mm "
      f"({100 * (1 - learned.rmse_mm / baseline.rmse_mm):.0f}% below baseline)")

# per-sample view on one scene
sample = evals[0]
pred = model.forward(sample).prediction.data
print("\nfirst eval scene:")
print("  model     ", compute_metrics(sample.gt, pred))
print("  baseline  ", compute_metrics(sample.gt, nearest_fill(sample.sparse)))

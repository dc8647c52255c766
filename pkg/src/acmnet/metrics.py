"""Evaluation metrics over labeled pixels, with pooled aggregation.

Units: depth internally in meters; RMSE/MAE reported in mm, inverse metrics
in 1/km (1/d with d in meters, times 1000). Delta thresholds use the strict
comparison max(pred/gt, gt/pred) < 1.25^t. Predictions <= 0 are clamped to
1e-3 m for the inverse and ratio metrics only; the clamp count is recorded.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

CLAMP_MIN_M = 1e-3
DELTA_THRESHOLDS = (1.25, 1.25 ** 2, 1.25 ** 3)

CSV_COLUMNS = ["sample", "rmse_mm", "mae_mm", "irmse_invkm", "imae_invkm",
               "rel", "d1", "d2", "d3"]


@dataclass
class MetricsRecord:
    rmse_mm: float
    mae_mm: float
    irmse_invkm: float
    imae_invkm: float
    rel: float
    d1: float
    d2: float
    d3: float
    n_pixels: int
    n_clamped: int

    def row(self, sample_id):
        return [sample_id, f"{self.rmse_mm:.4f}", f"{self.mae_mm:.4f}",
                f"{self.irmse_invkm:.6f}", f"{self.imae_invkm:.6f}",
                f"{self.rel:.6f}", f"{self.d1:.4f}", f"{self.d2:.4f}", f"{self.d3:.4f}"]


class PixelPool:
    """Accumulates per-pixel error statistics so aggregation pools pixels."""

    def __init__(self):
        self.n = 0
        self.n_clamped = 0
        self.sum_sq = 0.0
        self.sum_abs = 0.0
        self.sum_isq = 0.0
        self.sum_iabs = 0.0
        self.sum_rel = 0.0
        self.counts_delta = [0, 0, 0]

    def add(self, gt, pred, labeled_only=True):
        gt = np.asarray(gt, dtype=np.float64)
        pred = np.asarray(pred, dtype=np.float64)
        if gt.shape != pred.shape:
            raise ConfigError(f"metrics: shape mismatch {gt.shape} vs {pred.shape}")
        sel = gt > 0 if labeled_only else np.ones_like(gt, dtype=bool)
        g = gt[sel]
        p = pred[sel]
        if g.size == 0:
            return
        err = p - g
        self.n += g.size
        self.n_clamped += int((p <= 0).sum())
        self.sum_sq += float((err * err).sum())
        self.sum_abs += float(np.abs(err).sum())
        self.sum_rel += float((np.abs(err) / g).sum())
        p_safe = np.maximum(p, CLAMP_MIN_M)
        ierr = 1.0 / g - 1.0 / p_safe
        self.sum_isq += float((ierr * ierr).sum())
        self.sum_iabs += float(np.abs(ierr).sum())
        ratio = np.maximum(p_safe / g, g / p_safe)
        for i, t in enumerate(DELTA_THRESHOLDS):
            self.counts_delta[i] += int((ratio < t).sum())

    def record(self):
        if self.n == 0:
            return MetricsRecord(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0, 0)
        n = float(self.n)
        return MetricsRecord(
            rmse_mm=1000.0 * float(np.sqrt(self.sum_sq / n)),
            mae_mm=1000.0 * self.sum_abs / n,
            irmse_invkm=1000.0 * float(np.sqrt(self.sum_isq / n)),
            imae_invkm=1000.0 * self.sum_iabs / n,
            rel=self.sum_rel / n,
            d1=100.0 * self.counts_delta[0] / n,
            d2=100.0 * self.counts_delta[1] / n,
            d3=100.0 * self.counts_delta[2] / n,
            n_pixels=self.n,
            n_clamped=self.n_clamped,
        )


def compute_metrics(gt, pred, labeled_only=True):
    """All eight metrics for one (ground truth, prediction) pair."""
    pool = PixelPool()
    pool.add(gt, pred, labeled_only=labeled_only)
    return pool.record()


def write_metrics_csv(path, per_sample, aggregate):
    """CSV with one row per (sample_id, record) plus a pooled 'all' row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for sample_id, rec in per_sample:
            writer.writerow(rec.row(sample_id))
        writer.writerow(aggregate.row("all"))

"""Training objectives: masked MSE, edge-aware smoothness, and their weighted sum."""

import warnings

import numpy as np

from . import ops
from .tensor import Tensor


def loss_mse(gt_depth, prediction):
    """Masked mean squared error over labeled (gt > 0) pixels.

    gt_depth is a plain [H, W] array (semi-dense: 0 marks unlabeled);
    prediction is an [H, W] Tensor. Unlabeled pixels contribute no gradient.
    """
    gt = np.asarray(gt_depth)
    labeled = gt > 0
    n_labeled = int(labeled.sum())
    if n_labeled == 0:
        warnings.warn("loss_mse: no labeled pixels, returning zero loss")
        return Tensor(np.zeros((), dtype=prediction.dtype))
    mask = Tensor(labeled.astype(prediction.dtype))
    diff = ops.mul(ops.sub(prediction, Tensor(gt, dtype=prediction.dtype)), mask)
    return ops.div(ops.sum_(ops.mul(diff, diff)), float(n_labeled))


def image_gradient_weights(rgb):
    """exp(-|grad rgb|) along u and v, channel-mean magnitude: ([H,W-1], [H-1,W])."""
    rgb = np.asarray(rgb)
    du = np.abs(rgb[:, :, 1:] - rgb[:, :, :-1]).mean(axis=0)
    dv = np.abs(rgb[:, 1:, :] - rgb[:, :-1, :]).mean(axis=0)
    return np.exp(-du), np.exp(-dv)


def loss_smooth(prediction, rgb):
    """Edge-aware smoothness: mean over all H*W pixels of |grad y| * exp(-|grad rgb|).

    Forward differences along u and v; the image gradient magnitude is the
    mean absolute channel difference.
    """
    h, w = prediction.shape
    w_u, w_v = image_gradient_weights(rgb)
    du = ops.abs_(ops.sub(ops.narrow(prediction, 1, 1, w - 1), ops.narrow(prediction, 1, 0, w - 1)))
    dv = ops.abs_(ops.sub(ops.narrow(prediction, 0, 1, h - 1), ops.narrow(prediction, 0, 0, h - 1)))
    term_u = ops.sum_(ops.mul(du, Tensor(w_u, dtype=prediction.dtype)))
    term_v = ops.sum_(ops.mul(dv, Tensor(w_v, dtype=prediction.dtype)))
    return ops.div(ops.add(term_u, term_v), float(h * w))


def loss_total(prediction, pred_depth_branch, pred_image_branch, gt_depth, rgb,
               gamma1=0.5, gamma2=0.01):
    """Full objective: main MSE + gamma1 * branch MSEs + gamma2 * smoothness."""
    total = loss_mse(gt_depth, prediction)
    if gamma1 > 0:
        total = ops.add(total, ops.mul(loss_mse(gt_depth, pred_depth_branch), gamma1))
        total = ops.add(total, ops.mul(loss_mse(gt_depth, pred_image_branch), gamma1))
    if gamma2 > 0:
        total = ops.add(total, ops.mul(loss_smooth(prediction, rgb), gamma2))
    return total

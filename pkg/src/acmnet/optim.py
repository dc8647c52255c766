"""Adam optimizer and the step-based learning-rate schedule."""

import numpy as np

from .errors import MissingGradient

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
BASE_LR = 5e-4


def adam_step(params, lr=BASE_LR, beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
    """One Adam update with bias correction; clears gradients afterwards.

    Raises MissingGradient if any parameter saw no backward pass: that means
    part of the model is detached from the loss.
    """
    for p in params:
        if p.tensor._grad is None:
            raise MissingGradient(f"parameter {p.name!r} has no gradient; subgraph detached from loss?")
    for p in params:
        g = p.tensor._grad
        p.step += 1
        p.m *= beta1
        p.m += (1.0 - beta1) * g
        p.v *= beta2
        p.v += (1.0 - beta2) * (g * g)
        m_hat = p.m / (1.0 - beta1 ** p.step)
        v_hat = p.v / (1.0 - beta2 ** p.step)
        np.sqrt(v_hat, out=v_hat)
        v_hat += eps
        m_hat /= v_hat
        m_hat *= lr
        p.tensor.data -= m_hat.astype(p.tensor.dtype, copy=False)
        p.tensor.zero_grad()


def lr_at_step(step, base_lr, epoch_steps, halve_every_epochs=10):
    """Learning rate for a 1-based step: halved every `halve_every_epochs` epochs."""
    if epoch_steps <= 0:
        return base_lr
    halvings = (step - 1) // (halve_every_epochs * epoch_steps)
    return base_lr * (0.5 ** halvings)

"""Training losses with analytic gradients.

Both losses return (scalar loss, gradient w.r.t. the first argument).
The scalar is accumulated in float64 for stable logging; gradients keep
the input dtype.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidTarget, ShapeError


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_with_logits(logits: np.ndarray, targets: np.ndarray, pos_weight: float = 1.0):
    """Weighted binary cross-entropy on raw logits.

    loss = mean_i w_i * (softplus(z_i) - y_i * z_i) with w_i = pos_weight
    for positive targets and 1 otherwise. softplus is evaluated as
    logaddexp(0, z), so saturated logits never overflow and the sigmoid
    is never materialized inside a log.
    """
    logits = np.asarray(logits)
    targets = np.asarray(targets)
    if logits.shape != targets.shape:
        raise ShapeError(f"logits {logits.shape} vs targets {targets.shape}")
    if not np.all((targets == 0) | (targets == 1)):
        raise InvalidTarget("targets must be exactly 0 or 1")
    y = targets.astype(logits.dtype)
    w = np.where(y == 1, np.asarray(pos_weight, dtype=logits.dtype), logits.dtype.type(1))
    per = w * (np.logaddexp(logits.dtype.type(0), logits) - y * logits)
    loss = float(np.mean(per, dtype=np.float64))
    grad = (w * (_sigmoid(logits) - y) / logits.dtype.type(logits.size)).astype(logits.dtype)
    return loss, grad


def mse(x: np.ndarray, target: np.ndarray):
    """Mean squared error over all elements."""
    x = np.asarray(x)
    target = np.asarray(target)
    if x.shape != target.shape:
        raise ShapeError(f"prediction {x.shape} vs target {target.shape}")
    diff = x - target.astype(x.dtype)
    loss = float(np.mean(diff.astype(np.float64) ** 2))
    grad = (2.0 / diff.size) * diff
    return loss, grad.astype(x.dtype)

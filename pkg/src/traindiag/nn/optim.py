"""Adam optimizer with per-group learning rates."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .layers import Parameter


class Adam:
    """Standard Adam with bias correction.

    `groups` maps a learning rate to a list of parameters; the pipeline
    uses two groups (conv stack and dense stack). The update divides by
    sqrt(v_hat) + eps. Deterministic: state layout and update order
    follow the given parameter order.
    """

    def __init__(self, groups: list[dict], beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.groups = []
        for group in groups:
            params: list[Parameter] = list(group["params"])
            self.groups.append({
                "params": params,
                "lr": float(group["lr"]),
                "m": [np.zeros_like(p.value) for p in params],
                "v": [np.zeros_like(p.value) for p in params],
            })
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for group in self.groups:
            lr = group["lr"]
            for p, m, v in zip(group["params"], group["m"], group["v"]):
                g = p.grad
                if g.shape != p.value.shape:
                    raise ShapeError(f"gradient {g.shape} vs parameter {p.value.shape} for {p.name}")
                m *= b1
                m += (1 - b1) * g
                v *= b2
                v += (1 - b2) * np.square(g)
                update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
                p.value -= (lr * update).astype(p.value.dtype)

    def zero_grad(self):
        for group in self.groups:
            for p in group["params"]:
                p.grad = np.zeros_like(p.value)

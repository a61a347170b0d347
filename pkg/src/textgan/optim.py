"""Adam with linear learning-rate warmup."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    warmup_steps: int = 100
    batch_size: int = 16

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


class Adam:
    """Bias-corrected Adam over a list of parameter tensors.

    The step size ramps linearly from ``lr / warmup_steps`` to ``lr`` over the
    first ``warmup_steps`` updates and stays constant afterwards.
    """

    def __init__(self, params, config=None):
        self.params = list(params)
        self.config = config or OptimizerConfig()
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def current_lr(self, step=None):
        step = self.t + 1 if step is None else step
        c = self.config
        if c.warmup_steps and step < c.warmup_steps:
            return c.lr * step / c.warmup_steps
        return c.lr

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        c = self.config
        lr = self.current_lr()
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + c.eps)
        return lr

"""SGD with momentum, AdamW and a per-step cosine schedule with linear warmup."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..autodiff.nn import Parameter


def _no_decay(p: Parameter) -> bool:
    # biases, norm affine and layer-scale vectors are not decayed
    return p.data.ndim <= 1


class Optimizer:
    def __init__(self, params: Sequence[Parameter], lr: float, weight_decay: float = 0.0):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        raise NotImplementedError


class SGD(Optimizer):
    """Heavy-ball momentum; L2 weight decay is added to the gradient."""

    def __init__(self, params, lr: float = 0.1, momentum: float = 0.9, weight_decay: float = 5e-4):
        super().__init__(params, lr, weight_decay)
        self.momentum = momentum
        self.buf = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p, b in zip(self.params, self.buf):
            if p.grad is None:
                continue
            g = p.grad
            if self.weight_decay and not _no_decay(p):
                g = g + self.weight_decay * p.data
            b *= self.momentum
            b += g
            p.data -= (self.lr * b).astype(p.dtype)


class AdamW(Optimizer):
    def __init__(self, params, lr: float = 3e-3, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.03):
        super().__init__(params, lr, weight_decay)
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            if self.weight_decay and not _no_decay(p):
                p.data -= (self.lr * self.weight_decay * p.data).astype(p.dtype)
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p.data -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype)


class CosineSchedule:
    """``lr(t)`` for step ``t``: linear warmup to ``base_lr``, then cosine decay to ``min_lr`` at ``total``."""

    def __init__(self, base_lr: float, total_steps: int, warmup_steps: int = 0, min_lr: float = 0.0):
        if total_steps <= 0 or warmup_steps < 0 or warmup_steps >= total_steps and warmup_steps:
            raise ValueError(f"bad schedule: total={total_steps}, warmup={warmup_steps}")
        self.base_lr, self.total, self.warmup, self.min_lr = base_lr, total_steps, warmup_steps, min_lr

    def __call__(self, t: int) -> float:
        if t < self.warmup:
            return self.base_lr * (t + 1) / self.warmup
        span = self.total - self.warmup
        frac = min(max(t - self.warmup, 0), span) / span
        return self.min_lr + 0.5 * (self.base_lr - self.min_lr) * (1.0 + math.cos(math.pi * frac))

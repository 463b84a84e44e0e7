"""Central finite-difference checks of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward, get_tape


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    n_checked: int

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error < tol


def check_gradients(fn: Callable[[], Tensor], tensors: Sequence[tuple[str, Tensor]],
                    step: float = 1e-5, max_entries: int | None = None,
                    rng: np.random.Generator | None = None) -> list[GradCheckResult]:
    """Compare ``backward`` against central differences of the scalar ``fn()``.

    The error of each entry is ``|analytic - numeric| / max(1, |analytic|)``.
    ``fn`` must be deterministic (no dropout, BN in a fixed mode).  With
    ``max_entries`` a random subset of each tensor is perturbed.
    """
    for _, t in tensors:
        t.grad = None
    get_tape().reset()
    loss = fn()
    backward(loss)
    analytic = {name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
                for name, t in tensors}

    from .tensor import no_grad
    results = []
    for name, t in tensors:
        flat = t.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = (rng or np.random.default_rng(0)).choice(flat.size, max_entries, replace=False)
        a = analytic[name].reshape(-1)
        worst = 0.0
        for i in idx:
            orig = flat[i]
            with no_grad():
                flat[i] = orig + step
                fp = float(fn().data)
                flat[i] = orig - step
                fm = float(fn().data)
            flat[i] = orig
            num = (fp - fm) / (2 * step)
            err = abs(a[i] - num) / max(1.0, abs(a[i]))
            worst = max(worst, err)
        results.append(GradCheckResult(name, worst, len(idx)))
    return results


def check_module_gradients(module, x: Tensor, max_entries: int | None = 6, step: float = 1e-5,
                           seed: int = 0) -> list[GradCheckResult]:
    """Gradcheck a module's parameters and its input under a random linear read-out.

    Use 64-bit parameters and input; the module's train/eval mode is left as is.
    """
    from . import functional as F
    rng = np.random.default_rng(seed)
    x.requires_grad = True
    probe = module(x)
    weights = Tensor(rng.standard_normal(probe.shape), dtype=probe.dtype)
    get_tape().reset()

    def fn():
        return F.sum(module(x) * weights)

    tensors = [("input", x)] + list(module.named_parameters())
    return check_gradients(fn, tensors, step=step, max_entries=max_entries, rng=rng)

"""Parameter and FLOP accounting measured on the built network.

FLOPs are counted by running one forward pass with a hook that sees every
conv and linear call, so the numbers always follow the real layer shapes.
BN, pooling and activations are not counted.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import functional as F
from .autodiff.nn import Module
from .autodiff.tensor import Tensor, no_grad

CONVENTIONS = ("mac", "2mac")


@dataclass
class CostReport:
    params: int
    flops: int
    resolution: int
    convention: str


def count_params(model: Module) -> int:
    """Total scalar weights of the allocated parameter tensors (BN affine included, buffers not)."""
    return int(sum(p.data.size for p in model.parameters()))


def count_flops(model: Module, resolution: int = 224, convention: str = "mac", include_bias: bool = True,
                in_channels: int = 3) -> int:
    """FLOPs of one ``resolution x resolution`` image.

    ``"mac"`` counts one per multiply-accumulate, ``"2mac"`` counts two.  With
    ``include_bias`` every bias addition adds one.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    mult = 1 if convention == "mac" else 2
    total = [0]

    def hook(macs, bias_adds):
        total[0] += mult * macs + (bias_adds if include_bias else 0)

    dtype = next(iter(model.parameters())).dtype if model.parameters() else np.float32
    x = Tensor(np.zeros((1, in_channels, resolution, resolution), dtype=dtype))
    was_training = model.training
    prev = F._flop_hook
    model.eval()
    F._flop_hook = hook
    try:
        with no_grad():
            model(x)
    finally:
        F._flop_hook = prev
        model.train(was_training)
    return int(total[0])


def cost_report(model: Module, resolution: int = 224, convention: str = "mac") -> CostReport:
    return CostReport(count_params(model), count_flops(model, resolution, convention), resolution, convention)

"""Self-check suites behind ``spectral-gate verify``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral


@dataclass
class CheckRow:
    name: str
    measured: str
    expected: str
    passed: bool

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<28} measured {self.measured:<24} expected {self.expected}"


def conv_theorem_suite(n_pairs: int = 100, size: int = 64, seed: int = 0) -> list[CheckRow]:
    rng = np.random.default_rng(seed)
    worst = max(spectral.verify_convolution_theorem(rng.standard_normal((size, size)),
                                                    rng.standard_normal((size, size))) for _ in range(n_pairs))
    rows = [CheckRow(f"residual ({n_pairs} pairs)", f"{worst:.2e}", "< 1e-10", worst < 1e-10)]
    for omega in (4.0, 8.0, 12.0):
        rep = spectral.product_support(spectral.band_limited_field((size, size), omega, rng), omega)
        ok = rep.outside_fraction < 1e-9 and rep.max_radius <= 2 * omega + 1e-9
        rows.append(CheckRow(f"support of u*u, omega={omega:g}",
                             f"r_max {rep.max_radius:.2f}, out {rep.outside_fraction:.1e}",
                             f"r_max <= {2 * omega:g}, out < 1e-9", ok))
    return rows


def decay_suite() -> list[CheckRow]:
    fits = {n: spectral.activation_decay_fit(n) for n in ("step", "relu", "relu6", "gelu", "silu")}
    rows = [
        CheckRow("step exponent", f"{fits['step'].exponent:.3f}", "1.0 +/- 0.3", abs(fits["step"].exponent - 1) <= 0.3),
        CheckRow("relu exponent", f"{fits['relu'].exponent:.3f}", "2.0 +/- 0.3", abs(fits["relu"].exponent - 2) <= 0.3),
        CheckRow("gelu exponent", f"{fits['gelu'].exponent:.3f}", f">= relu + 1 = {fits['relu'].exponent + 1:.3f}",
                 fits["gelu"].exponent >= fits["relu"].exponent + 1),
    ]
    for n in ("relu6", "silu"):
        rows.append(CheckRow(f"{n} exponent (info)", f"{fits[n].exponent:.3f}", "reported", True))
    return rows


def gradcheck_suite(seed: int = 0) -> list[CheckRow]:
    from .activations import Activation
    from .autodiff import (BatchNorm, Conv2d, LayerNorm2d, Linear, Tensor, check_module_gradients,
                           default_dtype, manual_seed)
    from .blocks import BlockConfig, GluVariant, GmNetBlock, MBV2GluBlock, ResNetBasicBlock

    rng = np.random.default_rng(seed)
    cases = []
    with default_dtype(np.float64):
        manual_seed(seed)
        cases += [
            ("conv3x3 s2 p1", Conv2d(3, 4, 3, stride=2, padding=1), (2, 3, 6, 6)),
            ("conv dw7", Conv2d(3, 3, 7, padding=3, groups=3), (2, 3, 7, 7)),
            ("conv 1x1", Conv2d(3, 5, 1), (2, 3, 4, 4)),
            ("batchnorm2d", BatchNorm(3), (4, 3, 3, 3)),
            ("layernorm2d", LayerNorm2d(3), (2, 3, 3, 3)),
            ("linear", Linear(6, 4, init_std=0.5), (3, 6)),
        ]
        for v in GluVariant:
            for a in Activation:
                cases.append((f"gmnet {v.value}/{a.value}",
                              GmNetBlock(BlockConfig(3, 2, kernel=3, layer_scale_init=1.0, activation=a, glu=v)),
                              (2, 3, 4, 4)))
        for v, a in [("baseline", "relu"), ("ewp", "identity"), ("gate", "relu"), ("gate", "relu6"),
                     ("gate", "gelu"), ("gate", "silu")]:
            cases.append((f"resnet {v}/{a}", ResNetBasicBlock(3, 4, 2, v, a), (2, 3, 6, 6)))
        cases.append(("mbv2 gate relu6", MBV2GluBlock(3, 3, 1, 2, "relu6"), (2, 3, 5, 5)))
    rows = []
    for name, mod, shape in cases:
        x = Tensor(rng.standard_normal(shape), dtype=np.float64)
        worst = max(r.max_rel_error for r in check_module_gradients(mod, x, max_entries=4, seed=seed))
        rows.append(CheckRow(name, f"{worst:.2e}", "< 1e-4", worst < 1e-4))
    return rows


def counts_suite() -> list[CheckRow]:
    from .cost import count_flops, count_params
    from .models import GMNET_REFERENCE, ModelConfig, build_model
    rows = []
    for scale, (p_ref, f_ref) in GMNET_REFERENCE.items():
        model = build_model(ModelConfig(family="gmnet", scale=scale, num_classes=1000), seed=0)
        p, f = count_params(model), count_flops(model, 224, "mac")
        pe, fe = p / p_ref - 1, f / f_ref - 1
        rows.append(CheckRow(f"GmNet-{scale.upper()}",
                             f"{p / 1e6:.3f}M {pe:+.1%} / {f / 1e9:.3f}G {fe:+.1%}",
                             f"{p_ref / 1e6:.1f}M (3%) / {f_ref / 1e9:.1f}G (10%)",
                             abs(pe) < 0.03 and abs(fe) < 0.10))
    return rows


SUITES = {"conv_theorem": conv_theorem_suite, "decay": decay_suite, "gradcheck": gradcheck_suite,
          "counts": counts_suite}

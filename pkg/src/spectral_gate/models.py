"""Complete networks: GmNet S1–S4, CIFAR ResNet-18 variants and CIFAR MobileNetV2 with GLU gates."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .activations import Activation
from .autodiff import functional as F
from .autodiff.nn import (BatchNorm1d, BatchNorm2d, Conv2d, Linear, Module, ModuleList, Sequential,
                          manual_seed)
from .autodiff.tensor import Tensor, default_dtype
from .blocks import BlockConfig, GluVariant, GmNetBlock, MBV2GluBlock, ResNetBasicBlock, ResVariant


@dataclass
class GmNetConfig:
    c1: int
    depths: list
    ratios: list
    drop_path: float = 0.0
    num_classes: int = 1000
    input_resolution: int = 224
    stem_stride: int = 2
    activation: Activation = Activation.RELU6
    glu: GluVariant = GluVariant.SIMPLE
    mixer: str = "dw"
    mlp: str = "gate"
    layer_scale_init: float = 1e-6

    def __post_init__(self):
        self.depths, self.ratios = list(self.depths), list(self.ratios)
        if len(self.depths) != 4 or len(self.ratios) != 4:
            raise ValueError("GmNet needs exactly four stage depths and ratios")
        if self.c1 <= 0 or self.c1 % 2 or min(self.depths) < 0 or min(self.ratios) <= 0:
            raise ValueError(f"invalid GmNet widths/depths: c1={self.c1}, {self.depths}, {self.ratios}")
        if self.stem_stride not in (1, 2):
            raise ValueError("stem_stride must be 1 or 2")
        self.activation = Activation.parse(self.activation)
        self.glu = GluVariant.parse(self.glu)


GMNET_SCALES = {
    "s1": dict(c1=40, depths=[2, 2, 10, 2], ratios=[3, 3, 3, 2], drop_path=0.0),
    "s2": dict(c1=48, depths=[2, 2, 8, 3], ratios=[3, 3, 3, 2], drop_path=0.0),
    "s3": dict(c1=48, depths=[3, 3, 8, 3], ratios=[4, 4, 4, 4], drop_path=0.02),
    "s4": dict(c1=68, depths=[3, 3, 11, 3], ratios=[4, 4, 4, 4], drop_path=0.02),
}

# published (params, FLOPs) per scale at 224x224
GMNET_REFERENCE = {"s1": (3.7e6, 0.6e9), "s2": (6.2e6, 0.9e9), "s3": (7.8e6, 1.2e9), "s4": (17.0e6, 2.7e9)}


def gmnet_config(scale: str, **overrides) -> GmNetConfig:
    key = str(scale).lower().replace("gmnet-", "")
    if key not in GMNET_SCALES:
        raise ValueError(f"unknown GmNet scale {scale!r}; choose from {sorted(GMNET_SCALES)}")
    return GmNetConfig(**{**GMNET_SCALES[key], **overrides})


class ConvBN(Sequential):
    def __init__(self, cin, cout, k, stride=1, bias=True):
        super().__init__(Conv2d(cin, cout, k, stride=stride, padding=k // 2, bias=bias), BatchNorm2d(cout))


class GmNet(Module):
    def __init__(self, cfg: GmNetConfig):
        super().__init__()
        self.cfg = cfg
        c = cfg.c1
        self.stem1 = ConvBN(3, c // 2, 3, cfg.stem_stride)
        self.stem2 = ConvBN(c // 2, c, 3, cfg.stem_stride)
        total = sum(cfg.depths)
        rates = np.linspace(0.0, cfg.drop_path, total) if total else []
        self.downsamples = ModuleList()
        self.stages = ModuleList()
        k = 0
        for i, (depth, ratio) in enumerate(zip(cfg.depths, cfg.ratios)):
            if i > 0:
                self.downsamples.append(ConvBN(c, 2 * c, 3, 2))
                c *= 2
            blocks = []
            for _ in range(depth):
                blocks.append(GmNetBlock(BlockConfig(
                    dim=c, mlp_ratio=ratio, drop_path_rate=float(rates[k]),
                    layer_scale_init=cfg.layer_scale_init, activation=cfg.activation, glu=cfg.glu,
                    mixer=cfg.mixer, mlp=cfg.mlp)))
                k += 1
            self.stages.append(Sequential(*blocks))
        self.width = c
        self.norm = BatchNorm1d(c)
        self.head = Linear(c, cfg.num_classes)

    def forward_features(self, x: Tensor) -> Tensor:
        x = F.relu6(self.stem1(x))
        x = F.relu6(self.stem2(x))
        for i, stage in enumerate(self.stages):
            if i > 0:
                x = self.downsamples[i - 1](x)
            x = stage(x)
        return x

    def forward(self, x: Tensor) -> Tensor:
        return self.head(self.norm(F.global_avg_pool(self.forward_features(x))))

    def gmnet_blocks(self) -> list[tuple[str, int, GmNetBlock]]:
        """``(name, stage index, block)`` for every GmNet block."""
        out = []
        for s, stage in enumerate(self.stages):
            for b, blk in enumerate(stage):
                out.append((f"stages.{s}.{b}", s, blk))
        return out


class ResNet18(Module):
    """CIFAR ResNet-18: 3×3 stem, no max-pool, four stages of two basic blocks."""

    def __init__(self, variant=ResVariant.BASELINE, activation=Activation.RELU, num_classes: int = 10,
                 width: int = 64):
        super().__init__()
        self.variant, self.activation = ResVariant.parse(variant), Activation.parse(activation)
        self.stem = ConvBN(3, width, 3, bias=False)
        layers, cin = [], width
        for i, mult in enumerate((1, 2, 4, 8)):
            planes = width * mult
            stride = 1 if i == 0 else 2
            layers.append(Sequential(ResNetBasicBlock(cin, planes, stride, variant, activation),
                                     ResNetBasicBlock(planes, planes, 1, variant, activation)))
            cin = planes
        self.layers = ModuleList(layers)
        self.fc = Linear(cin, num_classes, init_std=float(np.sqrt(1.0 / cin)))

    def forward(self, x):
        x = F.relu(self.stem(x))
        for layer in self.layers:
            x = layer(x)
        return self.fc(F.global_avg_pool(x))


MBV2_SETTINGS = [  # expansion, channels, repeats, first stride (CIFAR strides)
    (1, 16, 1, 1), (6, 24, 2, 1), (6, 32, 3, 2), (6, 64, 4, 2), (6, 96, 3, 1), (6, 160, 3, 2), (6, 320, 1, 1),
]


def _round_ch(c: float) -> int:
    return max(8, int(c + 4) // 8 * 8)


class MobileNetV2(Module):
    """CIFAR MobileNetV2; ``gate`` swaps every expand-conv activation for σ(x)·x."""

    def __init__(self, gate: Optional[Activation] = Activation.RELU6, num_classes: int = 10,
                 width_mult: float = 1.0):
        super().__init__()
        self.gate = Activation.parse(gate) if gate is not None else None
        cin = _round_ch(32 * width_mult)
        self.stem = ConvBN(3, cin, 3, bias=False)
        blocks = []
        for t, c, n, s in MBV2_SETTINGS:
            cout = _round_ch(c * width_mult)
            for i in range(n):
                blocks.append(MBV2GluBlock(cin, cout, s if i == 0 else 1, t, self.gate))
                cin = cout
        self.blocks = Sequential(*blocks)
        last = _round_ch(1280 * max(1.0, width_mult))
        self.last = ConvBN(cin, last, 1, bias=False)
        self.fc = Linear(last, num_classes)

    def forward(self, x):
        x = F.relu6(self.stem(x))
        x = self.blocks(x)
        x = F.relu6(self.last(x))
        return self.fc(F.global_avg_pool(x))


FAMILIES = ("gmnet", "resnet18", "mobilenetv2_glu")


@dataclass
class ModelConfig:
    """Family plus family-specific payload.

    gmnet: ``gmnet`` (a :class:`GmNetConfig`) or ``scale`` with ``cifar`` switching to stride-1 stem;
    resnet18: ``variant``, ``activation``, ``width``; mobilenetv2_glu: ``gate`` (None for stock), ``width_mult``.
    """

    family: str = "gmnet"
    scale: str = "s1"
    gmnet: Optional[GmNetConfig] = None
    cifar: bool = False
    num_classes: int = 10
    variant: str = "baseline"
    activation: Union[str, Activation] = "relu"
    gate: Optional[str] = "relu6"
    width: int = 64
    width_mult: float = 1.0
    dtype: str = "float32"

    def __post_init__(self):
        self.family = str(self.family).lower()
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}; choose from {FAMILIES}")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")
        if self.family == "resnet18":
            ResVariant.parse(self.variant)
            Activation.parse(self.activation)
        if self.family == "gmnet" and self.gmnet is None:
            self.gmnet = gmnet_config(self.scale, num_classes=self.num_classes,
                                      stem_stride=1 if self.cifar else 2,
                                      input_resolution=32 if self.cifar else 224)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if self.gmnet is not None:
            g = dataclasses.asdict(self.gmnet)
            g["activation"], g["glu"] = self.gmnet.activation.value, self.gmnet.glu.value
            d["gmnet"] = g
        if isinstance(self.activation, Activation):
            d["activation"] = self.activation.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if d.get("gmnet") is not None:
            d["gmnet"] = GmNetConfig(**d["gmnet"])
        return cls(**d)


def build_model(config: ModelConfig, seed: Optional[int] = None) -> Module:
    """Instantiate a network; ``seed`` (if given) reseeds parameter initialisation first."""
    if seed is not None:
        manual_seed(seed)
    with default_dtype(np.dtype(config.dtype).type):
        if config.family == "gmnet":
            return GmNet(config.gmnet)
        if config.family == "resnet18":
            return ResNet18(config.variant, config.activation, config.num_classes, config.width)
        return MobileNetV2(config.gate, config.num_classes, config.width_mult)

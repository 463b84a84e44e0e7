"""Gates and residual blocks: GLU variants, the GmNet block, ResNet basic blocks and MobileNetV2 blocks."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .activations import Activation, activate
from .autodiff import functional as F
from .autodiff.nn import (BatchNorm2d, Conv2d, Identity, LayerNorm2d, Module, Parameter, Sequential,
                          get_rng)
from .autodiff.tensor import Tensor, as_tensor


class GluVariant(str, enum.Enum):
    SIMPLE = "simple"  # σ(x)·x
    LN = "ln"  # σ(x)·LN(x)
    DW = "dw"  # σ(x)·DW3(x)
    POOL_DIFF = "pool_diff"  # σ(x)·(x − Pool(x))
    FC = "fc"  # σ(x)·FC(x)
    FC_SIGMA = "fc_sigma"  # σ(FC(x))·x

    @classmethod
    def parse(cls, value) -> "GluVariant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown GLU variant {value!r}; choose from {[v.value for v in cls]}") from None


def simple_gate(x: Tensor, act=Activation.RELU6) -> Tensor:
    """σ(x)·x with no parameters."""
    return activate(x, act) * x


class Glu(Module):
    """Gate over NCHW features; only the LN/DW/FC variants own parameters."""

    def __init__(self, dim: int, variant=GluVariant.SIMPLE, activation=Activation.RELU6):
        super().__init__()
        self.dim = dim
        self.variant = GluVariant.parse(variant)
        self.activation = Activation.parse(activation)
        if self.variant is GluVariant.LN:
            self.norm = LayerNorm2d(dim)
        elif self.variant is GluVariant.DW:
            self.dw = Conv2d(dim, dim, 3, padding=1, groups=dim)
        elif self.variant in (GluVariant.FC, GluVariant.FC_SIGMA):
            self.fc = Conv2d(dim, dim, 1)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[1] != self.dim:
            raise ValueError(f"gate built for {self.dim} channels got input with {x.shape[1]}")
        v = self.variant
        if v is GluVariant.FC_SIGMA:
            return activate(self.fc(x), self.activation) * x
        gate = activate(x, self.activation)
        if v is GluVariant.SIMPLE:
            return gate * x
        if v is GluVariant.LN:
            return gate * self.norm(x)
        if v is GluVariant.DW:
            return gate * self.dw(x)
        if v is GluVariant.POOL_DIFF:
            return gate * (x - F.avg_pool2d(x, 3, stride=1, padding=1))
        return gate * self.fc(x)


def glu_forward(x: Tensor, variant=GluVariant.SIMPLE, activation=Activation.RELU6,
                gate: Optional[Glu] = None) -> Tensor:
    """Apply a gate; a fresh one (default init) is built when ``gate`` is omitted."""
    if gate is None:
        gate = Glu(x.shape[1], variant, activation)
    elif gate.variant is not GluVariant.parse(variant) or gate.activation is not Activation.parse(activation):
        raise ValueError("gate module does not match the requested variant/activation")
    return gate(x)


# --------------------------------------------------------------------------
# residual helpers
# --------------------------------------------------------------------------


def drop_path(x: Tensor, rate: float, training: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Zero whole samples with probability ``rate``; survivors are scaled by 1/(1−rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"drop path rate must be in [0, 1), got {rate}")
    if rate == 0.0 or not training:
        return x
    rng = rng or get_rng()
    keep = 1.0 - rate
    mask = (rng.random(x.shape[0]) < keep).astype(x.dtype) / keep
    return x * Tensor(mask.reshape((-1,) + (1,) * (x.ndim - 1)), dtype=x.dtype)


class DropPath(Module):
    def __init__(self, rate: float = 0.0):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"drop path rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x):
        return drop_path(x, self.rate, self.training)


def layer_scale(x: Tensor, gamma: Tensor) -> Tensor:
    return x * as_tensor(gamma).reshape((1, -1) + (1,) * (x.ndim - 2))


class LayerScale(Module):
    def __init__(self, dim: int, init: float = 1e-6):
        super().__init__()
        self.gamma = Parameter(np.full(dim, init))

    def forward(self, x):
        return layer_scale(x, self.gamma)


# --------------------------------------------------------------------------
# GmNet block
# --------------------------------------------------------------------------


@dataclass
class BlockConfig:
    dim: int
    mlp_ratio: float = 3
    kernel: int = 7
    drop_path_rate: float = 0.0
    layer_scale_init: float = 1e-6
    activation: Activation = Activation.RELU6
    glu: GluVariant = GluVariant.SIMPLE
    mixer: str = "dw"  # "dw": k×k depth-wise conv; "linear": 1×1 dim→dim conv
    mlp: str = "gate"  # "gate": σ(x)·x style GLU; "act": plain activation

    def __post_init__(self):
        self.activation = Activation.parse(self.activation)
        self.glu = GluVariant.parse(self.glu)
        if self.dim <= 0 or self.mlp_ratio <= 0:
            raise ValueError(f"dim and mlp_ratio must be positive, got {self.dim}, {self.mlp_ratio}")
        if not 0.0 <= self.drop_path_rate < 1.0:
            raise ValueError(f"drop_path_rate must be in [0, 1), got {self.drop_path_rate}")
        if self.mixer not in ("dw", "linear"):
            raise ValueError(f"mixer must be 'dw' or 'linear', got {self.mixer!r}")
        if self.mlp not in ("gate", "act"):
            raise ValueError(f"mlp must be 'gate' or 'act', got {self.mlp!r}")

    @property
    def hidden(self) -> int:
        return max(1, int(round(self.dim * self.mlp_ratio)))


class GmNetBlock(Module):
    """DW → BN → 1×1 expand → gate → 1×1 project → BN → DW, added to the input.

    When ``record_taps`` is set the block keeps copies of the gate input,
    the gate output and the first mixer output in ``taps``.
    """

    def __init__(self, cfg: BlockConfig):
        super().__init__()
        self.cfg = cfg
        d, h = cfg.dim, cfg.hidden
        self.dw1 = self._mixer(cfg)
        self.bn1 = BatchNorm2d(d)
        self.fc1 = Conv2d(d, h, 1)
        if cfg.mlp == "gate":
            self.gate = Glu(h, cfg.glu, cfg.activation)
        self.fc2 = Conv2d(h, d, 1)
        self.bn2 = BatchNorm2d(d)
        self.dw2 = self._mixer(cfg)
        self.scale = LayerScale(d, cfg.layer_scale_init)
        self.drop = DropPath(cfg.drop_path_rate)
        self.record_taps = False
        self.taps: dict[str, np.ndarray] = {}

    @staticmethod
    def _mixer(cfg: BlockConfig) -> Conv2d:
        if cfg.mixer == "dw":
            return Conv2d(cfg.dim, cfg.dim, cfg.kernel, padding=cfg.kernel // 2, groups=cfg.dim)
        return Conv2d(cfg.dim, cfg.dim, 1)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[1] != self.cfg.dim:
            raise ValueError(f"block expects {self.cfg.dim} channels, got {x.shape[1]}")
        y = self.dw1(x)
        if self.record_taps:
            self.taps["dw1"] = y.data.copy()
        y = self.fc1(self.bn1(y))
        if self.record_taps:
            self.taps["gate_in"] = y.data.copy()
        y = self.gate(y) if self.cfg.mlp == "gate" else activate(y, self.cfg.activation)
        if self.record_taps:
            self.taps["gate_out"] = y.data.copy()
        y = self.dw2(self.bn2(self.fc2(y)))
        return x + self.drop(self.scale(y))


def gmnet_block(x: Tensor, cfg: BlockConfig) -> Tensor:
    return GmNetBlock(cfg)(x)


# --------------------------------------------------------------------------
# ResNet basic block
# --------------------------------------------------------------------------


class ResVariant(str, enum.Enum):
    BASELINE = "baseline"  # conv-BN-ReLU-conv-BN
    EWP = "ewp"  # mid activation replaced by out·out
    GATE = "gate"  # mid activation replaced by σ(out)·out

    @classmethod
    def parse(cls, value) -> "ResVariant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown ResNet variant {value!r}; choose from {[v.value for v in cls]}") from None


class ResNetBasicBlock(Module):
    expansion = 1

    def __init__(self, in_planes: int, planes: int, stride: int = 1, variant=ResVariant.BASELINE,
                 activation=Activation.RELU):
        super().__init__()
        if stride not in (1, 2):
            raise ValueError(f"stride must be 1 or 2, got {stride}")
        self.in_planes, self.planes = in_planes, planes
        self.variant = ResVariant.parse(variant)
        self.activation = Activation.parse(activation)
        self.conv1 = Conv2d(in_planes, planes, 3, stride=stride, padding=1, bias=False)
        self.bn1 = BatchNorm2d(planes)
        self.conv2 = Conv2d(planes, planes, 3, padding=1, bias=False)
        self.bn2 = BatchNorm2d(planes)
        if stride != 1 or in_planes != planes:
            self.shortcut = Sequential(Conv2d(in_planes, planes, 1, stride=stride, bias=False), BatchNorm2d(planes))
        else:
            self.shortcut = Identity()

    def mid(self, out: Tensor) -> Tensor:
        if self.variant is ResVariant.BASELINE:
            return F.relu(out)
        if self.variant is ResVariant.EWP:
            return out * out
        return simple_gate(out, self.activation)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[1] != self.in_planes:
            raise ValueError(f"block expects {self.in_planes} channels, got {x.shape[1]}")
        out = self.mid(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + self.shortcut(x))


def resnet_basic_block(x: Tensor, in_planes: int, planes: int, variant=ResVariant.BASELINE,
                       activation=Activation.RELU, stride: int = 1) -> Tensor:
    return ResNetBasicBlock(in_planes, planes, stride, variant, activation)(x)


# --------------------------------------------------------------------------
# MobileNetV2 inverted residual
# --------------------------------------------------------------------------


class MBV2GluBlock(Module):
    """Inverted residual; with ``gate`` set, the activation after the expand conv becomes σ(x)·x.

    Blocks with expansion 1 have no expand conv and stay stock.
    """

    def __init__(self, in_ch: int, out_ch: int, stride: int = 1, expansion: int = 6,
                 gate: Optional[Activation] = None):
        super().__init__()
        if stride not in (1, 2):
            raise ValueError(f"stride must be 1 or 2, got {stride}")
        if expansion < 1:
            raise ValueError(f"expansion must be >= 1, got {expansion}")
        self.in_ch, self.out_ch, self.stride, self.expansion = in_ch, out_ch, stride, expansion
        self.gate = Activation.parse(gate) if gate is not None else None
        hidden = in_ch * expansion
        if expansion != 1:
            self.expand = Conv2d(in_ch, hidden, 1, bias=False)
            self.bn0 = BatchNorm2d(hidden)
        self.dw = Conv2d(hidden, hidden, 3, stride=stride, padding=1, groups=hidden, bias=False)
        self.bn1 = BatchNorm2d(hidden)
        self.project = Conv2d(hidden, out_ch, 1, bias=False)
        self.bn2 = BatchNorm2d(out_ch)
        self.use_residual = stride == 1 and in_ch == out_ch

    def expand_act(self, y: Tensor) -> Tensor:
        return simple_gate(y, self.gate) if self.gate is not None else F.relu6(y)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[1] != self.in_ch:
            raise ValueError(f"block expects {self.in_ch} channels, got {x.shape[1]}")
        y = x
        if self.expansion != 1:
            y = self.expand_act(self.bn0(self.expand(y)))
        y = F.relu6(self.bn1(self.dw(y)))
        y = self.bn2(self.project(y))
        return x + y if self.use_residual else y


def mbv2_glu_block(x: Tensor, expansion: int = 6, gate: Optional[Activation] = Activation.RELU6,
                   out_ch: Optional[int] = None, stride: int = 1) -> Tensor:
    return MBV2GluBlock(x.shape[1], out_ch or x.shape[1], stride, expansion, gate)(x)

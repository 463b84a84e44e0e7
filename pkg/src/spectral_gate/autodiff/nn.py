"""Module containers and the standard layers used by the networks."""
from __future__ import annotations

from collections import OrderedDict
from typing import Iterator, Optional

import numpy as np

from . import functional as F
from .tensor import Tensor, get_default_dtype

_rng = np.random.default_rng(0)


def manual_seed(seed: int) -> None:
    """Reseed the generator used for parameter initialisation."""
    global _rng
    _rng = np.random.default_rng(seed)


def get_rng() -> np.random.Generator:
    return _rng


class Parameter(Tensor):
    def __init__(self, data, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype or get_default_dtype())


class Module:
    """Base class; attributes that are Parameters or Modules are registered."""

    def __init__(self):
        object.__setattr__(self, "_parameters", OrderedDict())
        object.__setattr__(self, "_modules", OrderedDict())
        object.__setattr__(self, "_buffers", OrderedDict())
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._parameters[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        elif name in self._buffers:
            self._buffers[name] = value
            return
        object.__setattr__(self, name, value)

    def __getattr__(self, name):
        buffers = self.__dict__.get("_buffers")
        if buffers is not None and name in buffers:
            return buffers[name]
        raise AttributeError(f"{type(self).__name__!s} has no attribute {name!r}")

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = value

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    # -- traversal ------------------------------------------------------------
    def named_modules(self, prefix: str = "") -> Iterator[tuple[str, "Module"]]:
        yield prefix, self
        for name, mod in self._modules.items():
            yield from mod.named_modules(f"{prefix}.{name}" if prefix else name)

    def modules(self) -> Iterator["Module"]:
        for _, m in self.named_modules():
            yield m

    def named_parameters(self) -> Iterator[tuple[str, Parameter]]:
        for prefix, mod in self.named_modules():
            for name, p in mod._parameters.items():
                yield (f"{prefix}.{name}" if prefix else name), p

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self) -> Iterator[tuple[str, np.ndarray]]:
        for prefix, mod in self.named_modules():
            for name, b in mod._buffers.items():
                yield (f"{prefix}.{name}" if prefix else name), b

    # -- modes and state ------------------------------------------------------
    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            object.__setattr__(m, "training", mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def astype(self, dtype) -> "Module":
        """Cast every parameter and buffer in place."""
        for p in self.parameters():
            p.data = p.data.astype(dtype)
            p.grad = None
        for m in self.modules():
            for k, b in list(m._buffers.items()):
                m._buffers[k] = b.astype(dtype)
        return self

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        sd = OrderedDict()
        for name, p in self.named_parameters():
            sd[name] = p.data
        for name, b in self.named_buffers():
            sd[name] = b
        return sd

    def load_state_dict(self, state: dict) -> None:
        """Copy arrays into the module; every key must match name and shape."""
        own = self.state_dict()
        missing = [k for k in own if k not in state]
        extra = [k for k in state if k not in own]
        if missing or extra:
            raise KeyError(f"state mismatch: missing={missing[:5]} unexpected={extra[:5]}")
        for k, v in state.items():
            if own[k].shape != np.shape(v):
                raise ValueError(f"shape mismatch for {k}: model {own[k].shape} vs state {np.shape(v)}")
        params = dict(self.named_parameters())
        for prefix, mod in self.named_modules():
            for bname in list(mod._buffers):
                key = f"{prefix}.{bname}" if prefix else bname
                mod._buffers[bname] = np.array(state[key], dtype=state[key].dtype)
        for k, p in params.items():
            p.data = np.array(state[k], dtype=state[k].dtype)
            p.grad = None


class Sequential(Module):
    def __init__(self, *mods: Module):
        super().__init__()
        for i, m in enumerate(mods):
            setattr(self, str(i), m)

    def __iter__(self):
        return iter(self._modules.values())

    def __len__(self):
        return len(self._modules)

    def __getitem__(self, i):
        return list(self._modules.values())[i]

    def forward(self, x):
        for m in self._modules.values():
            x = m(x)
        return x


class ModuleList(Module):
    def __init__(self, mods=()):
        super().__init__()
        for m in mods:
            self.append(m)

    def append(self, m: Module) -> None:
        setattr(self, str(len(self._modules)), m)

    def __iter__(self):
        return iter(self._modules.values())

    def __len__(self):
        return len(self._modules)

    def __getitem__(self, i):
        return list(self._modules.values())[i]


def kaiming_normal_fan_out(shape: tuple, groups: int = 1) -> np.ndarray:
    out_ch, _, kh, kw = shape
    fan_out = max(1, out_ch // groups) * kh * kw
    return _rng.normal(0.0, np.sqrt(2.0 / fan_out), size=shape)


class Conv2d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, stride: int = 1,
                 padding: int = 0, groups: int = 1, bias: bool = True):
        super().__init__()
        if in_channels % groups or out_channels % groups:
            raise ValueError(f"channels {in_channels}->{out_channels} not divisible by groups={groups}")
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel_size, self.stride, self.padding, self.groups = kernel_size, stride, padding, groups
        shape = (out_channels, in_channels // groups, kernel_size, kernel_size)
        self.weight = Parameter(kaiming_normal_fan_out(shape, groups))
        self.bias = Parameter(np.zeros(out_channels)) if bias else None

    def forward(self, x):
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.groups)

    def __repr__(self):
        return (f"Conv2d({self.in_channels}, {self.out_channels}, k={self.kernel_size}, "
                f"s={self.stride}, p={self.padding}, g={self.groups})")


class BatchNorm(Module):
    """Batch normalisation for (N, C) or (N, C, H, W) input."""

    def __init__(self, num_features: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.num_features, self.momentum, self.eps = num_features, momentum, eps
        self.weight = Parameter(np.ones(num_features))
        self.bias = Parameter(np.zeros(num_features))
        dt = get_default_dtype()
        self.register_buffer("running_mean", np.zeros(num_features, dtype=dt))
        self.register_buffer("running_var", np.ones(num_features, dtype=dt))

    def forward(self, x):
        if x.shape[1] != self.num_features:
            raise ValueError(f"BatchNorm expects {self.num_features} channels, got {x.shape[1]}")
        return F.batch_norm(x, self.weight, self.bias, self._buffers["running_mean"],
                            self._buffers["running_var"], self.training, self.momentum, self.eps)


BatchNorm2d = BatchNorm
BatchNorm1d = BatchNorm


class LayerNorm2d(Module):
    """Layer norm across the channel axis of NCHW input."""

    def __init__(self, num_channels: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.weight = Parameter(np.ones(num_channels))
        self.bias = Parameter(np.zeros(num_channels))

    def forward(self, x):
        return F.layer_norm(x, self.weight, self.bias, axis=1, eps=self.eps)


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, bias: bool = True, init_std: float = 0.02):
        super().__init__()
        self.weight = Parameter(_rng.normal(0.0, init_std, size=(out_features, in_features)))
        self.bias = Parameter(np.zeros(out_features)) if bias else None

    def forward(self, x):
        return F.linear(x, self.weight, self.bias)


class Identity(Module):
    def forward(self, x):
        return x


def count_parameters(module: Module) -> int:
    return int(sum(p.size for p in module.parameters()))


def grad_norm(module: Module) -> float:
    total = 0.0
    for p in module.parameters():
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    return float(np.sqrt(total))


def first_param_dtype(module: Module) -> Optional[np.dtype]:
    for p in module.parameters():
        return p.dtype
    return None

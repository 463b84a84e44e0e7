"""The nonlinearities used as gate activations."""
from __future__ import annotations

import enum

import numpy as np
from scipy.special import expit

from .autodiff import functional as F
from .autodiff.tensor import Tensor


class Activation(str, enum.Enum):
    IDENTITY = "identity"
    RELU = "relu"
    RELU6 = "relu6"
    GELU = "gelu"
    SILU = "silu"

    @classmethod
    def parse(cls, value) -> "Activation":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown activation {value!r}; choose from {[a.value for a in cls]}") from None


_TENSOR_FNS = {
    Activation.IDENTITY: F.identity,
    Activation.RELU: F.relu,
    Activation.RELU6: F.relu6,
    Activation.GELU: F.gelu,
    Activation.SILU: F.silu,
}


def activate(x: Tensor, act: Activation) -> Tensor:
    return _TENSOR_FNS[Activation.parse(act)](x)


def _gelu_np(x):
    return 0.5 * x * (1.0 + np.tanh(np.sqrt(2.0 / np.pi) * (x + 0.044715 * x ** 3)))


_NUMPY_FNS = {
    Activation.IDENTITY: lambda x: np.array(x, dtype=float),
    Activation.RELU: lambda x: np.maximum(x, 0.0),
    Activation.RELU6: lambda x: np.clip(x, 0.0, 6.0),
    Activation.GELU: _gelu_np,
    Activation.SILU: lambda x: x * expit(x),
}


def numpy_activation(act) -> callable:
    """Plain numpy version of an activation (no tape)."""
    return _NUMPY_FNS[Activation.parse(act)]

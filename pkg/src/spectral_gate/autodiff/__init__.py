"""Minimal numpy tensor engine with reverse-mode differentiation."""
from . import functional
from .gradcheck import GradCheckResult, check_gradients, check_module_gradients
from .nn import (BatchNorm, BatchNorm1d, BatchNorm2d, Conv2d, Identity, LayerNorm2d, Linear, Module,
                 ModuleList, Parameter, Sequential, count_parameters, manual_seed)
from .tensor import (Tape, Tensor, backward, default_dtype, get_default_dtype, get_tape, is_grad_enabled,
                     no_grad, set_check_finite, set_default_dtype)

__all__ = [
    "functional", "GradCheckResult", "check_gradients", "check_module_gradients", "BatchNorm", "BatchNorm1d", "BatchNorm2d",
    "Conv2d", "Identity", "LayerNorm2d", "Linear", "Module", "ModuleList", "Parameter", "Sequential",
    "count_parameters", "manual_seed", "Tape", "Tensor", "backward", "default_dtype",
    "get_default_dtype", "get_tape", "is_grad_enabled", "no_grad", "set_check_finite",
    "set_default_dtype",
]

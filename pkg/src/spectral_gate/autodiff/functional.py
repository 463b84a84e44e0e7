"""Differentiable primitives on :class:`~spectral_gate.autodiff.tensor.Tensor`.

Each function computes its forward value with numpy and registers a closure
that maps the upstream gradient to one gradient per input.
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .tensor import Tensor, as_tensor, make_result

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_GELU_C = 0.044715

# Set by spectral_gate.cost while counting; receives (macs, bias_adds).
_flop_hook = None


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _operands(a, b):
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype), dtype=a.dtype)
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=b.dtype), dtype=b.dtype)
    return as_tensor(a), as_tensor(b)


# -- arithmetic ---------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _operands(a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a, b = _operands(a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_result(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    a, b = _operands(a, b)

    def bw(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return make_result(a.data * b.data, (a, b), bw, "mul")


def neg(a: Tensor) -> Tensor:
    return make_result(-a.data, (a,), lambda g: (-g,), "neg")


def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_result(np.asarray(out), (a,), bw, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return sum(a, axis=axis, keepdims=keepdims) * (1.0 / n)


def reshape(a: Tensor, shape) -> Tensor:
    return make_result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


# -- activations --------------------------------------------------------------

def identity(x: Tensor) -> Tensor:
    return x


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return make_result(x.data * mask, (x,), lambda g: (g * mask,), "relu")


def relu6(x: Tensor) -> Tensor:
    # open interval: the subgradient at both kinks is 0
    mask = (x.data > 0) & (x.data < 6)
    return make_result(np.clip(x.data, 0.0, 6.0), (x,), lambda g: (g * mask,), "relu6")


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    v = x.data
    t = np.tanh(_SQRT_2_OVER_PI * (v + _GELU_C * v ** 3))

    def bw(g):
        dt = (1.0 - t * t) * _SQRT_2_OVER_PI * (1.0 + 3.0 * _GELU_C * v * v)
        return (g * (0.5 * (1.0 + t) + 0.5 * v * dt),)

    return make_result(0.5 * v * (1.0 + t), (x,), bw, "gelu")


def silu(x: Tensor) -> Tensor:
    s = expit(x.data)

    def bw(g):
        return (g * s * (1.0 + x.data * (1.0 - s)),)

    return make_result(x.data * s, (x,), bw, "silu")


def sigmoid(x: Tensor) -> Tensor:
    s = expit(x.data)
    return make_result(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


# -- convolution and pooling --------------------------------------------------

def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def _pad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
           stride: int = 1, padding: int = 0, groups: int = 1) -> Tensor:
    """2-D cross-correlation on NCHW input with an OIHW kernel."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"conv2d expects 4-D input and weight, got {x.shape} and {weight.shape}")
    if stride < 1 or padding < 0 or groups < 1:
        raise ValueError(f"invalid stride={stride}, padding={padding}, groups={groups}")
    n, c, h, w = x.shape
    cout, cin_g, kh, kw = weight.shape
    if c % groups or cout % groups:
        raise ValueError(f"channels in={c}, out={cout} not divisible by groups={groups}")
    if cin_g * groups != c:
        raise ValueError(f"weight expects {cin_g * groups} input channels, input has {c}")
    if bias is not None and bias.shape != (cout,):
        raise ValueError(f"bias shape {bias.shape} != ({cout},)")
    ho = conv_output_size(h, kh, stride, padding)
    wo = conv_output_size(w, kw, stride, padding)
    if h + 2 * padding < kh or w + 2 * padding < kw or ho < 1 or wo < 1:
        raise ValueError(f"kernel {kh}x{kw} larger than padded input {h + 2 * padding}x{w + 2 * padding}")
    cout_g = cout // groups
    xp = _pad(x.data, padding)
    wd = weight.data

    if _flop_hook is not None:
        _flop_hook(n * cout * cin_g * kh * kw * ho * wo, n * cout * ho * wo if bias is not None else 0)

    if cin_g == 1 and cout_g == 1:
        # depth-wise: one filter per channel, shift-and-accumulate
        out = np.zeros((n, c, ho, wo), dtype=xp.dtype)
        for i in range(kh):
            for j in range(kw):
                patch = xp[:, :, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride]
                out += wd[:, 0, i, j][None, :, None, None] * patch
        kind = "dw"
    elif kh == 1 and kw == 1 and groups == 1:
        xs = xp[:, :, :stride * (ho - 1) + 1:stride, :stride * (wo - 1) + 1:stride]
        out = np.matmul(wd[:, :, 0, 0], xs.reshape(n, c, ho * wo)).reshape(n, cout, ho, wo)
        kind = "pw"
    else:
        win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        out = np.empty((n, cout, ho, wo), dtype=xp.dtype)
        for gi in range(groups):
            cs = slice(gi * cin_g, (gi + 1) * cin_g)
            os_ = slice(gi * cout_g, (gi + 1) * cout_g)
            res = np.tensordot(win[:, cs], wd[os_], axes=([1, 4, 5], [1, 2, 3]))
            out[:, os_] = res.transpose(0, 3, 1, 2)
        kind = "general"
    if bias is not None:
        out += bias.data[None, :, None, None]

    def bw(g):
        gx = gw = gb = None
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        if kind == "dw":
            gxp = np.zeros_like(xp) if x.requires_grad else None
            gw = np.zeros_like(wd) if weight.requires_grad else None
            for i in range(kh):
                for j in range(kw):
                    ys = slice(i, i + stride * (ho - 1) + 1, stride)
                    xs_ = slice(j, j + stride * (wo - 1) + 1, stride)
                    if gw is not None:
                        gw[:, 0, i, j] = (g * xp[:, :, ys, xs_]).sum(axis=(0, 2, 3))
                    if gxp is not None:
                        gxp[:, :, ys, xs_] += g * wd[:, 0, i, j][None, :, None, None]
        elif kind == "pw":
            g3 = g.reshape(n, cout, ho * wo)
            xs = xp[:, :, :stride * (ho - 1) + 1:stride, :stride * (wo - 1) + 1:stride].reshape(n, c, ho * wo)
            if weight.requires_grad:
                gw = np.einsum("nop,nip->oi", g3, xs)[:, :, None, None]
            gxp = None
            if x.requires_grad:
                gsub = np.matmul(wd[:, :, 0, 0].T, g3).reshape(n, c, ho, wo)
                if stride > 1:
                    gxp = np.zeros_like(xp)
                    gxp[:, :, :stride * (ho - 1) + 1:stride, :stride * (wo - 1) + 1:stride] = gsub
                else:
                    gxp = gsub
        else:
            win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
            gw = np.zeros_like(wd) if weight.requires_grad else None
            gxp = np.zeros_like(xp) if x.requires_grad else None
            for gi in range(groups):
                cs = slice(gi * cin_g, (gi + 1) * cin_g)
                os_ = slice(gi * cout_g, (gi + 1) * cout_g)
                gg = g[:, os_]
                if gw is not None:
                    gw[os_] = np.tensordot(gg, win[:, cs], axes=([0, 2, 3], [0, 2, 3]))
                if gxp is not None:
                    # (n, ho, wo, cin_g, kh, kw)
                    cols = np.tensordot(gg, wd[os_], axes=([1], [0]))
                    for i in range(kh):
                        for j in range(kw):
                            gxp[:, cs, i:i + stride * (ho - 1) + 1:stride,
                                j:j + stride * (wo - 1) + 1:stride] += cols[..., i, j].transpose(0, 3, 1, 2)
        if gxp is not None:
            gx = gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp
        return gx, gw, gb

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out, inputs, bw, "conv2d")


def avg_pool2d(x: Tensor, kernel: int, stride: int = 1, padding: int = 0,
               count_include_pad: bool = False) -> Tensor:
    """Average pooling; by default padded zeros are excluded from the divisor."""
    n, c, h, w = x.shape
    ho = conv_output_size(h, kernel, stride, padding)
    wo = conv_output_size(w, kernel, stride, padding)
    if ho < 1 or wo < 1:
        raise ValueError(f"pool window {kernel} larger than padded input")
    xp = _pad(x.data, padding)
    acc = np.zeros((n, c, ho, wo), dtype=xp.dtype)
    for i in range(kernel):
        for j in range(kernel):
            acc += xp[:, :, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride]
    if count_include_pad or padding == 0:
        count = np.full((ho, wo), float(kernel * kernel), dtype=xp.dtype)
    else:
        ones = _pad(np.ones((1, 1, h, w), dtype=xp.dtype), padding)
        count = np.zeros((ho, wo), dtype=xp.dtype)
        for i in range(kernel):
            for j in range(kernel):
                count += ones[0, 0, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride]
    out = acc / count

    def bw(g):
        gs = g / count
        gxp = np.zeros_like(xp)
        for i in range(kernel):
            for j in range(kernel):
                gxp[:, :, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride] += gs
        return (gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp,)

    return make_result(out, (x,), bw, "avg_pool2d")


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the spatial axes: (N, C, H, W) -> (N, C)."""
    n, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3))

    def bw(g):
        return (np.broadcast_to(g[:, :, None, None] / (h * w), x.shape).copy(),)

    return make_result(out, (x,), bw, "global_avg_pool")


# -- normalisation ------------------------------------------------------------

def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
               running_var: np.ndarray, training: bool, momentum: float = 0.1,
               eps: float = 1e-5) -> Tensor:
    """Batch normalisation over (N, C) or (N, C, H, W) input.

    In training mode the batch statistics are used and the running buffers are
    updated in place (unbiased variance, like the common framework default).
    """
    if x.ndim == 4:
        axes, shape = (0, 2, 3), (1, -1, 1, 1)
    elif x.ndim == 2:
        axes, shape = (0,), (1, -1)
    else:
        raise ValueError(f"batch_norm expects 2-D or 4-D input, got {x.shape}")
    m = x.size // x.shape[1]
    if training:
        if m < 2:
            raise ValueError("batch_norm in training mode needs more than one value per channel")
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var * (m / (m - 1))
    else:
        mu, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu.reshape(shape)) * inv_std.reshape(shape)
    out = xhat * gamma.data.reshape(shape) + beta.data.reshape(shape)

    def bw(g):
        ggamma = (g * xhat).sum(axis=axes) if gamma.requires_grad else None
        gbeta = g.sum(axis=axes) if beta.requires_grad else None
        gx = None
        if x.requires_grad:
            dxhat = g * gamma.data.reshape(shape)
            if training:
                s1 = dxhat.sum(axis=axes).reshape(shape)
                s2 = (dxhat * xhat).sum(axis=axes).reshape(shape)
                gx = (dxhat - s1 / m - xhat * s2 / m) * inv_std.reshape(shape)
            else:
                gx = dxhat * inv_std.reshape(shape)
        return gx, ggamma, gbeta

    return make_result(out, (x, gamma, beta), bw, "batch_norm")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, axis: int = 1, eps: float = 1e-5) -> Tensor:
    """Normalise over one axis (channels for NCHW) with a per-channel affine."""
    shape = [1] * x.ndim
    shape[axis] = -1
    k = x.shape[axis]
    mu = x.data.mean(axis=axis, keepdims=True)
    var = x.data.var(axis=axis, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    out = xhat * gamma.data.reshape(shape) + beta.data.reshape(shape)
    red = tuple(i for i in range(x.ndim) if i != axis)

    def bw(g):
        ggamma = (g * xhat).sum(axis=red) if gamma.requires_grad else None
        gbeta = g.sum(axis=red) if beta.requires_grad else None
        gx = None
        if x.requires_grad:
            dxhat = g * gamma.data.reshape(shape)
            s1 = dxhat.mean(axis=axis, keepdims=True)
            s2 = (dxhat * xhat).mean(axis=axis, keepdims=True)
            gx = (dxhat - s1 - xhat * s2) * inv_std
        return gx, ggamma, gbeta

    if k < 1:
        raise ValueError("layer_norm over an empty axis")
    return make_result(out, (x, gamma, beta), bw, "layer_norm")


# -- dense layers and loss ----------------------------------------------------

def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """``x @ weight.T + bias`` with ``weight`` shaped (out, in)."""
    if x.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ValueError(f"linear: input {x.shape} incompatible with weight {weight.shape}")
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data
    if _flop_hook is not None:
        _flop_hook(x.shape[0] * weight.shape[0] * weight.shape[1],
                   x.shape[0] * weight.shape[0] if bias is not None else 0)

    def bw(g):
        gx = g @ weight.data if x.requires_grad else None
        gw = g.T @ x.data if weight.requires_grad else None
        gb = g.sum(axis=0) if bias is not None and bias.requires_grad else None
        return gx, gw, gb

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out, inputs, bw, "linear")


def softmax_cross_entropy(logits: Tensor, labels, label_smoothing: float = 0.0) -> Tensor:
    """Mean cross-entropy of integer ``labels`` under softmax(``logits``)."""
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match logits {logits.shape}")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    target = np.full((n, k), label_smoothing / k, dtype=logits.dtype)
    target[np.arange(n), labels] += 1.0 - label_smoothing
    loss = -(target * logp).sum() / n

    def bw(g):
        return ((np.exp(logp) - target) * (g / n),)

    return make_result(np.asarray(loss, dtype=logits.dtype), (logits,), bw, "softmax_cross_entropy")

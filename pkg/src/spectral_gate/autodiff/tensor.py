"""Dense tensor with define-by-run reverse-mode differentiation.

Every differentiable operation appends a :class:`Node` to the thread-local
:class:`Tape` while gradient recording is enabled.  Because nodes are appended
in creation order the tape is already topologically sorted, so
:func:`backward` simply replays it in reverse.
"""
from __future__ import annotations

import contextlib
import threading
import warnings
from typing import Callable, Optional, Sequence

import numpy as np

_state = threading.local()

_DEFAULT_DTYPE = np.float32
_CHECK_FINITE = True


def get_default_dtype() -> type:
    return _DEFAULT_DTYPE


def set_default_dtype(dtype) -> None:
    """Set the floating dtype used for new tensors and parameters."""
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dtype!r}; use float32 or float64")
    _DEFAULT_DTYPE = dtype


@contextlib.contextmanager
def default_dtype(dtype):
    """Temporarily switch the default dtype, e.g. ``with default_dtype(np.float64):``."""
    prev = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(prev)


def set_check_finite(enabled: bool) -> None:
    global _CHECK_FINITE
    _CHECK_FINITE = bool(enabled)


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


class no_grad(contextlib.ContextDecorator):
    """Disable tape recording inside the block (nestable)."""

    def __enter__(self):
        self._prev = is_grad_enabled()
        _state.grad_enabled = False
        return self

    def __exit__(self, *exc):
        _state.grad_enabled = self._prev
        return False


class Node:
    __slots__ = ("out", "inputs", "backward_fn", "op")

    def __init__(self, out: "Tensor", inputs: tuple, backward_fn: Callable, op: str):
        self.out = out
        self.inputs = inputs
        self.backward_fn = backward_fn
        self.op = op


class Tape:
    """Ordered record of operations; inputs of a node always precede it."""

    def __init__(self):
        self.nodes: list[Node] = []

    def record(self, node: Node) -> None:
        self.nodes.append(node)

    def reset(self) -> None:
        for node in self.nodes:
            node.out._node = None
        self.nodes = []

    def __len__(self):
        return len(self.nodes)


def get_tape() -> Tape:
    tape = getattr(_state, "tape", None)
    if tape is None:
        tape = _state.tape = Tape()
    return tape


class Tensor:
    """N-dimensional float array that can take part in gradient recording."""

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            arr = np.asarray(data)
            dtype = arr.dtype if arr.dtype in (np.float32, np.float64) else _DEFAULT_DTYPE
        arr = np.asarray(data, dtype=dtype)
        self.data = arr if arr.flags.c_contiguous else np.ascontiguousarray(arr)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._node: Optional[Node] = None

    # -- array-like surface -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return self.data.item()

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # -- operators (implemented in functional) -------------------------------
    def __add__(self, other):
        from . import functional as F
        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import functional as F
        return F.sub(self, other)

    def __rsub__(self, other):
        from . import functional as F
        return F.sub(other, self)

    def __mul__(self, other):
        from . import functional as F
        return F.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported")
        return self * (1.0 / other)

    def __neg__(self):
        from . import functional as F
        return F.neg(self)

    def sum(self, axis=None, keepdims=False):
        from . import functional as F
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import functional as F
        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from . import functional as F
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def backward(self) -> None:
        backward(self)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x)
    if dtype is None:
        dtype = arr.dtype if arr.dtype in (np.float32, np.float64) else _DEFAULT_DTYPE
    return Tensor(arr, dtype=dtype)


def make_result(data: np.ndarray, inputs: Sequence[Tensor], backward_fn: Callable, op: str) -> Tensor:
    """Wrap an op output and record it on the tape when any input is tracked."""
    if _CHECK_FINITE and not np.isfinite(data).all():
        raise FloatingPointError(f"{op} produced non-finite values")
    track = is_grad_enabled() and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=track, dtype=data.dtype)
    if track:
        node = Node(out, tuple(inputs), backward_fn, op)
        out._node = node
        get_tape().record(node)
    return out


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` of every tracked leaf that ``loss`` depends on.

    Gradients accumulate into existing ``.grad`` buffers.  The tape is
    consumed: after the call it is empty and intermediate results are
    detached.
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = get_tape()
    if loss._node is None:
        leaves = {id(t): t for node in tape.nodes for t in node.inputs if t.is_leaf and t.requires_grad}
        if loss.requires_grad:
            leaves[id(loss)] = loss
        else:
            warnings.warn("loss is not connected to any tracked tensor; gradients are zero",
                          RuntimeWarning, stacklevel=2)
        for t in leaves.values():
            if t.grad is None:
                t.grad = np.zeros_like(t.data)
        if loss.requires_grad:
            loss.grad = (loss.grad if loss.grad is not None else 0) + np.ones_like(loss.data)
        tape.reset()
        return

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        in_grads = node.backward_fn(g)
        for t, gi in zip(node.inputs, in_grads):
            if gi is None or not t.requires_grad:
                continue
            if gi.shape != t.shape:
                raise RuntimeError(f"{node.op}: gradient shape {gi.shape} != input shape {t.shape}")
            if t.is_leaf:
                t.grad = gi.astype(t.dtype, copy=True) if t.grad is None else t.grad + gi
            else:
                key = id(t)
                grads[key] = grads[key] + gi if key in grads else gi
    tape.reset()

"""
Dense tensors with a reverse-mode tape.

Every differentiable operation produces its output through `record`, which
checks the values are finite and, when gradients are enabled and one of the
inputs requires them, attaches a `TapeNode` holding the inputs and a closure
mapping the output gradient to one gradient per input. `backward` walks the
tape once in reverse topological order.
"""
from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Iterator, Optional, Sequence

import numpy as np
from scipy.special import expit

from plugnorm.errors import GraphError, NonFiniteError, ShapeError

FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))

Gradients = Sequence[Optional[np.ndarray]]
Backward = Callable[[np.ndarray], Gradients]

_state = threading.local()


def grad_enabled() -> bool:
    """Return whether operations on this thread are recorded."""
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Run the enclosed forward passes without recording them on the tape."""
    previous = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


@dataclass(eq=False)
class TapeNode:
    op: str
    inputs: tuple["Tensor", ...]
    backward: Backward


def _as_float_array(data: Any, dtype: Any = None) -> np.ndarray:
    if isinstance(data, Tensor):
        data = data.data
    if dtype is None:
        dtype = data.dtype if isinstance(data, np.ndarray) else np.float64
        if np.dtype(dtype) not in FLOAT_DTYPES:
            dtype = np.float64
    dtype = np.dtype(dtype)
    if dtype not in FLOAT_DTYPES:
        raise TypeError(f"Tensors hold 32- or 64-bit floats, not {dtype}.")

    array = np.asarray(data, dtype=dtype).view()
    array.flags.writeable = False
    return array


class Tensor:
    """An N-dimensional float array with optional gradient tracking."""

    __array_priority__ = 100

    def __init__(
        self, data: Any, requires_grad: bool = False, dtype: Any = None
    ) -> None:
        self.data = _as_float_array(data, dtype)
        if any(extent <= 0 for extent in self.data.shape):
            raise ShapeError(f"Tensor extents must be positive, got {self.shape}.")

        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._node: TapeNode | None = None

    # Introspection

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def node(self) -> TapeNode | None:
        return self._node

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got {self.shape}.")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """Return a writable copy of the values."""
        return np.array(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def astype(self, dtype: Any) -> Tensor:
        return Tensor(self.data, requires_grad=self.requires_grad, dtype=dtype)

    def __array__(self, dtype: Any = None) -> np.ndarray:
        return np.asarray(self.data, dtype=dtype)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __len__(self) -> int:
        return self.shape[0]

    # Gradients

    def accumulate(self, grad: np.ndarray) -> None:
        """Add `grad` into this leaf's gradient buffer."""
        if grad.shape != self.shape:
            raise ShapeError(f"Gradient of shape {grad.shape} for tensor {self.shape}.")
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.dtype)
        else:
            self.grad = self.grad + grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    # Arithmetic

    def __add__(self, other: Any) -> Tensor:
        return add(self, other)

    def __radd__(self, other: Any) -> Tensor:
        return add(other, self)

    def __sub__(self, other: Any) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: Any) -> Tensor:
        return sub(other, self)

    def __mul__(self, other: Any) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: Any) -> Tensor:
        return mul(other, self)

    def __truediv__(self, other: Any) -> Tensor:
        return div(self, other)

    def __rtruediv__(self, other: Any) -> Tensor:
        return div(other, self)

    def __neg__(self) -> Tensor:
        return neg(self)

    def __pow__(self, exponent: float) -> Tensor:
        return power(self, exponent)

    def sum(self, axis: Any = None, keepdims: bool = False) -> Tensor:
        return sum_(self, axis, keepdims)

    def mean(self, axis: Any = None, keepdims: bool = False) -> Tensor:
        return mean(self, axis, keepdims)

    def reshape(self, *shape: Any) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def relu(self) -> Tensor:
        return relu(self)

    def sigmoid(self) -> Tensor:
        return sigmoid(self)

    def exp(self) -> Tensor:
        return exp(self)

    def log(self) -> Tensor:
        return log(self)

    def sqrt(self) -> Tensor:
        return sqrt(self)

    def abs(self) -> Tensor:
        return abs_(self)


def as_tensor(value: Any, like: Tensor | None = None) -> Tensor:
    """Wrap constants so they share the dtype of `like`."""
    if isinstance(value, Tensor):
        if like is not None and value.dtype != like.dtype:
            raise TypeError(
                f"Cannot mix {value.dtype} and {like.dtype} tensors in one operation."
            )
        return value
    return Tensor(value, dtype=like.dtype if like is not None else None)


def record(op: str, data: np.ndarray, inputs: Iterable[Tensor], backward: Backward) -> Tensor:
    """Create the output of `op`, attaching a tape node when any input needs gradients."""
    inputs = tuple(inputs)
    if not np.isfinite(data).all():
        raise NonFiniteError(f"`{op}` produced non-finite values.")

    dtype = inputs[0].dtype if inputs else None
    out = Tensor(data, dtype=dtype)
    if grad_enabled() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._node = TapeNode(op, inputs, backward)
    return out


def _pair(a: Any, b: Any) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# Elementwise operations


def add(a: Any, b: Any) -> Tensor:
    a, b = _pair(a, b)
    return record(
        "add",
        a.data + b.data,
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)),
    )


def sub(a: Any, b: Any) -> Tensor:
    a, b = _pair(a, b)
    return record(
        "sub",
        a.data - b.data,
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)),
    )


def mul(a: Any, b: Any) -> Tensor:
    a, b = _pair(a, b)
    return record(
        "mul",
        a.data * b.data,
        (a, b),
        lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)),
    )


def div(a: Any, b: Any) -> Tensor:
    a, b = _pair(a, b)
    out = a.data / b.data
    return record(
        "div",
        out,
        (a, b),
        lambda g: (
            unbroadcast(g / b.data, a.shape),
            unbroadcast(-g * out / b.data, b.shape),
        ),
    )


def neg(a: Tensor) -> Tensor:
    return record("neg", -a.data, (a,), lambda g: (-g,))


def power(a: Tensor, exponent: float) -> Tensor:
    if isinstance(exponent, Tensor):
        raise TypeError("Only constant exponents are supported.")
    return record(
        "pow",
        a.data**exponent,
        (a,),
        lambda g: (g * exponent * a.data ** (exponent - 1),),
    )


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return record("exp", out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return record("log", np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return record("sqrt", out, (a,), lambda g: (g / (2 * out),))


def abs_(a: Tensor) -> Tensor:
    return record("abs", np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return record("relu", np.where(mask, a.data, 0).astype(a.dtype), (a,), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    out = expit(a.data).astype(a.dtype)
    return record("sigmoid", out, (a,), lambda g: (g * out * (1 - out),))


# Reductions and shape operations


def _expand(grad: np.ndarray, shape: tuple[int, ...], axis: Any, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        grad = np.expand_dims(grad, axis)
    return np.broadcast_to(grad, shape)


def sum_(a: Tensor, axis: Any = None, keepdims: bool = False) -> Tensor:
    out = np.asarray(a.data.sum(axis=axis, keepdims=keepdims), dtype=a.dtype)
    return record("sum", out, (a,), lambda g: (_expand(g, a.shape, axis, keepdims),))


def mean(a: Tensor, axis: Any = None, keepdims: bool = False) -> Tensor:
    out = np.asarray(a.data.mean(axis=axis, keepdims=keepdims), dtype=a.dtype)
    count = a.size // max(out.size, 1)
    return record(
        "mean", out, (a,), lambda g: (_expand(g / count, a.shape, axis, keepdims),)
    )


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    return record("reshape", a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Join tensors along `axis` (channels by default)."""
    first = tensors[0]
    tensors = [as_tensor(t, like=first) for t in tensors]
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(f"Cannot concatenate shapes {[t.shape for t in tensors]}: {e}")
    return record("concat", out, tensors, lambda g: np.split(g, splits, axis=axis))


# Tape traversal


def _topological_order(root: Tensor) -> list[Tensor]:
    """Return the tensors reachable from `root`, every input before its outputs."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        tensor, expanded = stack.pop()
        if expanded:
            order.append(tensor)
            continue
        if id(tensor) in visited:
            continue
        visited.add(id(tensor))
        stack.append((tensor, True))
        if tensor._node is not None:
            for parent in tensor._node.inputs:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """
    Populate `grad` on every leaf that requires gradients.

    Gradients accumulate into existing buffers; call `zero_grad` between
    independent passes.
    """
    if loss.size != 1:
        raise GraphError(f"backward needs a scalar loss, got shape {loss.shape}.")
    if not loss.requires_grad:
        raise GraphError("The loss is detached from the tape; nothing to differentiate.")

    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for tensor in reversed(_topological_order(loss)):
        grad = pending.pop(id(tensor), None)
        if grad is None:
            continue
        if tensor._node is None:
            tensor.accumulate(grad)
            continue

        for parent, parent_grad in zip(tensor._node.inputs, tensor._node.backward(grad)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            pending[key] = pending[key] + parent_grad if key in pending else parent_grad


def zero_grad(params: Iterable[Tensor]) -> None:
    for param in params:
        param.zero_grad()

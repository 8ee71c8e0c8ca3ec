from typing import Any, Callable

import numpy as np

from plugnorm.core.tensor import Tensor, backward, no_grad
from plugnorm.errors import NonFiniteError

TensorFn = Callable[[Tensor], Tensor]


def _projected(fn: TensorFn, x: np.ndarray, projection: np.ndarray) -> float:
    with no_grad():
        value = float(np.sum(fn(Tensor(x)).data * projection))
    if not np.isfinite(value):
        raise NonFiniteError("The checked function produced non-finite values.")
    return value


def grad_check(fn: TensorFn, x: Any, step: float = 1e-5, seed: int = 0) -> float:
    """
    Compare tape gradients of `fn` at `x` with central finite differences.

    Non-scalar outputs are reduced with a fixed random projection so every
    output element contributes. Returns the largest elementwise
    |analytic - numeric| / max(1, |analytic|, |numeric|).
    """
    x = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    if x.dtype != np.float64:
        raise TypeError("grad_check needs a 64-bit input.")

    leaf = Tensor(x, requires_grad=True)
    out = fn(leaf)
    projection = np.random.default_rng(seed).standard_normal(out.shape)
    loss = (out * Tensor(projection)).sum()

    if loss.requires_grad:
        backward(loss)
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(x)

    numeric = np.empty_like(x)
    probe = x.copy()
    flat_probe, flat_numeric = probe.reshape(-1), numeric.reshape(-1)
    for index in range(probe.size):
        original = flat_probe[index]
        flat_probe[index] = original + step
        plus = _projected(fn, probe, projection)
        flat_probe[index] = original - step
        minus = _projected(fn, probe, projection)
        flat_probe[index] = original
        flat_numeric[index] = (plus - minus) / (2 * step)

    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / scale))

from typing import Any, Iterator

import numpy as np

from plugnorm.core.tensor import Tensor, zero_grad
from plugnorm.errors import CheckpointError, ShapeError
from plugnorm.nn import functional as F


class Parameter(Tensor):
    """A trainable leaf tensor owned by a `Module`."""

    def __init__(self, data: Any, dtype: Any = None) -> None:
        super().__init__(data, requires_grad=True, dtype=dtype)

    def assign(self, values: np.ndarray) -> None:
        """Replace the values in place of the old buffer, keeping dtype and shape."""
        if values.shape != self.shape:
            raise ShapeError(f"Cannot assign {values.shape} to parameter {self.shape}.")
        replacement = np.array(values, dtype=self.dtype)
        replacement.flags.writeable = False
        self.data = replacement


class Module:
    """
    Base class for layers holding `Parameter` attributes.

    Parameters are discovered from instance attributes in definition order:
    `Parameter` values, nested `Module`s and lists of `Module`s.
    """

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        return self.forward(*args, **kwargs)

    def forward(self, *args: Any, **kwargs: Any) -> Any:
        raise NotImplementedError

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield f"{prefix}{name}", value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{index}.")

    def parameters(self) -> list[Parameter]:
        return [param for _, param in self.named_parameters()]

    def trainable_parameters(self) -> list[Parameter]:
        return [param for param in self.parameters() if param.requires_grad]

    def num_params(self) -> int:
        """Exact number of scalars held by the module."""
        return sum(param.size for param in self.parameters())

    def zero_grad(self) -> None:
        zero_grad(self.parameters())

    def freeze(self) -> "Module":
        """Exclude every parameter from gradient tracking and optimizer updates."""
        for param in self.parameters():
            param.requires_grad = False
            param.zero_grad()
        return self

    def unfreeze(self) -> "Module":
        for param in self.parameters():
            param.requires_grad = True
        return self

    @property
    def frozen(self) -> bool:
        return not any(param.requires_grad for param in self.parameters())

    @property
    def dtype(self) -> np.dtype:
        return self.parameters()[0].dtype

    def astype(self, dtype: Any) -> "Module":
        """Cast every parameter to `dtype` in place."""
        for param in self.parameters():
            param.data = Tensor(param.data, dtype=dtype).data
            param.zero_grad()
        return self

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: param.numpy() for name, param in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise CheckpointError(
                f"State does not match the module (missing: {missing}, unexpected: {unexpected})."
            )
        for name, param in params.items():
            values = np.asarray(state[name])
            if values.shape != param.shape:
                raise ShapeError(f"{name}: stored shape {values.shape}, module expects {param.shape}.")
            param.assign(values.astype(param.dtype))


class Conv2d(Module):
    """Convolution parameters: weight (O, C / groups, k, k), bias (O,), stride, padding, groups."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: int = 0,
        groups: int = 1,
        dtype: Any = np.float32,
    ) -> None:
        if in_channels % groups or out_channels % groups:
            raise ShapeError(
                f"{in_channels} -> {out_channels} channels are not divisible by {groups} groups."
            )
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        self.groups = groups

        fan_in = in_channels // groups * kernel_size * kernel_size
        bound = np.sqrt(6.0 / fan_in)
        shape = (out_channels, in_channels // groups, kernel_size, kernel_size)
        self.weight = Parameter(rng.uniform(-bound, bound, size=shape), dtype=dtype)
        self.bias = Parameter(np.zeros(out_channels), dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.groups)

    def output_size(self, height: int, width: int) -> tuple[int, int]:
        k, s, p = self.kernel_size, self.stride, self.padding
        return (height + 2 * p - k) // s + 1, (width + 2 * p - k) // s + 1

    def __repr__(self) -> str:
        return (
            f"Conv2d({self.in_channels}, {self.out_channels}, k={self.kernel_size}, "
            f"stride={self.stride}, padding={self.padding}, groups={self.groups})"
        )

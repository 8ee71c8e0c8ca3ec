from plugnorm.core.gradcheck import grad_check
from plugnorm.core.tensor import (
    Tensor,
    TapeNode,
    as_tensor,
    backward,
    concat,
    grad_enabled,
    no_grad,
    record,
    zero_grad,
)

__all__ = [
    "Tensor",
    "TapeNode",
    "as_tensor",
    "backward",
    "concat",
    "grad_check",
    "grad_enabled",
    "no_grad",
    "record",
    "zero_grad",
]

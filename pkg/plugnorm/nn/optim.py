from typing import Iterable

import numpy as np

from plugnorm.errors import ConfigError
from plugnorm.nn.module import Parameter


class Adam:
    """Adam with bias-corrected moment estimates; frozen parameters are never touched."""

    def __init__(
        self,
        params: Iterable[Parameter],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        if lr < 0:
            raise ConfigError(f"Learning rate must be non-negative, got {lr}.")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros(p.shape, dtype=p.dtype) for p in self.params]
        self.v = [np.zeros(p.shape, dtype=p.dtype) for p in self.params]

    def zero_grad(self) -> None:
        for param in self.params:
            param.zero_grad()

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t

        for param, m, v in zip(self.params, self.m, self.v):
            if not param.requires_grad or param.grad is None:
                continue
            g = param.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)

            update = (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)
            param.assign(param.data - update)

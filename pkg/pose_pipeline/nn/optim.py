from typing import List

import numpy as np

from pose_pipeline.errors import InputError, NumericalError
from pose_pipeline.nn.layers import Parameter


class Adam:
    """Adam with bias-corrected moments; the learning rate is passed per step."""

    def __init__(
        self,
        params: List[Parameter],
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]

    def step(self, lr: float) -> None:
        if lr <= 0:
            raise InputError(f"Learning rate must be positive, got {lr}")
        for p in self.params:
            if not np.all(np.isfinite(p.grad)):
                raise NumericalError("Non-finite gradient passed to Adam")

        self.t += 1
        correction1 = 1 - self.beta1**self.t
        correction2 = 1 - self.beta2**self.t
        for i, p in enumerate(self.params):
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * p.grad
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * p.grad**2
            m_hat = self.m[i] / correction1
            v_hat = self.v[i] / correction2
            p.value -= lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

"""Adam with bias correction over a parameter store."""

from __future__ import annotations

import numpy as np

from .modules import ParamStore


class Adam:
    """Standard Adam. Parameters whose grad is None are skipped entirely;
    parameters with an exactly-zero grad keep their value bit-for-bit."""

    def __init__(
        self,
        store: ParamStore,
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        if lr <= 0:
            raise ValueError("lr must be positive")
        self.store = store
        self.lr = float(lr)
        self.beta1, self.beta2 = float(betas[0]), float(betas[1])
        self.eps = float(eps)
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._steps: dict[str, int] = {}

    def zero_grad(self) -> None:
        self.store.zero_grads()

    def step(self) -> None:
        for name, param in self.store.items():
            grad = param.grad
            if grad is None:
                continue
            m = self._m.get(name)
            if m is None:
                m = np.zeros_like(param.data)
                self._m[name] = m
                self._v[name] = np.zeros_like(param.data)
                self._steps[name] = 0
            v = self._v[name]
            self._steps[name] += 1
            t = self._steps[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            m_hat = m / (1.0 - self.beta1 ** t)
            v_hat = v / (1.0 - self.beta2 ** t)
            param.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

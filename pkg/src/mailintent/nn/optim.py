"""Adadelta (and a plain SGD used only by tests)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mailintent.nn.params import ParamTensor


@dataclass
class AdadeltaState:
    """Per-parameter exponentially decaying averages of squared gradients and
    squared updates. Slots are created lazily on the first step."""

    rho: float = 0.95
    eps: float = 1e-6
    lr: float = 1.0
    avg_sq_grad: dict[str, np.ndarray] = field(default_factory=dict)
    avg_sq_update: dict[str, np.ndarray] = field(default_factory=dict)

    def slot(self, name: str, shape) -> tuple[np.ndarray, np.ndarray]:
        if name not in self.avg_sq_grad:
            self.avg_sq_grad[name] = np.zeros(shape)
            self.avg_sq_update[name] = np.zeros(shape)
        return self.avg_sq_grad[name], self.avg_sq_update[name]


def adadelta_step(params: dict[str, ParamTensor], state: AdadeltaState) -> None:
    """Apply one Adadelta update to every parameter and clear the gradients.

    E[g^2] <- rho E[g^2] + (1-rho) g^2
    dx     <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
    E[dx^2]<- rho E[dx^2] + (1-rho) dx^2
    """
    for name, p in params.items():
        g = p.grad
        eg2, ed2 = state.slot(name, p.shape)
        eg2 *= state.rho
        eg2 += (1.0 - state.rho) * g * g
        delta = -np.sqrt(ed2 + state.eps) / np.sqrt(eg2 + state.eps) * g
        ed2 *= state.rho
        ed2 += (1.0 - state.rho) * delta * delta
        p.value += state.lr * delta
        if not np.all(np.isfinite(p.value)):
            raise FloatingPointError(f"non-finite values in parameter {name!r} after update")
        p.zero_grad()


def sgd_step(params: dict[str, ParamTensor], lr: float) -> None:
    for p in params.values():
        p.value -= lr * p.grad
        p.zero_grad()

"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mailintent.nn.params import ParamTensor, zero_grads


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    worst_index: tuple
    analytic: float
    numeric: float

    def __str__(self) -> str:
        return (
            f"max relative error {self.max_rel_error:.3e} at "
            f"{self.worst_param}{list(self.worst_index)} "
            f"(analytic {self.analytic:.6e}, numeric {self.numeric:.6e})"
        )


def grad_check(
    loss_fn,
    params: dict[str, ParamTensor],
    step: float = 1e-5,
    rel_floor: float = 1e-6,
) -> GradCheckReport:
    """Compare analytic gradients against central differences, element by element.

    ``loss_fn`` must be a deterministic zero-argument callable that returns the
    scalar loss and accumulates analytic gradients into ``params``. Relative
    error per element is |a - n| / max(|a|, |n|, rel_floor); the report carries
    the worst one. Parameter values are restored exactly on exit.
    """
    zero_grads(params)
    loss_fn()
    analytic = {name: p.grad.copy() for name, p in params.items()}

    worst = GradCheckReport(0.0, "", (), 0.0, 0.0)
    for name, p in params.items():
        values = p.value
        it = np.nditer(values, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            original = values[idx]
            values[idx] = original + step
            loss_plus = loss_fn()
            values[idx] = original - step
            loss_minus = loss_fn()
            values[idx] = original
            numeric = (loss_plus - loss_minus) / (2.0 * step)
            a = analytic[name][idx]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), rel_floor)
            if rel >= worst.max_rel_error:
                worst = GradCheckReport(rel, name, idx, float(a), float(numeric))
            it.iternext()

    for name, p in params.items():
        p.grad[...] = analytic[name]
    return worst

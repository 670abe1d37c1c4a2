"""Named float64 parameter tensors with gradient accumulators, plus checkpoint I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = b"mailintent-params v1\n"


@dataclass
class ParamTensor:
    """A trainable array and its gradient accumulator (always float64, same shape)."""

    value: np.ndarray
    grad: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        else:
            self.grad = np.asarray(self.grad, dtype=np.float64)
        if self.grad.shape != self.value.shape:
            raise ValueError(
                f"gradient shape {self.grad.shape} != value shape {self.value.shape}"
            )

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


def zero_grads(params: dict[str, ParamTensor]) -> None:
    for p in params.values():
        p.zero_grad()


def copy_params(params: dict[str, ParamTensor]) -> dict[str, ParamTensor]:
    """Deep copy of values; gradients start at zero in the copy."""
    return {name: ParamTensor(p.value.copy()) for name, p in params.items()}


def params_allclose(a: dict[str, ParamTensor], b: dict[str, ParamTensor], **kw) -> bool:
    if a.keys() != b.keys():
        return False
    return all(np.allclose(a[k].value, b[k].value, **kw) for k in a)


def save_params(params: dict[str, ParamTensor], path: str | Path) -> None:
    """Write a checkpoint: magic/version line, JSON group header, then raw
    little-endian float64 values in row-major order, group by group."""
    groups = [{"name": name, "shape": list(p.shape)} for name, p in params.items()]
    header = json.dumps({"groups": groups}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(header + b"\n")
        for name, _ in ((g["name"], g) for g in groups):
            values = np.ascontiguousarray(params[name].value, dtype="<f8")
            fh.write(values.tobytes(order="C"))


def load_params(path: str | Path) -> dict[str, ParamTensor]:
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a parameter checkpoint (bad header {magic!r})")
        header = json.loads(fh.readline().decode("utf-8"))
        params: dict[str, ParamTensor] = {}
        for group in header["groups"]:
            shape = tuple(group["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise ValueError(f"truncated checkpoint while reading {group['name']}")
            values = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
            params[group["name"]] = ParamTensor(values)
    return params

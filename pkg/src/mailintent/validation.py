"""Input validation helpers shared by the estimators and the numeric layers."""

from __future__ import annotations

import numbers

import numpy as np


def check_texts(X, name: str = "X") -> list[str]:
    """Coerce to a list of strings; rejects scalars and non-string items."""
    if isinstance(X, str):
        raise TypeError(f"{name} must be a sequence of texts, not a single string")
    texts = list(X)
    for pos, item in enumerate(texts):
        if not isinstance(item, str):
            raise TypeError(f"{name}[{pos}] is {type(item).__name__}, expected str")
    return texts


def check_labels(y, num_classes: int, name: str = "y") -> np.ndarray:
    """Integer class labels in [0, num_classes)."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == arr.astype(np.int64)):
            raise ValueError(f"{name} must contain integer class labels")
    arr = arr.astype(np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
        raise ValueError(f"{name} labels must lie in [0, {num_classes})")
    return arr


def check_distributions(p, num_classes: int | None = None, atol: float = 1e-6, name: str = "p") -> np.ndarray:
    """Rows must be probability vectors summing to 1 within ``atol``."""
    arr = np.asarray(p, dtype=np.float64)
    rows = arr[None, :] if arr.ndim == 1 else arr
    if num_classes is not None and rows.shape[-1] != num_classes:
        raise ValueError(f"{name} has {rows.shape[-1]} columns, expected {num_classes}")
    if np.any(rows < -atol) or np.any(np.abs(rows.sum(axis=-1) - 1.0) > atol):
        raise ValueError(f"{name} rows must be probability distributions")
    return arr


def check_targets(y, num_classes: int, name: str = "y") -> np.ndarray:
    """Accept hard labels (1-d ints) or soft distributions (2-d rows); returns
    a (n, num_classes) float64 target matrix."""
    arr = np.asarray(y)
    if arr.ndim == 2:
        return check_distributions(arr, num_classes, name=name)
    labels = check_labels(arr, num_classes, name=name)
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def check_corruption_matrix(C, num_classes: int | None = None) -> np.ndarray:
    arr = np.asarray(C, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"corruption matrix must be square, got shape {arr.shape}")
    if num_classes is not None and arr.shape[0] != num_classes:
        raise ValueError(
            f"corruption matrix is {arr.shape[0]}x{arr.shape[0]}, expected {num_classes}"
        )
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("corruption matrix entries must lie in [0, 1]")
    if not np.allclose(arr.sum(axis=1), 1.0, atol=1e-6):
        raise ValueError("corruption matrix rows must sum to 1")
    return arr


def check_rate(value, name: str) -> float:
    if not isinstance(value, numbers.Real) or not 0.0 <= float(value) <= 1.0:
        raise ValueError(f"{name} must be a probability in [0, 1], got {value!r}")
    return float(value)


def check_positive_int(value, name: str) -> int:
    if not isinstance(value, numbers.Integral) or value <= 0:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)

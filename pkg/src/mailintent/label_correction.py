"""Corruption-matrix label correction.

Pipeline: train a model on the raw weak labels, average its predicted
distributions over the gold-labeled examples of each class to estimate the
label corruption matrix, retrain with weak predictions pushed through the
matrix transpose, and finally relabel the weak set with the retrained model's
(soft) predictions.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mailintent.corpus import Example, SOURCE_CORRECTED
from mailintent.estimators import IntentClassifier
from mailintent.validation import check_corruption_matrix, check_labels, check_texts

WEAK_MODEL_SEED_STREAM = 11
CORRECTED_MODEL_SEED_STREAM = 12
MATRIX_CLAMP = 1e-6


@dataclass(frozen=True)
class CorruptionMatrix:
    """Row-stochastic matrix; entry (l, r) estimates P(weak label r | true label l)."""

    matrix: np.ndarray

    def __post_init__(self):
        check_corruption_matrix(self.matrix)

    @property
    def num_classes(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, num_classes: int) -> "CorruptionMatrix":
        return cls(np.eye(num_classes))

    def clamped(self, floor: float = MATRIX_CLAMP) -> np.ndarray:
        """Entries clipped away from zero and rows renormalized, keeping the
        log arguments of the corrected loss strictly positive."""
        m = np.clip(self.matrix, floor, 1.0)
        return m / m.sum(axis=1, keepdims=True)

    def to_record(self) -> dict:
        return {"num_classes": self.num_classes, "rows": self.matrix.tolist()}

    @classmethod
    def from_record(cls, rec: dict) -> "CorruptionMatrix":
        return cls(np.asarray(rec["rows"], dtype=np.float64))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_record(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CorruptionMatrix":
        return cls.from_record(json.loads(Path(path).read_text(encoding="utf-8")))


def _derived_seed(seed: int, stream: int) -> int:
    return seed * 1000 + stream


def train_weak_model(
    X_weak,
    y_weak,
    *,
    X_dev=None,
    y_dev=None,
    vocab=None,
    seed: int = 0,
    **estimator_kw,
) -> IntentClassifier:
    """Fit a classifier on the raw weak labels (best dev epoch when dev data is
    given). This is the noisy predictor whose class-conditional averages
    estimate the corruption matrix."""
    if not len(X_weak):
        raise ValueError("weak training set is empty")
    model = IntentClassifier(seed=_derived_seed(seed, WEAK_MODEL_SEED_STREAM), **estimator_kw)
    model.fit(X_weak, y_weak, X_dev=X_dev, y_dev=y_dev, vocab=vocab)
    return model


def estimate_corruption_matrix(model, X, y, num_classes: int = 2) -> CorruptionMatrix:
    """Average the model's predicted weak-label distribution over the clean
    examples of each true class.

    ``model`` is either an estimator with predict_proba or a callable mapping
    texts to an (n, L) array. A class with no clean examples keeps the identity
    row (no evidence of corruption) with a warning; rows are renormalized.
    """
    if not len(X):
        raise ValueError("clean set is empty")
    y = check_labels(y, num_classes)
    proba_fn = model.predict_proba if hasattr(model, "predict_proba") else model
    probs = np.asarray(proba_fn(list(X)), dtype=np.float64)
    if probs.shape != (len(y), num_classes):
        raise ValueError(f"model produced shape {probs.shape}, expected {(len(y), num_classes)}")
    rows = np.eye(num_classes)
    for label in range(num_classes):
        members = probs[y == label]
        if len(members) == 0:
            warnings.warn(f"no clean examples with label {label}; assuming no corruption for it")
            continue
        rows[label] = members.mean(axis=0)
    rows = rows / rows.sum(axis=1, keepdims=True)
    return CorruptionMatrix(rows)


def train_corrected_model(
    X_clean,
    y_clean,
    X_weak,
    y_weak,
    matrix: CorruptionMatrix,
    *,
    X_dev=None,
    y_dev=None,
    vocab=None,
    seed: int = 0,
    **estimator_kw,
) -> IntentClassifier:
    """Retrain with plain cross-entropy on the clean examples and corrected
    cross-entropy (prediction pushed through the matrix transpose) on the weak
    ones. With the identity matrix this is exactly joint clean+weak training."""
    check_corruption_matrix(matrix.matrix)
    X_clean, X_weak = check_texts(X_clean), check_texts(X_weak)
    X = X_clean + X_weak
    y = np.concatenate([np.asarray(y_clean, dtype=np.int64), np.asarray(y_weak, dtype=np.int64)])
    mask = np.zeros(len(X), dtype=bool)
    mask[len(X_clean) :] = True
    model = IntentClassifier(seed=_derived_seed(seed, CORRECTED_MODEL_SEED_STREAM), **estimator_kw)
    model.fit(
        X,
        y,
        X_dev=X_dev,
        y_dev=y_dev,
        corruption_matrix=matrix.clamped(),
        corrupted_mask=mask,
        vocab=vocab,
    )
    return model


def correct_labels(model, X_weak, mode: str = "soft") -> np.ndarray:
    """Relabel weak texts with the corrected model: its predicted distribution
    per example ("soft", the default) or the one-hot argmax ("hard")."""
    probs = np.asarray(model.predict_proba(list(X_weak)), dtype=np.float64)
    if mode == "soft":
        return probs
    if mode == "hard":
        hard = np.zeros_like(probs)
        hard[np.arange(len(probs)), probs.argmax(axis=1)] = 1.0
        return hard
    raise ValueError(f"mode must be 'soft' or 'hard', got {mode!r}")


def corrected_examples(weak_examples, targets: np.ndarray) -> list[Example]:
    """Wrap corrected target distributions back into examples tagged CORRECTED."""
    if len(weak_examples) != len(targets):
        raise ValueError("one target row per weak example required")
    return [
        Example(
            id=ex.id,
            text=ex.text,
            label=None,
            soft=tuple(float(v) for v in row),
            source=SOURCE_CORRECTED,
        )
        for ex, row in zip(weak_examples, targets)
    ]


def save_corrected_labels(examples, intent: str, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            rec = {"message_id": ex.id, "intent": intent, "probs": list(ex.soft)}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

"""Comparison trainers sharing the encoder/head stack with the dual-head model.

All methods build the vocabulary from the clean + weak texts and initialize
the encoder identically under equal seeds, so the training objective is the
only thing that differs between them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mailintent.corpus import Dataset, texts_and_labels
from mailintent.dualhead import DualHeadClassifier
from mailintent.encoders import Vocabulary
from mailintent.estimators import IntentClassifier
from mailintent.label_correction import (
    estimate_corruption_matrix,
    train_corrected_model,
    train_weak_model,
)

BASELINE_KINDS = (
    "clean",
    "weak",
    "clean_plus_weak",
    "pre_weak",
    "instance_weighted",
    "label_corrected",
)
METHODS = BASELINE_KINDS + ("dual_head",)


@dataclass(frozen=True)
class IWTConfig:
    """Per-source loss weights for instance-weighted training."""

    clean_weight: float = 10.0
    weak_weight: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        if self.clean_weight < 0 or self.weak_weight < 0:
            raise ValueError("instance weights must be non-negative")


@dataclass(frozen=True)
class TrainConfig:
    """Shared knobs for every trainer; ``extra`` feeds method-specific options
    (IWT weights, the dual model's schedule, pretraining epochs)."""

    encoder: str = "avgemb"
    embed_dim: int = 50
    hidden_dim: int = 64
    max_len: int = 128
    truncate: str = "head"
    epochs: int = 10
    batch_size: int = 32
    alpha: float = 1.0
    rho: float = 0.95
    eps: float = 1e-6
    lr: float = 1.0
    iwt: IWTConfig = IWTConfig()
    pre_epochs: int | None = None
    warmup_epochs: int = 5
    lambda_schedule: tuple = ()
    epochs_per_stage: int | None = None
    patience: int = 3
    batch_half_size: int | None = None
    use_label_correction: bool = True
    use_self_paced: bool = True
    corrected_mode: str = "soft"
    glc_epochs: int = 20

    def estimator_kw(self, seed: int) -> dict:
        return dict(
            encoder=self.encoder,
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            max_len=self.max_len,
            truncate=self.truncate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            rho=self.rho,
            eps=self.eps,
            lr=self.lr,
            seed=seed,
        )


def shared_vocabulary(dataset: Dataset) -> Vocabulary:
    return Vocabulary.from_texts([e.text for e in dataset.clean] + [e.text for e in dataset.weak])


def _splits(dataset: Dataset):
    clean_x, clean_y = texts_and_labels(dataset.clean)
    weak_x, weak_y = texts_and_labels(dataset.weak)
    dev_x, dev_y = texts_and_labels(dataset.dev)
    test_x, test_y = texts_and_labels(dataset.test)
    return (clean_x, clean_y), (weak_x, weak_y), (dev_x, dev_y), (test_x, test_y)


def train_baseline(kind: str, dataset: Dataset, config: TrainConfig = TrainConfig(), seed: int = 0):
    """Train one baseline and report dev/test accuracy.

    Returns (model, metrics) where metrics is {"dev_accuracy", "test_accuracy"}.
    """
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline {kind!r}; expected one of {BASELINE_KINDS}")
    (clean_x, clean_y), (weak_x, weak_y), (dev_x, dev_y), (test_x, test_y) = _splits(dataset)
    if kind != "weak" and not clean_x:
        raise ValueError(f"baseline {kind!r} requires a non-empty clean split")
    if kind != "clean" and not weak_x:
        raise ValueError(f"baseline {kind!r} requires a non-empty weak split")
    vocab = shared_vocabulary(dataset)
    kw = config.estimator_kw(seed)

    if kind == "clean":
        model = IntentClassifier(**kw)
        model.fit(clean_x, clean_y, X_dev=dev_x, y_dev=dev_y, vocab=vocab)
    elif kind == "weak":
        model = IntentClassifier(**kw)
        model.fit(weak_x, weak_y, X_dev=dev_x, y_dev=dev_y, vocab=vocab)
    elif kind == "clean_plus_weak":
        model = IntentClassifier(**kw)
        model.fit(clean_x + weak_x, np.concatenate([clean_y, weak_y]), X_dev=dev_x, y_dev=dev_y, vocab=vocab)
    elif kind == "instance_weighted":
        model = IntentClassifier(**kw)
        weights = np.concatenate(
            [
                np.full(len(clean_x), config.iwt.clean_weight),
                np.full(len(weak_x), config.iwt.alpha * config.iwt.weak_weight),
            ]
        )
        model.fit(
            clean_x + weak_x,
            np.concatenate([clean_y, weak_y]),
            X_dev=dev_x,
            y_dev=dev_y,
            sample_weight=weights,
            vocab=vocab,
        )
    elif kind == "pre_weak":
        model = IntentClassifier(**kw)
        pre_epochs = config.pre_epochs if config.pre_epochs is not None else config.epochs
        if pre_epochs > 0:
            model.fit(weak_x, weak_y, vocab=vocab, epochs=pre_epochs)
            model.warm_start = True
        model.fit(clean_x, clean_y, X_dev=dev_x, y_dev=dev_y, vocab=vocab)
        model.warm_start = False
    else:  # label_corrected
        weak_model = train_weak_model(
            weak_x, weak_y, X_dev=dev_x, y_dev=dev_y, vocab=vocab, seed=seed, **_strip_seed(kw)
        )
        matrix = estimate_corruption_matrix(weak_model, clean_x, clean_y, dataset.num_classes)
        model = train_corrected_model(
            clean_x,
            clean_y,
            weak_x,
            weak_y,
            matrix,
            X_dev=dev_x,
            y_dev=dev_y,
            vocab=vocab,
            seed=seed,
            **_strip_seed(kw),
        )
        # let callers inspect the estimated matrix
        model.corruption_ = matrix

    metrics = {
        "dev_accuracy": model.accuracy(dev_x, dev_y) if dev_x else None,
        "test_accuracy": model.accuracy(test_x, test_y) if test_x else None,
    }
    return model, metrics


def _strip_seed(kw: dict) -> dict:
    out = dict(kw)
    out.pop("seed", None)
    return out


def train_dual_head(dataset: Dataset, config: TrainConfig = TrainConfig(), seed: int = 0):
    """Train the dual-head model on a dataset; returns (model, metrics)."""
    (clean_x, clean_y), (weak_x, weak_y), (dev_x, dev_y), (test_x, test_y) = _splits(dataset)
    model = DualHeadClassifier(
        encoder=config.encoder,
        embed_dim=config.embed_dim,
        hidden_dim=config.hidden_dim,
        max_len=config.max_len,
        truncate=config.truncate,
        alpha=config.alpha,
        batch_half_size=config.batch_half_size or config.batch_size // 2,
        warmup_epochs=config.warmup_epochs,
        lambda_schedule=config.lambda_schedule or DualHeadClassifier().lambda_schedule,
        epochs_per_stage=config.epochs_per_stage or config.epochs,
        patience=config.patience,
        use_label_correction=config.use_label_correction,
        use_self_paced=config.use_self_paced,
        corrected_mode=config.corrected_mode,
        glc_epochs=config.glc_epochs,
        rho=config.rho,
        eps=config.eps,
        lr=config.lr,
        seed=seed,
    )
    model.fit(
        clean_x,
        clean_y,
        X_weak=weak_x,
        y_weak=weak_y,
        X_dev=dev_x if dev_x else None,
        y_dev=dev_y if len(dev_y) else None,
        vocab=shared_vocabulary(dataset),
    )
    metrics = {
        "dev_accuracy": model.accuracy(dev_x, dev_y) if dev_x else None,
        "test_accuracy": model.accuracy(test_x, test_y) if test_x else None,
    }
    return model, metrics


def train_method(method: str, dataset: Dataset, config: TrainConfig = TrainConfig(), seed: int = 0):
    if method == "dual_head":
        return train_dual_head(dataset, config, seed)
    return train_baseline(method, dataset, config, seed)


def run_repeated(method: str, dataset: Dataset, seeds, config: TrainConfig = TrainConfig()) -> dict:
    """Train the method once per seed; returns per-seed metrics and their means."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    per_seed = []
    for seed in seeds:
        _, metrics = train_method(method, dataset, config, seed=seed)
        per_seed.append({"seed": seed, **metrics})
    out = {"method": method, "per_seed": per_seed}
    for key in ("dev_accuracy", "test_accuracy"):
        values = [m[key] for m in per_seed if m[key] is not None]
        out[f"mean_{key}"] = float(np.mean(values)) if values else None
    return out

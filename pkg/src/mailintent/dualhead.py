"""Dual-headed classifier over clean and weak supervision with self-paced
selection of weak examples.

A shared encoder feeds two softmax heads: the clean head is trained on
annotated labels and used for inference; the weak head is trained on
(optionally corrected) weak labels. Training warms up on clean data only, then
alternates between gradient steps on the joint objective and a closed-form
re-selection of weak examples whose current weak-head loss falls below a
growing threshold, admitting easy examples first.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from mailintent.corpus import texts_and_targets
from mailintent.encoders import NetworkConfig, Vocabulary, encode_texts, init_params
from mailintent.estimators import BATCH_STREAM, INIT_STREAM
from mailintent.label_correction import (
    CorruptionMatrix,
    correct_labels,
    estimate_corruption_matrix,
    train_corrected_model,
    train_weak_model,
)
from mailintent.network import accuracy, dual_batch_loss, per_example_losses, predict_proba
from mailintent.nn.optim import AdadeltaState, adadelta_step
from mailintent.nn.params import ParamTensor, copy_params, zero_grads
from mailintent.validation import check_targets, check_texts

DEFAULT_LAMBDA_SCHEDULE = tuple(round(0.1 * i, 1) for i in range(1, 31))


def select_weak(losses: np.ndarray, lam: float, alpha: float) -> np.ndarray:
    """Closed-form selection: admit example j iff loss_j < lam / alpha.

    This is the exact minimizer of the selection subproblem
    sum_j (alpha * v_j * loss_j - lam * v_j) over v in {0, 1}^N; ties
    (loss exactly at the threshold) are excluded by the strict inequality.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    losses = np.asarray(losses, dtype=np.float64)
    return (losses < lam / alpha).astype(np.int8)


def dual_loss(cfg: NetworkConfig, params, clean_batch, weak_batch, alpha: float) -> float:
    """Mean clean cross-entropy through the clean head plus alpha times mean
    weak cross-entropy through the weak head; gradients accumulate into
    ``params`` (encoder from both terms, each head from its own).

    Batches are (ids, lengths, target distributions); ``weak_batch`` may be
    None or empty for a clean-only step.
    """
    return dual_batch_loss(cfg, params, clean_batch, weak_batch, alpha)


@dataclass
class SelfPacedState:
    """Selection flags for every weak example at the current threshold."""

    v: np.ndarray
    lam: float
    stage: int
    dev_history: list[float] = field(default_factory=list)

    @property
    def selected(self) -> int:
        return int(self.v.sum())


@dataclass(frozen=True)
class StageRecord:
    stage: int
    lam: float
    selected: int
    train_loss: float
    dev_accuracy: float | None

    def to_record(self) -> dict:
        return {
            "stage": self.stage,
            "lambda": self.lam,
            "selected": self.selected,
            "train_loss": self.train_loss,
            "dev_accuracy": self.dev_accuracy,
        }


@dataclass(frozen=True)
class SelfPacedConfig:
    net: NetworkConfig
    alpha: float = 1.0
    batch_half_size: int = 16
    warmup_epochs: int = 5
    lambda_schedule: tuple = DEFAULT_LAMBDA_SCHEDULE
    epochs_per_stage: int = 10
    patience: int = 3
    use_self_paced: bool = True
    rho: float = 0.95
    eps: float = 1e-6
    lr: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.batch_half_size < 1:
            raise ValueError("batch_half_size must be at least 1")
        if any(b <= a for a, b in zip(self.lambda_schedule, self.lambda_schedule[1:])):
            raise ValueError("lambda schedule must be strictly increasing")


def train_self_paced(
    cfg: SelfPacedConfig,
    params: dict[str, ParamTensor],
    clean: tuple[np.ndarray, np.ndarray, np.ndarray],
    weak: tuple[np.ndarray, np.ndarray, np.ndarray],
    dev: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
) -> tuple[dict[str, ParamTensor], list[StageRecord], SelfPacedState]:
    """Warm up on clean data, then alternate between descending on the joint
    objective over batches of half clean / half selected-weak examples and
    re-selecting weak examples under a rising threshold.

    Stops when the schedule is exhausted or dev accuracy has not improved for
    ``patience`` consecutive stages; returns the dev-best parameters (final
    parameters when no dev split is given), the per-stage log, and the final
    selection state.
    """
    clean_ids, clean_lengths, clean_targets = clean
    weak_ids, weak_lengths, weak_targets = weak
    n_clean, n_weak = clean_ids.shape[0], weak_ids.shape[0]
    if n_clean == 0:
        raise ValueError("self-paced training requires a non-empty clean set")
    if n_weak == 0:
        warnings.warn("weak set is empty; training proceeds on clean data only")

    m = cfg.batch_half_size
    opt = AdadeltaState(rho=cfg.rho, eps=cfg.eps, lr=cfg.lr)
    rng = np.random.default_rng([cfg.seed, BATCH_STREAM])

    def clean_only_epoch(train_weak_head: bool = False) -> float:
        # warmup feeds the clean batch through both heads so the weak head's
        # per-example losses are informative by the first selection step
        order = rng.permutation(n_clean)
        losses = []
        for start in range(0, n_clean, 2 * m):
            idx = order[start : start + 2 * m]
            batch = (clean_ids[idx], clean_lengths[idx], clean_targets[idx])
            weak_view = batch if train_weak_head else None
            losses.append(dual_batch_loss(cfg.net, params, batch, weak_view, cfg.alpha))
            adadelta_step(params, opt)
        return float(np.mean(losses)) if losses else 0.0

    def joint_epoch(selected: np.ndarray) -> float:
        order = selected[rng.permutation(selected.shape[0])]
        losses = []
        for start in range(0, order.shape[0], m):
            weak_idx = order[start : start + m]
            clean_idx = rng.integers(0, n_clean, m)
            loss = dual_batch_loss(
                cfg.net,
                params,
                (clean_ids[clean_idx], clean_lengths[clean_idx], clean_targets[clean_idx]),
                (weak_ids[weak_idx], weak_lengths[weak_idx], weak_targets[weak_idx]),
                cfg.alpha,
            )
            losses.append(loss)
            adadelta_step(params, opt)
        return float(np.mean(losses)) if losses else 0.0

    def dev_accuracy() -> float | None:
        if dev is None:
            return None
        return accuracy(cfg.net, params, dev[0], dev[1], dev[2], head="head_clean")

    # the clean-only warmup is part of the curriculum: it traces a model space
    # in which the first selection losses are meaningful; the no-curriculum
    # ablation trains jointly from initialization instead
    if cfg.use_self_paced:
        for _ in range(cfg.warmup_epochs):
            clean_only_epoch(train_weak_head=True)

    best = copy_params(params)
    best_acc = dev_accuracy()
    state = SelfPacedState(v=np.zeros(n_weak, dtype=np.int8), lam=0.0, stage=-1)
    if best_acc is not None:
        state.dev_history.append(best_acc)

    log: list[StageRecord] = []
    stages_without_improvement = 0
    weak_entered = False
    for stage, lam in enumerate(cfg.lambda_schedule):
        if n_weak:
            losses = per_example_losses(
                cfg.net, params, weak_ids, weak_lengths, weak_targets, head="head_weak"
            )
            v = select_weak(losses, lam, cfg.alpha) if cfg.use_self_paced else np.ones(n_weak, np.int8)
        else:
            v = np.zeros(0, dtype=np.int8)
        state = SelfPacedState(v=v, lam=lam, stage=stage, dev_history=state.dev_history)
        selected = np.flatnonzero(v)
        if n_weak and selected.size == 0:
            warnings.warn(f"no weak examples selected at lambda={lam}; stage runs clean-only")
        weak_entered = weak_entered or selected.size > 0

        stage_losses = []
        for _ in range(cfg.epochs_per_stage):
            if selected.size:
                stage_losses.append(joint_epoch(selected))
            else:
                stage_losses.append(clean_only_epoch())

        acc = dev_accuracy()
        if acc is not None:
            state.dev_history.append(acc)
            if best_acc is None or acc > best_acc:
                best_acc = acc
                best = copy_params(params)
                stages_without_improvement = 0
            elif weak_entered:
                # patience counts only once weak data participates; stalling
                # through the clean-only ramp of tiny thresholds is expected
                stages_without_improvement += 1
        log.append(
            StageRecord(
                stage=stage,
                lam=lam,
                selected=int(selected.size),
                train_loss=float(np.mean(stage_losses)) if stage_losses else 0.0,
                dev_accuracy=acc,
            )
        )
        if dev is not None and stages_without_improvement >= cfg.patience:
            break

    final = best if dev is not None else params
    zero_grads(final)
    return final, log, state


class DualHeadClassifier(BaseEstimator, ClassifierMixin):
    """Joint classifier over a small clean set and a large weak set.

    fit takes the clean texts/labels plus ``X_weak``/``y_weak``; the weak
    labels are first rectified by the corruption-matrix correction stage
    (disable with ``use_label_correction=False``) and then consumed through
    the weak head under the self-paced schedule. ``use_self_paced=False``
    removes the curriculum altogether: no clean-only warmup and every weak
    example admitted from the first stage, i.e. plain joint training.
    Inference uses the clean head only; argmax ties resolve to the lowest
    class index.

    ``alpha`` weighs the weak loss term. ``batch_half_size`` is m in the
    2m-sized batches (m clean + m selected weak, clean drawn with
    replacement). ``glc_epochs`` is the epoch budget of both internal
    correction models; they are dev-selected like everything else.
    """

    def __init__(
        self,
        encoder="avgemb",
        embed_dim=50,
        hidden_dim=64,
        num_classes=2,
        max_len=128,
        truncate="head",
        alpha=1.0,
        batch_half_size=16,
        warmup_epochs=5,
        lambda_schedule=DEFAULT_LAMBDA_SCHEDULE,
        epochs_per_stage=10,
        patience=3,
        use_label_correction=True,
        use_self_paced=True,
        corrected_mode="soft",
        glc_epochs=20,
        rho=0.95,
        eps=1e-6,
        lr=1.0,
        seed=0,
    ):
        self.encoder = encoder
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.num_classes = num_classes
        self.max_len = max_len
        self.truncate = truncate
        self.alpha = alpha
        self.batch_half_size = batch_half_size
        self.warmup_epochs = warmup_epochs
        self.lambda_schedule = lambda_schedule
        self.epochs_per_stage = epochs_per_stage
        self.patience = patience
        self.use_label_correction = use_label_correction
        self.use_self_paced = use_self_paced
        self.corrected_mode = corrected_mode
        self.glc_epochs = glc_epochs
        self.rho = rho
        self.eps = eps
        self.lr = lr
        self.seed = seed

    def _estimator_kw(self):
        return dict(
            encoder=self.encoder,
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            num_classes=self.num_classes,
            max_len=self.max_len,
            truncate=self.truncate,
            epochs=self.glc_epochs,
            batch_size=2 * self.batch_half_size,
            rho=self.rho,
            eps=self.eps,
            lr=self.lr,
        )

    def fit(self, X, y, X_weak=(), y_weak=(), X_dev=None, y_dev=None, vocab=None):
        """Fit on clean texts X with labels y plus weak texts/labels.

        ``y_weak`` may be hard labels or soft target rows. ``X_dev``/``y_dev``
        drive stage-level early stopping and best-model selection. ``vocab``
        injects a shared vocabulary (default: built from clean + weak texts).
        """
        X = check_texts(X)
        X_weak = check_texts(X_weak, name="X_weak")
        if not X:
            raise ValueError("clean training set is empty")
        y_targets = check_targets(y, self.num_classes)
        if vocab is None:
            vocab = Vocabulary.from_texts(list(X) + list(X_weak))
        self.vocab_ = vocab
        self.net_ = NetworkConfig(
            encoder=self.encoder,
            vocab_size=vocab.size,
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            num_classes=self.num_classes,
        )

        self.corruption_ = None
        if X_weak:
            weak_targets = check_targets(y_weak, self.num_classes)
            if self.use_label_correction:
                weak_hard = np.asarray(weak_targets).argmax(axis=1)
                weak_model = train_weak_model(
                    X_weak,
                    weak_hard,
                    X_dev=X_dev,
                    y_dev=y_dev,
                    vocab=vocab,
                    seed=self.seed,
                    **self._estimator_kw(),
                )
                self.corruption_ = estimate_corruption_matrix(
                    weak_model, X, y_targets.argmax(axis=1), self.num_classes
                )
                corrector = train_corrected_model(
                    X,
                    y_targets.argmax(axis=1),
                    X_weak,
                    weak_hard,
                    self.corruption_,
                    X_dev=X_dev,
                    y_dev=y_dev,
                    vocab=vocab,
                    seed=self.seed,
                    **self._estimator_kw(),
                )
                weak_targets = correct_labels(corrector, X_weak, mode=self.corrected_mode)
            self.corrected_targets_ = weak_targets
        else:
            self.corrected_targets_ = np.zeros((0, self.num_classes))

        clean_ids, clean_lengths = encode_texts(X, vocab, self.max_len, self.truncate)
        weak_ids, weak_lengths = encode_texts(X_weak, vocab, self.max_len, self.truncate)
        dev = None
        if X_dev is not None:
            dev_ids, dev_lengths = encode_texts(X_dev, vocab, self.max_len, self.truncate)
            dev = (dev_ids, dev_lengths, np.asarray(y_dev, dtype=np.int64))

        params = init_params(self.net_, np.random.default_rng([self.seed, INIT_STREAM]), dual=True)
        cfg = SelfPacedConfig(
            net=self.net_,
            alpha=self.alpha,
            batch_half_size=self.batch_half_size,
            warmup_epochs=self.warmup_epochs,
            lambda_schedule=tuple(self.lambda_schedule),
            epochs_per_stage=self.epochs_per_stage,
            patience=self.patience,
            use_self_paced=self.use_self_paced,
            rho=self.rho,
            eps=self.eps,
            lr=self.lr,
            seed=self.seed,
        )
        self.params_, self.log_, self.state_ = train_self_paced(
            cfg,
            params,
            (clean_ids, clean_lengths, y_targets),
            (weak_ids, weak_lengths, self.corrected_targets_),
            dev,
        )
        self.classes_ = np.arange(self.num_classes)
        return self

    def _encode(self, X):
        return encode_texts(check_texts(X), self.vocab_, self.max_len, self.truncate)

    def predict_proba(self, X):
        """Clean-head distribution; the weak head plays no role at inference."""
        ids, lengths = self._encode(X)
        return predict_proba(self.net_, self.params_, ids, lengths, head="head_clean")

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)

    def accuracy(self, X, y):
        ids, lengths = self._encode(X)
        return accuracy(
            self.net_, self.params_, ids, lengths, np.asarray(y, dtype=np.int64), head="head_clean"
        )

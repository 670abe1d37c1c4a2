"""Batched loss/gradient plumbing and the epoch loop shared by every trainer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mailintent.encoders import NetworkConfig, encode_backward, encode_forward
from mailintent.nn.ops import pushed_cross_entropy, softmax, softmax_cross_entropy
from mailintent.nn.optim import AdadeltaState, adadelta_step
from mailintent.nn.params import ParamTensor, copy_params

EVAL_CHUNK = 512


def head_logits(params, feats: np.ndarray, head: str) -> np.ndarray:
    return feats @ params[f"{head}_w"].value + params[f"{head}_b"].value


def _head_backward(params, feats, dlogits, head: str) -> np.ndarray:
    params[f"{head}_w"].grad += feats.T @ dlogits
    params[f"{head}_b"].grad += dlogits.sum(axis=0)
    return dlogits @ params[f"{head}_w"].value.T


def single_head_loss(
    cfg: NetworkConfig,
    params: dict[str, ParamTensor],
    ids: np.ndarray,
    lengths: np.ndarray,
    targets: np.ndarray,
    *,
    head: str = "head",
    weights: np.ndarray | None = None,
    push: np.ndarray | None = None,
    push_mask: np.ndarray | None = None,
) -> float:
    """Mean (optionally weighted) cross-entropy of one batch through one head,
    accumulating gradients into ``params``.

    When ``push`` (a row-stochastic matrix) is given, rows selected by
    ``push_mask`` (default: all rows) have their predicted distribution pushed
    through ``push.T`` before the loss, leaving the remaining rows on the plain
    cross-entropy path.
    """
    feats, cache = encode_forward(cfg, params, ids, lengths)
    logits = head_logits(params, feats, head)
    if push is None:
        loss, _, dlogits = softmax_cross_entropy(logits, targets, weights)
    elif push_mask is None or bool(np.all(push_mask)):
        loss, dlogits = pushed_cross_entropy(logits, targets, push, weights)
    else:
        push_mask = np.asarray(push_mask, dtype=bool)
        batch = logits.shape[0]
        w_plain = np.ones(batch) if weights is None else np.asarray(weights, dtype=np.float64)
        plain_idx = np.flatnonzero(~push_mask)
        push_idx = np.flatnonzero(push_mask)
        dlogits = np.zeros_like(logits)
        loss = 0.0
        if plain_idx.size:
            part, _, dpart = softmax_cross_entropy(
                logits[plain_idx], targets[plain_idx], w_plain[plain_idx]
            )
            loss += part * plain_idx.size / batch
            dlogits[plain_idx] = dpart * plain_idx.size / batch
        if push_idx.size:
            part, dpart = pushed_cross_entropy(
                logits[push_idx], targets[push_idx], push, w_plain[push_idx]
            )
            loss += part * push_idx.size / batch
            dlogits[push_idx] = dpart * push_idx.size / batch
    dfeat = _head_backward(params, feats, dlogits, head)
    encode_backward(cfg, params, cache, dfeat)
    return loss


def dual_batch_loss(
    cfg: NetworkConfig,
    params: dict[str, ParamTensor],
    clean_batch: tuple[np.ndarray, np.ndarray, np.ndarray],
    weak_batch: tuple[np.ndarray, np.ndarray, np.ndarray] | None,
    alpha: float,
) -> float:
    """Joint objective: mean clean cross-entropy through the clean head plus
    ``alpha`` times the mean weak cross-entropy through the weak head. The
    encoder receives gradients from both terms; each head only from its own.
    Accumulates gradients and returns the scalar loss."""
    ids, lengths, targets = clean_batch
    loss = single_head_loss(cfg, params, ids, lengths, targets, head="head_clean")
    if weak_batch is not None and len(weak_batch[0]):
        w_ids, w_lengths, w_targets = weak_batch
        feats, cache = encode_forward(cfg, params, w_ids, w_lengths)
        logits = head_logits(params, feats, "head_weak")
        weak_loss, _, dlogits = softmax_cross_entropy(logits, w_targets)
        dfeat = _head_backward(params, feats, dlogits * alpha, "head_weak")
        encode_backward(cfg, params, cache, dfeat)
        loss += alpha * weak_loss
    return loss


def predict_proba(
    cfg: NetworkConfig,
    params: dict[str, ParamTensor],
    ids: np.ndarray,
    lengths: np.ndarray,
    head: str = "head",
) -> np.ndarray:
    out = np.zeros((ids.shape[0], cfg.num_classes))
    for start in range(0, ids.shape[0], EVAL_CHUNK):
        sl = slice(start, start + EVAL_CHUNK)
        feats, _ = encode_forward(cfg, params, ids[sl], lengths[sl])
        out[sl] = softmax(head_logits(params, feats, head))
    return out


def per_example_losses(
    cfg: NetworkConfig,
    params: dict[str, ParamTensor],
    ids: np.ndarray,
    lengths: np.ndarray,
    targets: np.ndarray,
    head: str = "head",
) -> np.ndarray:
    """Cross-entropy per example (no gradients, no reduction)."""
    losses = np.zeros(ids.shape[0])
    for start in range(0, ids.shape[0], EVAL_CHUNK):
        sl = slice(start, start + EVAL_CHUNK)
        feats, _ = encode_forward(cfg, params, ids[sl], lengths[sl])
        logits = head_logits(params, feats, head)
        shifted = logits - logits.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        losses[sl] = -(targets[sl] * logp).sum(axis=1)
    return losses


def accuracy(
    cfg: NetworkConfig,
    params: dict[str, ParamTensor],
    ids: np.ndarray,
    lengths: np.ndarray,
    labels: np.ndarray,
    head: str = "head",
) -> float:
    probs = predict_proba(cfg, params, ids, lengths, head)
    return float((probs.argmax(axis=1) == labels).mean())


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_accuracy: float | None


@dataclass
class TrainData:
    """A tokenized training pool with optional per-example weights and a mask
    of rows whose loss goes through the push matrix."""

    ids: np.ndarray
    lengths: np.ndarray
    targets: np.ndarray
    weights: np.ndarray | None = None
    push: np.ndarray | None = None
    push_mask: np.ndarray | None = None

    def __len__(self) -> int:
        return self.ids.shape[0]


def train_single_head(
    cfg: NetworkConfig,
    params: dict[str, ParamTensor],
    data: TrainData,
    *,
    epochs: int,
    batch_size: int,
    rng: np.random.Generator,
    opt: AdadeltaState,
    dev: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
    head: str = "head",
) -> tuple[dict[str, ParamTensor], list[EpochRecord]]:
    """Mini-batch training of one head; returns (best params, history).

    When ``dev`` is given, the snapshot with the best dev accuracy is returned
    (ties keep the earliest epoch); otherwise the final parameters are.
    """
    history: list[EpochRecord] = []
    best = copy_params(params) if dev is not None else params
    best_acc = -1.0
    n = len(data)
    for epoch in range(epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            loss = single_head_loss(
                cfg,
                params,
                data.ids[idx],
                data.lengths[idx],
                data.targets[idx],
                head=head,
                weights=None if data.weights is None else data.weights[idx],
                push=data.push,
                push_mask=None if data.push_mask is None else data.push_mask[idx],
            )
            adadelta_step(params, opt)
            losses.append(loss)
        dev_acc = None
        if dev is not None:
            dev_acc = accuracy(cfg, params, dev[0], dev[1], dev[2], head)
            if dev_acc > best_acc:
                best_acc = dev_acc
                best = copy_params(params)
        history.append(EpochRecord(epoch, float(np.mean(losses)) if losses else 0.0, dev_acc))
    if dev is not None:
        return best, history
    return params, history

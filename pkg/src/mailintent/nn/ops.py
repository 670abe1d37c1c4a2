"""Forward/backward passes for the small closed set of layers used by the models.

Every backward pass here is hand-derived and covered by central-finite-difference
checks in the test suite. Arrays are float64; batch is always the leading axis.
"""

from __future__ import annotations

import numpy as np

NORMALIZATION_ATOL = 1e-6


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax over the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _check_normalized(dist: np.ndarray, name: str) -> np.ndarray:
    dist = np.asarray(dist, dtype=np.float64)
    total = dist.sum(axis=-1)
    if not np.all(np.abs(total - 1.0) <= NORMALIZATION_ATOL):
        worst = float(np.abs(total - 1.0).max())
        raise ValueError(f"{name} must sum to 1 (off by {worst:.3g})")
    return dist


def cross_entropy(predicted: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Cross-entropy between a softmax output and a target distribution.

    Returns the scalar loss -sum(target * log(predicted)) and the gradient with
    respect to the pre-softmax logits, which is simply predicted - target.
    Both inputs must be normalized within 1e-6 (hard labels as one-hot rows).
    Accepts a single distribution or a batch; batched loss is the mean.
    """
    predicted = _check_normalized(predicted, "predicted distribution")
    target = _check_normalized(target, "target distribution")
    logp = np.log(np.clip(predicted, 1e-300, None))
    per_row = -(target * logp).sum(axis=-1)
    grad = predicted - target
    if per_row.ndim == 0:
        return float(per_row), grad
    return float(per_row.mean()), grad / per_row.shape[0]


def softmax_cross_entropy(
    logits: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Fused softmax + cross-entropy over a batch of logits (B, L).

    Log-sum-exp keeps the loss finite for large logits. Per-row losses are
    averaged; ``weights`` (B,) multiplies each row's loss before the mean.
    Returns (loss, probabilities, gradient wrt logits) with the 1/B and the
    weights already folded into the gradient.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    batch = logits.shape[0]
    logp = log_softmax(logits)
    probs = np.exp(logp)
    per_row = -(targets * logp).sum(axis=-1)
    if weights is None:
        loss = float(per_row.mean())
        dlogits = (probs - targets) / batch
    else:
        weights = np.asarray(weights, dtype=np.float64)
        loss = float((weights * per_row).mean())
        dlogits = (probs - targets) * (weights / batch)[:, None]
    return loss, probs, dlogits


def pushed_cross_entropy(
    logits: np.ndarray,
    targets: np.ndarray,
    push: np.ndarray,
    weights: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Cross-entropy after pushing the softmax output through a row-stochastic
    matrix: loss_i = -sum_r targets[i,r] * log((P^T p_i)_r) with p_i = softmax.

    Used when model predictions over true classes must be compared against
    labels drawn from a known corruption process. Returns (mean loss, gradient
    wrt logits), with weights handled as in :func:`softmax_cross_entropy`.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    batch = logits.shape[0]
    probs = softmax(logits)
    mixed = probs @ push  # (B, L); column r is sum_l p_l * push[l, r]
    mixed = np.clip(mixed, 1e-300, None)
    per_row = -(targets * np.log(mixed)).sum(axis=-1)
    dmixed = -targets / mixed
    dprobs = dmixed @ push.T
    # softmax vector-Jacobian product, row-wise
    dlogits = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
    if weights is None:
        loss = float(per_row.mean())
        dlogits = dlogits / batch
    else:
        weights = np.asarray(weights, dtype=np.float64)
        loss = float((weights * per_row).mean())
        dlogits = dlogits * (weights / batch)[:, None]
    return loss, dlogits


def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """y = x @ w + b. Returns (y, cache)."""
    return x @ w + b, x


def linear_backward(dy: np.ndarray, cache: np.ndarray, w: np.ndarray):
    """Returns (dx, dw, db) for y = x @ w + b."""
    x = cache
    return dy @ w.T, x.T @ dy, dy.sum(axis=0)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_forward(
    x: np.ndarray,
    lengths: np.ndarray,
    wx: np.ndarray,
    wh: np.ndarray,
    b: np.ndarray,
):
    """Run an LSTM over a padded batch and return each row's final hidden state.

    x: (B, T, d) inputs, lengths: (B,) true lengths >= 1. Gate layout along the
    4h axis is [input, forget, output, candidate]. Positions at or beyond a
    row's length never influence its returned state (the state at length-1 is
    gathered), so padding receives no gradient.
    """
    batch, steps, _ = x.shape
    hidden = wh.shape[0]
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    cache_steps = []
    h_all = np.zeros((steps, batch, hidden))
    for t in range(steps):
        z = x[:, t, :] @ wx + h @ wh + b
        i = _sigmoid(z[:, :hidden])
        f = _sigmoid(z[:, hidden : 2 * hidden])
        o = _sigmoid(z[:, 2 * hidden : 3 * hidden])
        g = np.tanh(z[:, 3 * hidden :])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        cache_steps.append((h, c, i, f, o, g, tanh_c))
        h, c = h_new, c_new
        h_all[t] = h_new
    lengths = np.asarray(lengths)
    final = h_all[lengths - 1, np.arange(batch)]
    cache = (x, lengths, wx, wh, cache_steps)
    return final, cache


def lstm_backward(dfinal: np.ndarray, cache) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Backward pass matching :func:`lstm_forward`; returns (dx, dwx, dwh, db)."""
    x, lengths, wx, wh, cache_steps = cache
    batch, steps, _ = x.shape
    hidden = wh.shape[0]
    dx = np.zeros_like(x)
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * hidden)
    dh = np.zeros((batch, hidden))
    dc = np.zeros((batch, hidden))
    for t in range(steps - 1, -1, -1):
        h_prev, c_prev, i, f, o, g, tanh_c = cache_steps[t]
        inject = lengths - 1 == t
        if inject.any():
            dh = dh + np.where(inject[:, None], dfinal, 0.0)
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c**2)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dc = dc * f
        dz = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g**2)],
            axis=1,
        )
        dwx += x[:, t, :].T @ dz
        dwh += h_prev.T @ dz
        db = db + dz.sum(axis=0)
        dx[:, t, :] = dz @ wx.T
        dh = dz @ wh.T
    return dx, dwx, dwh, db

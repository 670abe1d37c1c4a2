"""Tokenization, vocabulary, and the two text encoders (embedding average, BiLSTM).

The encoders are expressed as forward/backward pairs over a shared parameter
dict so a single training loop can drive either one. Single-sequence wrappers
(`avg_encode`, `bilstm_encode`, `classify`) expose the same math for one
example at a time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mailintent.nn.ops import linear_backward, linear_forward, lstm_backward, lstm_forward, softmax
from mailintent.nn.params import ParamTensor

PAD_ID = 0
OOV_ID = 1
_RESERVED = 2

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def split_tokens(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation (maximal word-char runs)."""
    return _TOKEN_RE.findall(text.lower())


class Vocabulary:
    """Dense token ids with PAD=0 and OOV=1 reserved."""

    def __init__(self, tokens: list[str]):
        self.tokens = list(tokens)
        self.token_to_id = {tok: i + _RESERVED for i, tok in enumerate(self.tokens)}
        if len(self.token_to_id) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    @property
    def size(self) -> int:
        return len(self.tokens) + _RESERVED

    def id_for(self, token: str) -> int:
        return self.token_to_id.get(token, OOV_ID)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    @classmethod
    def from_texts(cls, texts, min_count: int = 1) -> "Vocabulary":
        """Build from tokenized texts; tokens ordered by (-count, token)."""
        counts: dict[str, int] = {}
        for text in texts:
            for tok in split_tokens(text):
                counts[tok] = counts.get(tok, 0) + 1
        kept = [t for t, c in counts.items() if c >= min_count]
        kept.sort(key=lambda t: (-counts[t], t))
        return cls(kept)

    def save(self, path: str | Path) -> None:
        # one token per line; 0-based line number = id - 2
        Path(path).write_text("\n".join(self.tokens) + ("\n" if self.tokens else ""), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        text = Path(path).read_text(encoding="utf-8")
        return cls([line for line in text.splitlines()])


@dataclass
class TokenSequence:
    """Fixed-length id buffer; positions at or beyond true_length are PAD."""

    ids: np.ndarray
    true_length: int

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.true_length > self.ids.shape[0]:
            raise ValueError("true_length exceeds buffer length")
        if np.any(self.ids[self.true_length :] != PAD_ID):
            raise ValueError("positions beyond true_length must be PAD")


def tokenize(text: str, vocab: Vocabulary, max_len: int, truncate: str = "head") -> TokenSequence:
    """Map text to padded ids, keeping the first (or last) ``max_len`` tokens."""
    tokens = split_tokens(text)
    if truncate == "head":
        tokens = tokens[:max_len]
    elif truncate == "tail":
        tokens = tokens[-max_len:]
    else:
        raise ValueError(f"truncate must be 'head' or 'tail', got {truncate!r}")
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    for i, tok in enumerate(tokens):
        ids[i] = vocab.id_for(tok)
    return TokenSequence(ids=ids, true_length=len(tokens))


def encode_texts(texts, vocab: Vocabulary, max_len: int, truncate: str = "head"):
    """Batch tokenizer; returns (ids (N, max_len) int64, lengths (N,) int64)."""
    n = len(texts)
    ids = np.full((n, max_len), PAD_ID, dtype=np.int64)
    lengths = np.zeros(n, dtype=np.int64)
    for row, text in enumerate(texts):
        seq = tokenize(text, vocab, max_len, truncate)
        ids[row] = seq.ids
        lengths[row] = seq.true_length
    return ids, lengths


# ---------------------------------------------------------------------------
# network configuration and parameter initialization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NetworkConfig:
    encoder: str  # "avgemb" | "bilstm"
    vocab_size: int
    embed_dim: int
    hidden_dim: int
    num_classes: int

    def __post_init__(self):
        if self.encoder not in ("avgemb", "bilstm"):
            raise ValueError(f"unknown encoder {self.encoder!r}")

    @property
    def feature_dim(self) -> int:
        return self.embed_dim if self.encoder == "avgemb" else self.hidden_dim


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


def init_params(cfg: NetworkConfig, rng: np.random.Generator, dual: bool = False) -> dict[str, ParamTensor]:
    """Initialize all parameter groups in a fixed draw order so that models of
    the same architecture and seed share encoder initialization regardless of
    how many heads they carry."""
    d, h, L = cfg.embed_dim, cfg.hidden_dim, cfg.num_classes
    params: dict[str, ParamTensor] = {}
    params["embedding"] = ParamTensor(rng.uniform(-0.1, 0.1, (cfg.vocab_size, d)))
    if cfg.encoder == "bilstm":
        for direction in ("fwd", "bwd"):
            params[f"lstm_{direction}_wx"] = ParamTensor(_glorot(rng, d, 4 * h, (d, 4 * h)))
            params[f"lstm_{direction}_wh"] = ParamTensor(_glorot(rng, h, 4 * h, (h, 4 * h)))
            params[f"lstm_{direction}_b"] = ParamTensor(np.zeros(4 * h))
        params["proj_w"] = ParamTensor(_glorot(rng, 2 * h, h, (2 * h, h)))
        params["proj_b"] = ParamTensor(np.zeros(h))
    feat = cfg.feature_dim
    head_names = ("head_clean", "head_weak") if dual else ("head",)
    for head in head_names:
        params[f"{head}_w"] = ParamTensor(_glorot(rng, feat, L, (feat, L)))
        params[f"{head}_b"] = ParamTensor(np.zeros(L))
    return params


# ---------------------------------------------------------------------------
# batched encoder forward/backward
# ---------------------------------------------------------------------------


def encode_forward(cfg: NetworkConfig, params: dict[str, ParamTensor], ids: np.ndarray, lengths: np.ndarray):
    """Encode a padded id batch into features (B, feature_dim); returns (features, cache)."""
    if cfg.encoder == "avgemb":
        return _avg_forward(params, ids, lengths)
    return _bilstm_forward(params, ids, lengths)


def encode_backward(cfg: NetworkConfig, params: dict[str, ParamTensor], cache, dfeat: np.ndarray) -> None:
    """Accumulate encoder gradients for the given upstream feature gradient."""
    if cfg.encoder == "avgemb":
        _avg_backward(params, cache, dfeat)
    else:
        _bilstm_backward(params, cache, dfeat)


def _avg_forward(params, ids, lengths):
    table = params["embedding"].value
    emb = table[ids]  # (B, T, d)
    mask = np.arange(ids.shape[1])[None, :] < lengths[:, None]
    safe_len = np.maximum(lengths, 1).astype(np.float64)
    feats = (emb * mask[:, :, None]).sum(axis=1) / safe_len[:, None]
    feats[lengths == 0] = 0.0
    return feats, (ids, lengths, mask, safe_len)


def _avg_backward(params, cache, dfeat):
    ids, lengths, mask, safe_len = cache
    scale = dfeat / safe_len[:, None]
    scale = np.where((lengths == 0)[:, None], 0.0, scale)
    contrib = scale[:, None, :] * mask[:, :, None]
    np.add.at(params["embedding"].grad, ids, contrib)


def _reverse_within_length(ids: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    rev = np.full_like(ids, PAD_ID)
    for row in range(ids.shape[0]):
        n = lengths[row]
        rev[row, :n] = ids[row, :n][::-1]
    return rev


def _bilstm_forward(params, ids, lengths):
    if np.any(lengths < 1):
        raise ValueError("bilstm encoder requires non-empty sequences; filter empty texts")
    table = params["embedding"].value
    ids_rev = _reverse_within_length(ids, lengths)
    emb_f = table[ids]
    emb_b = table[ids_rev]
    h_f, cache_f = lstm_forward(
        emb_f, lengths, params["lstm_fwd_wx"].value, params["lstm_fwd_wh"].value, params["lstm_fwd_b"].value
    )
    h_b, cache_b = lstm_forward(
        emb_b, lengths, params["lstm_bwd_wx"].value, params["lstm_bwd_wh"].value, params["lstm_bwd_b"].value
    )
    concat = np.concatenate([h_f, h_b], axis=1)
    pre, lin_cache = linear_forward(concat, params["proj_w"].value, params["proj_b"].value)
    feats = np.tanh(pre)
    return feats, (ids, ids_rev, cache_f, cache_b, lin_cache, feats)


def _bilstm_backward(params, cache, dfeat):
    ids, ids_rev, cache_f, cache_b, lin_cache, feats = cache
    hidden = params["proj_w"].value.shape[1]
    dpre = dfeat * (1.0 - feats**2)
    dconcat, dw, db = linear_backward(dpre, lin_cache, params["proj_w"].value)
    params["proj_w"].grad += dw
    params["proj_b"].grad += db
    h = params["lstm_fwd_wh"].value.shape[0]
    dx_f, dwx, dwh, dbg = lstm_backward(dconcat[:, :h], cache_f)
    params["lstm_fwd_wx"].grad += dwx
    params["lstm_fwd_wh"].grad += dwh
    params["lstm_fwd_b"].grad += dbg
    dx_b, dwx, dwh, dbg = lstm_backward(dconcat[:, h:], cache_b)
    params["lstm_bwd_wx"].grad += dwx
    params["lstm_bwd_wh"].grad += dwh
    params["lstm_bwd_b"].grad += dbg
    np.add.at(params["embedding"].grad, ids, dx_f)
    np.add.at(params["embedding"].grad, ids_rev, dx_b)


# ---------------------------------------------------------------------------
# single-sequence wrappers
# ---------------------------------------------------------------------------


def avg_encode(seq: TokenSequence, params: dict[str, ParamTensor]) -> np.ndarray:
    """Mean embedding over the non-PAD prefix; zero vector for empty input."""
    feats, _ = _avg_forward(params, seq.ids[None, :], np.array([seq.true_length]))
    return feats[0]


def bilstm_encode(seq: TokenSequence, params: dict[str, ParamTensor]) -> np.ndarray:
    """BiLSTM feature for one sequence; raises on empty input."""
    if seq.true_length == 0:
        raise ValueError("bilstm encoder cannot encode an empty sequence")
    feats, _ = _bilstm_forward(params, seq.ids[None, :], np.array([seq.true_length]))
    return feats[0]


def classify(feature: np.ndarray, head_w: np.ndarray, head_b: np.ndarray) -> np.ndarray:
    """Softmax of the affine head applied to one feature vector."""
    feature = np.asarray(feature, dtype=np.float64)
    if feature.shape[-1] != head_w.shape[0]:
        raise ValueError(
            f"feature dimension {feature.shape[-1]} does not match head input {head_w.shape[0]}"
        )
    return softmax(feature @ head_w + head_b)


# ---------------------------------------------------------------------------
# pretrained embedding overlays
# ---------------------------------------------------------------------------


def load_pretrained_embeddings(path: str | Path, vocab: Vocabulary, embed_dim: int) -> dict[int, np.ndarray]:
    """Read "token v1 ... vd" lines; returns {token id: vector} for in-vocab tokens.

    Out-of-vocabulary file rows are skipped. A row whose vector length differs
    from ``embed_dim`` raises."""
    overlay: dict[int, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if len(values) != embed_dim:
                raise ValueError(
                    f"{path}:{lineno}: expected {embed_dim} values for {token!r}, got {len(values)}"
                )
            if token in vocab:
                overlay[vocab.token_to_id[token]] = np.array([float(v) for v in values])
    return overlay


def apply_embedding_overlay(table: np.ndarray, overlay: dict[int, np.ndarray]) -> int:
    """Overwrite table rows in place; returns the number of rows replaced."""
    for token_id, vector in overlay.items():
        table[token_id] = vector
    return len(overlay)

"""Single-head text classifier with a scikit-learn estimator surface.

The network is word embeddings -> encoder (embedding average or BiLSTM) ->
softmax head, trained with Adadelta. All baselines and the label-correction
stages are configurations of this estimator; the dual-head model lives in
:mod:`mailintent.dualhead`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from mailintent.encoders import (
    NetworkConfig,
    Vocabulary,
    apply_embedding_overlay,
    encode_texts,
    init_params,
    load_pretrained_embeddings,
)
from mailintent.network import (
    TrainData,
    accuracy,
    predict_proba,
    single_head_loss,
    train_single_head,
)
from mailintent.nn.optim import AdadeltaState
from mailintent.nn.params import zero_grads
from mailintent.validation import check_corruption_matrix, check_targets, check_texts

INIT_STREAM = 0
BATCH_STREAM = 1


class IntentClassifier(BaseEstimator, ClassifierMixin):
    """Embedding + encoder + softmax classifier over raw texts.

    Parameters
    ----------
    encoder : "avgemb" or "bilstm"
    embed_dim, hidden_dim : int
        Embedding width and (for bilstm) recurrent width. Defaults are desk
        scale; raise both for larger experiments.
    num_classes : int
    max_len : int
        Texts are truncated/padded to this many tokens.
    truncate : "head" or "tail"
        Which end of over-long texts survives truncation.
    epochs, batch_size : int
    rho, eps, lr : float
        Adadelta constants.
    seed : int
        Controls initialization and batch order; fixed seed, fixed weights.
    warm_start : bool
        Reuse previously fitted parameters/vocabulary instead of
        reinitializing (the vocabulary must already cover the new texts).
    pretrained_embeddings : str or None
        Optional path of "token v1 ... vd" rows overlaid on the initial
        embedding table (rows stay trainable).
    """

    def __init__(
        self,
        encoder="avgemb",
        embed_dim=50,
        hidden_dim=64,
        num_classes=2,
        max_len=128,
        truncate="head",
        epochs=10,
        batch_size=32,
        rho=0.95,
        eps=1e-6,
        lr=1.0,
        seed=0,
        warm_start=False,
        pretrained_embeddings=None,
    ):
        self.encoder = encoder
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.num_classes = num_classes
        self.max_len = max_len
        self.truncate = truncate
        self.epochs = epochs
        self.batch_size = batch_size
        self.rho = rho
        self.eps = eps
        self.lr = lr
        self.seed = seed
        self.warm_start = warm_start
        self.pretrained_embeddings = pretrained_embeddings

    # ------------------------------------------------------------------

    def _encode(self, X):
        texts = check_texts(X)
        ids, lengths = encode_texts(texts, self.vocab_, self.max_len, self.truncate)
        if self.encoder == "bilstm" and np.any(lengths == 0):
            raise ValueError("bilstm encoder cannot handle empty texts; filter them out")
        return ids, lengths

    def _init_model(self, vocab):
        self.vocab_ = vocab
        self.net_ = NetworkConfig(
            encoder=self.encoder,
            vocab_size=vocab.size,
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            num_classes=self.num_classes,
        )
        rng = np.random.default_rng([self.seed, INIT_STREAM])
        self.params_ = init_params(self.net_, rng)
        if self.pretrained_embeddings is not None:
            overlay = load_pretrained_embeddings(self.pretrained_embeddings, vocab, self.embed_dim)
            apply_embedding_overlay(self.params_["embedding"].value, overlay)

    def fit(
        self,
        X,
        y,
        X_dev=None,
        y_dev=None,
        sample_weight=None,
        corruption_matrix=None,
        corrupted_mask=None,
        vocab=None,
        epochs=None,
    ):
        """Fit on texts X and targets y (hard labels or soft distributions).

        X_dev/y_dev enable best-epoch selection by dev accuracy. sample_weight
        multiplies each example's loss. corruption_matrix (with an optional
        corrupted_mask selecting rows) routes predictions through the given
        row-stochastic matrix before the loss. ``vocab`` injects a shared
        vocabulary; by default one is built from X. ``epochs`` overrides the
        constructor setting for this call only.
        """
        texts = check_texts(X)
        if not texts:
            raise ValueError("cannot fit on an empty training set")
        targets = check_targets(y, self.num_classes)
        if targets.shape[0] != len(texts):
            raise ValueError(f"X has {len(texts)} texts but y has {targets.shape[0]} rows")
        if not (self.warm_start and hasattr(self, "params_")):
            self._init_model(vocab if vocab is not None else Vocabulary.from_texts(texts))
        ids, lengths = self._encode(texts)

        weights = None if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
        push = None
        if corruption_matrix is not None:
            push = check_corruption_matrix(corruption_matrix, self.num_classes)
        mask = None if corrupted_mask is None else np.asarray(corrupted_mask, dtype=bool)
        data = TrainData(ids, lengths, targets, weights=weights, push=push, push_mask=mask)

        dev = None
        if X_dev is not None:
            dev_ids, dev_lengths = self._encode(X_dev)
            dev = (dev_ids, dev_lengths, np.asarray(y_dev, dtype=np.int64))

        opt = AdadeltaState(rho=self.rho, eps=self.eps, lr=self.lr)
        rng = np.random.default_rng([self.seed, BATCH_STREAM])
        self.params_, self.history_ = train_single_head(
            self.net_,
            self.params_,
            data,
            epochs=self.epochs if epochs is None else epochs,
            batch_size=self.batch_size,
            rng=rng,
            opt=opt,
            dev=dev,
        )
        zero_grads(self.params_)
        self.classes_ = np.arange(self.num_classes)
        return self

    def predict_proba(self, X):
        ids, lengths = self._encode(X)
        return predict_proba(self.net_, self.params_, ids, lengths)

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)

    def accuracy(self, X, y):
        ids, lengths = self._encode(X)
        return accuracy(self.net_, self.params_, ids, lengths, np.asarray(y, dtype=np.int64))

    def loss_on(self, X, y, sample_weight=None, corruption_matrix=None, corrupted_mask=None):
        """Loss of the current parameters on one batch (gradients discarded);
        useful for objective-equivalence checks."""
        ids, lengths = self._encode(X)
        targets = check_targets(y, self.num_classes)
        push = None
        if corruption_matrix is not None:
            push = check_corruption_matrix(corruption_matrix, self.num_classes)
        loss = single_head_loss(
            self.net_,
            self.params_,
            ids,
            lengths,
            targets,
            weights=None if sample_weight is None else np.asarray(sample_weight, dtype=np.float64),
            push=push,
            push_mask=corrupted_mask,
        )
        zero_grads(self.params_)
        return loss

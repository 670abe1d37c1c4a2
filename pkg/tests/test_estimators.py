"""The single-head estimator: sklearn surface, training behavior, objectives."""

import numpy as np
import pytest
from sklearn.base import clone

from mailintent.encoders import Vocabulary
from mailintent.estimators import IntentClassifier


def separable_data(n=60, seed=0):
    rng = np.random.default_rng(seed)
    X, y = [], []
    for _ in range(n):
        label = int(rng.random() < 0.5)
        word = "alpha" if label else "bravo"
        filler = " ".join(rng.choice(["pad1", "pad2", "pad3"], size=3))
        X.append(f"{word} {filler}")
        y.append(label)
    return X, np.array(y)


class TestSklearnSurface:
    def test_get_set_params_and_clone(self):
        model = IntentClassifier(embed_dim=8, epochs=2, seed=3)
        params = model.get_params()
        assert params["embed_dim"] == 8
        twin = clone(model)
        assert twin.get_params() == params
        model.set_params(epochs=5)
        assert model.epochs == 5

    def test_score_is_accuracy(self):
        X, y = separable_data()
        model = IntentClassifier(embed_dim=8, epochs=20, eps=1e-4, seed=0).fit(X, y)
        assert model.score(X, y) == pytest.approx(model.accuracy(X, y))


class TestFitBehavior:
    def test_separable_data_reaches_high_training_accuracy(self):
        X, y = separable_data()
        model = IntentClassifier(embed_dim=8, epochs=40, eps=1e-4, seed=0).fit(X, y)
        assert model.accuracy(X, y) >= 0.99

    def test_constant_labels_predict_that_label(self):
        X, _ = separable_data(n=30)
        model = IntentClassifier(embed_dim=8, epochs=10, seed=1).fit(X, np.ones(30, dtype=int))
        assert np.all(model.predict(X) == 1)

    def test_fixed_seed_is_bitwise_reproducible(self):
        X, y = separable_data()
        a = IntentClassifier(embed_dim=8, epochs=5, seed=7).fit(X, y)
        b = IntentClassifier(embed_dim=8, epochs=5, seed=7).fit(X, y)
        assert all(np.array_equal(a.params_[k].value, b.params_[k].value) for k in a.params_)

    def test_different_seeds_differ(self):
        X, y = separable_data()
        a = IntentClassifier(embed_dim=8, epochs=2, seed=1).fit(X, y)
        b = IntentClassifier(embed_dim=8, epochs=2, seed=2).fit(X, y)
        assert not np.array_equal(a.params_["embedding"].value, b.params_["embedding"].value)

    def test_predict_proba_rows_normalized(self):
        X, y = separable_data()
        model = IntentClassifier(embed_dim=8, epochs=3, seed=0).fit(X, y)
        probs = model.predict_proba(X)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_empty_training_set_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            IntentClassifier().fit([], [])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="texts"):
            IntentClassifier().fit(["a", "b"], [0])

    def test_dev_selection_keeps_best_epoch(self):
        X, y = separable_data(n=40)
        Xd, yd = separable_data(n=20, seed=9)
        model = IntentClassifier(embed_dim=8, epochs=15, eps=1e-4, seed=0).fit(X, y, X_dev=Xd, y_dev=yd)
        best = max(h.dev_accuracy for h in model.history_)
        assert model.accuracy(Xd, yd) == pytest.approx(best)

    def test_soft_targets_accepted(self):
        X, _ = separable_data(n=20)
        soft = np.tile([0.3, 0.7], (20, 1))
        model = IntentClassifier(embed_dim=8, epochs=3, seed=0).fit(X, soft)
        assert model.predict_proba(X).shape == (20, 2)

    def test_bilstm_rejects_empty_texts(self):
        with pytest.raises(ValueError, match="empty texts"):
            IntentClassifier(encoder="bilstm", embed_dim=6, hidden_dim=4, epochs=1).fit(
                ["hello", ""], [0, 1]
            )

    def test_warm_start_continues_from_previous_fit(self):
        X, y = separable_data()
        vocab = Vocabulary.from_texts(X)
        model = IntentClassifier(embed_dim=8, epochs=3, seed=0)
        model.fit(X, y, vocab=vocab)
        frozen = {k: p.value.copy() for k, p in model.params_.items()}
        model.warm_start = True
        model.fit(X, y, vocab=vocab, epochs=0)
        # zero extra epochs: parameters unchanged, proving no reinitialization
        assert all(np.array_equal(model.params_[k].value, frozen[k]) for k in frozen)

    def test_injected_vocabulary_is_used(self):
        X, y = separable_data(n=20)
        vocab = Vocabulary.from_texts(["completely different tokens"])
        model = IntentClassifier(embed_dim=8, epochs=1, seed=0).fit(X, y, vocab=vocab)
        assert model.vocab_ is vocab
        assert model.net_.vocab_size == vocab.size


class TestObjectives:
    def test_identity_corruption_equals_plain_loss(self):
        X, y = separable_data(n=16)
        model = IntentClassifier(embed_dim=8, epochs=1, seed=0).fit(X, y)
        plain = model.loss_on(X, y)
        pushed = model.loss_on(
            X, y, corruption_matrix=np.eye(2), corrupted_mask=np.ones(len(X), dtype=bool)
        )
        assert pushed == pytest.approx(plain, rel=1e-12)

    def test_unit_weights_equal_no_weights(self):
        X, y = separable_data(n=16)
        model = IntentClassifier(embed_dim=8, epochs=1, seed=0).fit(X, y)
        assert model.loss_on(X, y, sample_weight=np.ones(len(X))) == pytest.approx(
            model.loss_on(X, y), rel=1e-12
        )

    def test_weights_scale_the_loss(self):
        X, y = separable_data(n=8)
        model = IntentClassifier(embed_dim=8, epochs=1, seed=0).fit(X, y)
        assert model.loss_on(X, y, sample_weight=np.full(len(X), 3.0)) == pytest.approx(
            3.0 * model.loss_on(X, y), rel=1e-12
        )

    def test_partial_corruption_mask_mixes_paths(self):
        X, y = separable_data(n=10)
        model = IntentClassifier(embed_dim=8, epochs=1, seed=0).fit(X, y)
        C = np.array([[0.8, 0.2], [0.3, 0.7]])
        mask = np.zeros(10, dtype=bool)
        mask[5:] = True
        mixed = model.loss_on(X, y, corruption_matrix=C, corrupted_mask=mask)
        plain_half = model.loss_on(X[:5], y[:5])
        pushed_half = model.loss_on(X[5:], y[5:], corruption_matrix=C)
        assert mixed == pytest.approx(0.5 * plain_half + 0.5 * pushed_half, rel=1e-10)

"""Corruption-matrix estimation and corrected retraining."""

import warnings

import numpy as np
import pytest

from mailintent.corpus import SOURCE_CORRECTED, Example
from mailintent.label_correction import (
    CorruptionMatrix,
    correct_labels,
    corrected_examples,
    estimate_corruption_matrix,
    train_corrected_model,
    train_weak_model,
)
from mailintent.estimators import IntentClassifier


class StubModel:
    """predict_proba returns preset rows keyed by text."""

    def __init__(self, table):
        self.table = table

    def predict_proba(self, X):
        return np.array([self.table[x] for x in X])


class TestEstimateCorruptionMatrix:
    def test_hand_average(self):
        model = StubModel({"x1": [0.8, 0.2], "x2": [0.6, 0.4]})
        C = estimate_corruption_matrix(model, ["x1", "x2"], [0, 0], 2)
        np.testing.assert_allclose(C.matrix[0], [0.7, 0.3])
        np.testing.assert_allclose(C.matrix[1], [0.0, 1.0])  # empty class keeps identity

    def test_identity_when_predictions_match_clean_labels(self):
        model = StubModel({"a": [1.0, 0.0], "b": [0.0, 1.0]})
        C = estimate_corruption_matrix(model, ["a", "b"], [0, 1], 2)
        np.testing.assert_allclose(C.matrix, np.eye(2))

    def test_order_independence(self):
        rng = np.random.default_rng(0)
        texts = [f"t{i}" for i in range(40)]
        table = {t: rng.dirichlet([1, 1]) for t in texts}
        labels = rng.integers(0, 2, 40)
        model = StubModel(table)
        C1 = estimate_corruption_matrix(model, texts, labels, 2)
        order = rng.permutation(40)
        C2 = estimate_corruption_matrix(
            model, [texts[i] for i in order], labels[order], 2
        )
        np.testing.assert_allclose(C1.matrix, C2.matrix, atol=1e-12)

    def test_empty_class_warns(self):
        model = StubModel({"a": [0.5, 0.5]})
        with pytest.warns(UserWarning, match="no clean examples"):
            estimate_corruption_matrix(model, ["a"], [0], 2)

    def test_empty_clean_set_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            estimate_corruption_matrix(StubModel({}), [], [], 2)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(4)
        texts = [f"t{i}" for i in range(30)]
        model = StubModel({t: rng.dirichlet([2, 1]) for t in texts})
        C = estimate_corruption_matrix(model, texts, rng.integers(0, 2, 30), 2)
        np.testing.assert_allclose(C.matrix.sum(axis=1), 1.0, atol=1e-9)

    def test_planted_noise_recovery_light(self):
        # oracle weak-label predictor: one-hot of the realized weak label
        rng = np.random.default_rng(11)
        C_true = np.array([[0.7, 0.3], [0.2, 0.8]])
        n = 5000
        y = rng.integers(0, 2, n)
        weak = np.array([rng.choice(2, p=C_true[label]) for label in y])
        texts = [f"x{i}" for i in range(n)]
        model = StubModel({texts[i]: np.eye(2)[weak[i]] for i in range(n)})
        C = estimate_corruption_matrix(model, texts, y, 2)
        assert np.abs(C.matrix - C_true).max() < 0.05


class TestCorruptionMatrixType:
    def test_rejects_non_stochastic(self):
        with pytest.raises(ValueError, match="sum to 1"):
            CorruptionMatrix(np.array([[0.5, 0.6], [0.2, 0.8]]))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="\\[0, 1\\]"):
            CorruptionMatrix(np.array([[1.2, -0.2], [0.2, 0.8]]))

    def test_clamped_keeps_rows_stochastic_and_positive(self):
        C = CorruptionMatrix(np.array([[1.0, 0.0], [0.2, 0.8]]))
        clamped = C.clamped()
        assert clamped.min() > 0
        np.testing.assert_allclose(clamped.sum(axis=1), 1.0, atol=1e-12)

    def test_record_roundtrip(self, tmp_path):
        C = CorruptionMatrix(np.array([[0.9, 0.1], [0.4, 0.6]]))
        path = tmp_path / "matrix.json"
        C.save(path)
        np.testing.assert_allclose(CorruptionMatrix.load(path).matrix, C.matrix)


def tiny_texts(tokens, n, seed):
    rng = np.random.default_rng(seed)
    return [" ".join(rng.choice(tokens, size=4)) for _ in range(n)]


class TestTrainingStages:
    def test_weak_model_requires_data(self):
        with pytest.raises(ValueError, match="empty"):
            train_weak_model([], [])

    def test_weak_model_is_deterministic(self):
        X = tiny_texts(["a", "b", "c"], 30, 0)
        y = np.random.default_rng(0).integers(0, 2, 30)
        m1 = train_weak_model(X, y, seed=4, embed_dim=6, epochs=3)
        m2 = train_weak_model(X, y, seed=4, embed_dim=6, epochs=3)
        assert all(np.array_equal(m1.params_[k].value, m2.params_[k].value) for k in m1.params_)

    def test_corrected_model_single_example_loss_matches_hand_formula(self):
        C = CorruptionMatrix(np.array([[0.7, 0.3], [0.2, 0.8]]))
        model = IntentClassifier(embed_dim=4, epochs=1, seed=0).fit(["word one", "word two"], [0, 1])
        p = model.predict_proba(["word one"])[0]
        pushed = C.clamped().T @ p
        expected = -np.log(pushed[1])
        got = model.loss_on(["word one"], [1], corruption_matrix=C.clamped())
        assert got == pytest.approx(expected, rel=1e-10)

    def test_corrected_model_trains_end_to_end(self):
        X_clean = tiny_texts(["good", "fine"], 12, 1)
        X_weak = tiny_texts(["good", "fine", "noise"], 24, 2)
        rng = np.random.default_rng(3)
        model = train_corrected_model(
            X_clean,
            rng.integers(0, 2, 12),
            X_weak,
            rng.integers(0, 2, 24),
            CorruptionMatrix(np.array([[0.8, 0.2], [0.3, 0.7]])),
            embed_dim=6,
            epochs=2,
        )
        probs = model.predict_proba(X_weak)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)


class TestCorrectLabels:
    def test_uniform_model_gives_uniform_soft_labels(self):
        X = ["alpha beta", "gamma delta"]
        model = IntentClassifier(embed_dim=4, epochs=1, seed=0).fit(X, [0, 1])
        for p in model.params_.values():
            p.value[...] = 0.0
        out = correct_labels(model, X)
        np.testing.assert_allclose(out, 0.5)

    def test_output_matches_input_size(self):
        X = tiny_texts(["a", "b"], 37, 5)
        model = IntentClassifier(embed_dim=4, epochs=1, seed=0).fit(X, [0] * 37)
        assert len(correct_labels(model, X)) == 37

    def test_soft_rows_normalized_over_many_inputs(self):
        X = tiny_texts(["a", "b", "c", "d"], 1000, 6)
        model = IntentClassifier(embed_dim=4, epochs=1, seed=0).fit(X[:50], [0, 1] * 25)
        out = correct_labels(model, X)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-9)

    def test_hard_mode_is_one_hot(self):
        X = tiny_texts(["a", "b"], 10, 7)
        model = IntentClassifier(embed_dim=4, epochs=2, seed=0).fit(X, [0, 1] * 5)
        out = correct_labels(model, X, mode="hard")
        assert set(np.unique(out)) <= {0.0, 1.0}
        np.testing.assert_array_equal(out.sum(axis=1), 1.0)

    def test_unknown_mode_rejected(self):
        model = IntentClassifier(embed_dim=4, epochs=1, seed=0).fit(["a"], [0])
        with pytest.raises(ValueError, match="mode"):
            correct_labels(model, ["a"], mode="fuzzy")

    def test_corrected_examples_are_tagged(self):
        weak = [Example(id="w1", text="a", label=1, source="weak")]
        out = corrected_examples(weak, np.array([[0.4, 0.6]]))
        assert out[0].source == SOURCE_CORRECTED
        assert out[0].soft == (0.4, 0.6)

"""Dual-headed model: joint loss, closed-form selection, self-paced loop."""

import itertools
import warnings

import numpy as np
import pytest

from mailintent.dualhead import (
    DualHeadClassifier,
    SelfPacedConfig,
    dual_loss,
    select_weak,
    train_self_paced,
)
from mailintent.encoders import NetworkConfig, Vocabulary, encode_texts, init_params
from mailintent.network import dual_batch_loss, per_example_losses
from mailintent.nn import AdadeltaState, adadelta_step, softmax, zero_grads
from mailintent.nn.params import copy_params


def brute_force_selection(losses, lam, alpha):
    """Minimize sum_j (alpha * v_j * loss_j - lam * v_j) by enumeration,
    preferring fewer selections on ties."""
    n = len(losses)
    best_v, best_obj = None, None
    for bits in itertools.product((0, 1), repeat=n):
        obj = sum(alpha * v * l - lam * v for v, l in zip(bits, losses))
        count = sum(bits)
        if best_obj is None or obj < best_obj or (obj == best_obj and count < sum(best_v)):
            best_v, best_obj = bits, obj
    return np.array(best_v, dtype=np.int8)


class TestSelectWeak:
    def test_huge_lambda_admits_everything(self):
        losses = np.array([0.1, 5.0, 100.0])
        np.testing.assert_array_equal(select_weak(losses, 1e9, 1.0), [1, 1, 1])

    def test_threshold_example_with_strict_tie_exclusion(self):
        losses = np.array([0.05, 0.2, 0.09, 0.31, 0.10])
        np.testing.assert_array_equal(select_weak(losses, 1.0, 10.0), [1, 0, 1, 0, 0])

    def test_matches_enumeration_on_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = rng.integers(1, 9)
            losses = rng.uniform(0, 2, n)
            lam = rng.uniform(0.01, 2.5)
            alpha = rng.uniform(0.1, 10)
            np.testing.assert_array_equal(
                select_weak(losses, lam, alpha), brute_force_selection(losses, lam, alpha)
            )

    def test_exact_ties_excluded(self):
        losses = np.array([0.5, 0.49999, 0.50001])
        np.testing.assert_array_equal(select_weak(losses, 0.5, 1.0), [0, 1, 0])

    def test_selection_monotone_in_lambda(self):
        rng = np.random.default_rng(1)
        losses = rng.uniform(0, 2, 50)
        sizes = [select_weak(losses, lam, 1.0).sum() for lam in np.linspace(0.1, 2.5, 12)]
        assert sizes == sorted(sizes)

    def test_nonpositive_alpha_rejected(self):
        with pytest.raises(ValueError, match="alpha"):
            select_weak(np.array([0.1]), 1.0, 0.0)


def _dual_setup(seed=0, vocab_size=12, d=5, L=2):
    cfg = NetworkConfig("avgemb", vocab_size, d, 4, L)
    params = init_params(cfg, np.random.default_rng(seed), dual=True)
    return cfg, params


def _batch(rng, cfg, n, T=6):
    ids = rng.integers(2, cfg.vocab_size, (n, T))
    lengths = rng.integers(1, T + 1, n)
    for i in range(n):
        ids[i, lengths[i]:] = 0
    targets = np.eye(cfg.num_classes)[rng.integers(0, cfg.num_classes, n)]
    return ids, lengths, targets


class TestDualLoss:
    def test_alpha_zero_equals_clean_only(self):
        cfg, params = _dual_setup()
        rng = np.random.default_rng(2)
        clean = _batch(rng, cfg, 4)
        weak = _batch(rng, cfg, 4)
        zero_grads(params)
        with_weak = dual_loss(cfg, params, clean, weak, alpha=0.0)
        zero_grads(params)
        clean_only = dual_loss(cfg, params, clean, None, alpha=0.0)
        assert with_weak == pytest.approx(clean_only, rel=1e-12)

    def test_hand_summed_one_plus_one(self):
        cfg, params = _dual_setup(seed=5)
        rng = np.random.default_rng(3)
        clean = _batch(rng, cfg, 1)
        weak = _batch(rng, cfg, 1)

        def head_ce(ids, lengths, targets, head):
            emb = params["embedding"].value[ids[0, : lengths[0]]].mean(axis=0)
            logits = emb @ params[f"{head}_w"].value + params[f"{head}_b"].value
            return -np.log(softmax(logits)[targets[0].argmax()])

        expected = head_ce(*clean, "head_clean") + 1.0 * head_ce(*weak, "head_weak")
        zero_grads(params)
        assert dual_loss(cfg, params, clean, weak, alpha=1.0) == pytest.approx(expected, rel=1e-10)

    def test_gradient_routing_between_heads(self):
        cfg, params = _dual_setup(seed=7)
        rng = np.random.default_rng(4)
        clean = _batch(rng, cfg, 3)
        weak = _batch(rng, cfg, 3)
        zero_grads(params)
        dual_loss(cfg, params, clean, None, alpha=1.0)
        assert np.all(params["head_weak_w"].grad == 0.0)
        assert np.any(params["head_clean_w"].grad != 0.0)
        zero_grads(params)
        dual_loss(cfg, params, clean, weak, alpha=1.0)
        assert np.any(params["head_weak_w"].grad != 0.0)
        assert np.any(params["embedding"].grad != 0.0)

    def test_perfect_heads_give_zero_loss(self):
        cfg, params = _dual_setup(seed=8)
        ids = np.array([[2, 0, 0]])
        lengths = np.array([1])
        emb = params["embedding"].value[2]
        for head in ("head_clean", "head_weak"):
            params[f"{head}_w"].value[...] = 0.0
            params[f"{head}_b"].value[...] = [500.0, -500.0]
        target = np.array([[1.0, 0.0]])
        zero_grads(params)
        loss = dual_loss(cfg, params, (ids, lengths, target), (ids, lengths, target), 1.0)
        assert loss == pytest.approx(0.0, abs=1e-12)


class TestHeadIsolation:
    def test_predictions_invariant_to_weak_head(self):
        X, y, Xw, yw = _toy_dual_data()
        model = _fit_dual(seed=3)
        before = model.predict_proba(X)
        model.params_["head_weak_w"].value += 123.0
        model.params_["head_weak_b"].value -= 7.0
        np.testing.assert_array_equal(model.predict_proba(X), before)

    def test_weak_head_invariant_to_clean_head(self):
        from mailintent.network import predict_proba as net_predict

        model = _fit_dual(seed=4)
        ids, lengths = encode_texts(["alpha beta"], model.vocab_, model.max_len)
        before = net_predict(model.net_, model.params_, ids, lengths, head="head_weak")
        model.params_["head_clean_w"].value += 55.0
        after = net_predict(model.net_, model.params_, ids, lengths, head="head_weak")
        np.testing.assert_array_equal(before, after)

    def test_argmax_ties_break_to_lowest_index(self):
        model = _fit_dual(seed=5)
        for name in ("head_clean_w", "head_clean_b"):
            model.params_[name].value[...] = 0.0
        probs = model.predict_proba(["alpha beta"])
        np.testing.assert_allclose(probs[0], 0.5)
        assert model.predict(["alpha beta"])[0] == 0


def _toy_dual_data(n=24, seed=0):
    rng = np.random.default_rng(seed)
    X, y = [], []
    for _ in range(n):
        label = int(rng.random() < 0.5)
        X.append(("alpha " if label else "bravo ") + rng.choice(["x1", "x2", "x3"]))
        y.append(label)
    Xw, yw = [], []
    for _ in range(3 * n):
        label = int(rng.random() < 0.5)
        Xw.append(("alpha " if label else "bravo ") + rng.choice(["x1", "x2", "x3"]))
        yw.append(label if rng.random() < 0.8 else 1 - label)
    return X, np.array(y), Xw, np.array(yw)


def _fit_dual(seed=0, **kw):
    X, y, Xw, yw = _toy_dual_data()
    defaults = dict(
        embed_dim=8,
        warmup_epochs=2,
        lambda_schedule=(0.5, 1.0),
        epochs_per_stage=2,
        glc_epochs=3,
        batch_half_size=4,
        seed=seed,
    )
    defaults.update(kw)
    model = DualHeadClassifier(**defaults)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model.fit(X, y, X_weak=Xw, y_weak=yw)
    return model


class TestTrainSelfPaced:
    def _arrays(self, seed=0, n_clean=16, n_weak=32):
        cfg, params = _dual_setup(seed=seed)
        rng = np.random.default_rng(seed + 100)
        clean = _batch(rng, cfg, n_clean)
        weak = _batch(rng, cfg, n_weak)
        dev = _batch(rng, cfg, 10)
        dev = (dev[0], dev[1], dev[2].argmax(axis=1))
        sp = SelfPacedConfig(
            net=cfg, warmup_epochs=2, lambda_schedule=(0.4, 0.8), epochs_per_stage=2,
            batch_half_size=4, seed=seed,
        )
        return sp, params, clean, weak, dev

    def test_empty_clean_set_rejected(self):
        sp, params, clean, weak, dev = self._arrays()
        empty = (clean[0][:0], clean[1][:0], clean[2][:0])
        with pytest.raises(ValueError, match="non-empty clean"):
            train_self_paced(sp, params, empty, weak, dev)

    def test_empty_weak_set_warns_and_trains_clean_only(self):
        sp, params, clean, weak, dev = self._arrays()
        empty_weak = (weak[0][:0], weak[1][:0], weak[2][:0])
        with pytest.warns(UserWarning, match="empty"):
            _, log, state = train_self_paced(sp, params, clean, empty_weak, dev)
        assert all(r.selected == 0 for r in log)

    def test_nothing_selected_warns(self):
        sp, params, clean, weak, dev = self._arrays()
        tiny = SelfPacedConfig(
            net=sp.net, warmup_epochs=1, lambda_schedule=(1e-9,), epochs_per_stage=1,
            batch_half_size=4, seed=0,
        )
        with pytest.warns(UserWarning, match="no weak examples selected"):
            _, log, _ = train_self_paced(tiny, params, clean, weak, dev)
        assert log[0].selected == 0

    def test_saturated_schedule_selects_everything_each_stage(self):
        sp, params, clean, weak, dev = self._arrays()
        saturated = SelfPacedConfig(
            net=sp.net, warmup_epochs=1, lambda_schedule=(1e9, 2e9), epochs_per_stage=1,
            batch_half_size=4, seed=0,
        )
        _, log, state = train_self_paced(saturated, params, clean, weak, dev)
        assert [r.selected for r in log] == [32, 32]
        assert state.selected == 32

    def test_log_has_one_record_per_stage(self):
        sp, params, clean, weak, dev = self._arrays()
        _, log, _ = train_self_paced(sp, params, clean, weak, dev)
        assert [r.stage for r in log] == list(range(len(log)))
        for rec in log:
            assert set(rec.to_record()) == {"stage", "lambda", "selected", "train_loss", "dev_accuracy"}

    def test_deterministic_under_seed(self):
        results = []
        for _ in range(2):
            sp, params, clean, weak, dev = self._arrays(seed=6)
            best, _, _ = train_self_paced(sp, params, clean, weak, dev)
            results.append(best)
        a, b = results
        assert all(np.array_equal(a[k].value, b[k].value) for k in a)

    def test_alternation_never_increases_full_objective(self):
        # full-batch steps; the v-step is the exact subproblem minimizer, and
        # cold-start Adadelta steps are small enough to descend on this problem
        cfg, params = _dual_setup(seed=9)
        rng = np.random.default_rng(42)
        clean = _batch(rng, cfg, 8)
        weak = _batch(rng, cfg, 16)
        alpha, lam = 1.0, 0.8
        opt = AdadeltaState()
        n_weak = weak[0].shape[0]

        def objective(v):
            snapshot = copy_params(params)
            losses = per_example_losses(cfg, snapshot, weak[0], weak[1], weak[2], head="head_weak")
            clean_losses = per_example_losses(cfg, snapshot, clean[0], clean[1], clean[2], head="head_clean")
            return clean_losses.mean() + (alpha * v * losses - lam * v).sum() / n_weak

        v = select_weak(per_example_losses(cfg, params, weak[0], weak[1], weak[2], head="head_weak"), lam, alpha)
        current = objective(v)
        for _ in range(6):
            idx = np.flatnonzero(v)
            zero_grads(params)
            weak_batch = (weak[0][idx], weak[1][idx], weak[2][idx]) if idx.size else None
            dual_batch_loss(cfg, params, clean, weak_batch, alpha)
            adadelta_step(params, opt)
            losses = per_example_losses(cfg, params, weak[0], weak[1], weak[2], head="head_weak")
            v = select_weak(losses, lam, alpha)
            new = objective(v)
            assert new <= current + 1e-9
            current = new


class TestDualHeadClassifier:
    def test_empty_clean_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            DualHeadClassifier().fit([], [], X_weak=["a"], y_weak=[0])

    def test_fit_predict_roundtrip(self):
        model = _fit_dual(seed=1)
        X, y, _, _ = _toy_dual_data()
        assert model.predict(X).shape == (len(X),)
        assert model.accuracy(X, y) > 0.5

    def test_corruption_matrix_recorded(self):
        model = _fit_dual(seed=2)
        assert model.corruption_ is not None
        np.testing.assert_allclose(model.corruption_.matrix.sum(axis=1), 1.0, atol=1e-6)

    def test_no_label_correction_uses_raw_targets(self):
        model = _fit_dual(seed=2, use_label_correction=False)
        assert model.corruption_ is None
        assert set(np.unique(model.corrected_targets_)) <= {0.0, 1.0}

    def test_deterministic_fit(self):
        a = _fit_dual(seed=11)
        b = _fit_dual(seed=11)
        assert all(np.array_equal(a.params_[k].value, b.params_[k].value) for k in a.params_)

    def test_get_params_round_trip(self):
        from sklearn.base import clone

        model = DualHeadClassifier(alpha=2.5, lambda_schedule=(0.1, 0.2))
        twin = clone(model)
        assert twin.get_params()["alpha"] == 2.5
        assert twin.get_params()["lambda_schedule"] == (0.1, 0.2)

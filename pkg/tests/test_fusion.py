import importlib

import numpy as np
import pytest

from ccafuse.cca import fit_cca
from ccafuse.cca2d import fit_2dcca
from ccafuse.errors import DimensionError, ParameterError, SingularityError, TrainingError
from ccafuse.fusion import (
    FeatureNet,
    Mode,
    NetConfig,
    TrainSchedule,
    TwoViewDataset,
    batch_loss,
    corrupt_view,
    evaluate,
    forward,
    make_synthetic_twoview,
    make_synthetic_twoview_2d,
    network_gradcheck,
    population_correlations,
    softmax_cross_entropy,
    train,
)
from ccafuse.fusion.data import _class_centers

SMALL = NetConfig(hidden=(5,), classifier_hidden=6, channels=2)


def small_vector_data(seed=0, n=120):
    return make_synthetic_twoview(n, 2, 3, 0.3, 0.3, seed, dim_a=4, dim_b=5)


def small_matrix_data(seed=0, n=80):
    return make_synthetic_twoview_2d(n, (2, 2), 3, 0.3, 0.3, seed, shape_a=(5, 4), shape_b=(4, 3))


def _schedule(mode, **kw):
    base = dict(mode=mode, epochs=3, cca_first_m=2, cca_freq_t=1, k=2, d1=2, d2=2, batch_size=16, seed=3)
    base.update(kw)
    return TrainSchedule(**base)


class TestData:
    def test_noiseless_views_fully_correlated(self):
        d = make_synthetic_twoview(300, 3, 3, 0.0, 0.0, 1)
        # both views are rank-3 linear images of z; a tiny ridge keeps the 16x16 covariance invertible
        c = fit_cca(d.view_a, d.view_b, 3, 1e-10).correlations
        np.testing.assert_allclose(c, 1.0, atol=1e-6)

    def test_seeded(self):
        a = make_synthetic_twoview(50, 2, 2, 0.1, 0.2, 9)
        b = make_synthetic_twoview(50, 2, 2, 0.1, 0.2, 9)
        np.testing.assert_array_equal(a.view_a, b.view_a)
        np.testing.assert_array_equal(a.view_b, b.view_b)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_heavy_noise_matches_population_value(self):
        d = make_synthetic_twoview(2000, 2, 2, 0.1, 10.0, 4)
        centers = _class_centers(np.random.default_rng(4), 2, 2, 2.0)
        cm = centers - centers.mean(axis=0)
        rho = population_correlations(cm.T @ cm / 2 + 0.25 * np.eye(2), 0.1, 10.0)
        top = fit_cca(d.view_a, d.view_b, 1).correlations[0]
        assert rho[0] < 0.5
        assert top < 0.5
        assert abs(top - rho[0]) < 0.05

    def test_population_formula_closed_form(self):
        # one latent direction of variance 1, gain 4 on both views, unit noise: rho = 4 / 5
        rho = population_correlations(np.array([[1.0]]), 1.0, 1.0, dim_a=4, dim_b=4)
        assert rho[0] == pytest.approx(0.8, abs=1e-15)

    def test_balanced_labels(self):
        d = make_synthetic_twoview(103, 2, 4, 0.1, 0.1, 0)
        counts = np.bincount(d.labels)
        assert counts.max() - counts.min() <= 1

    def test_invalid_counts(self):
        with pytest.raises(ParameterError):
            make_synthetic_twoview(2, 2, 3, 0.1, 0.1, 0)
        with pytest.raises(ParameterError):
            make_synthetic_twoview(20, 2, 3, -0.1, 0.1, 0)
        with pytest.raises(ParameterError):
            make_synthetic_twoview(20, 8, 3, 0.1, 0.1, 0, dim_a=4)

    def test_matrix_views(self):
        d = small_matrix_data()
        assert d.is_matrix and d.view_a.shape == (80, 5, 4) and d.view_b.shape == (80, 4, 3)

    def test_dataset_checks(self):
        with pytest.raises(DimensionError):
            TwoViewDataset(np.zeros((3, 2)), np.zeros((4, 2)), np.zeros(3, dtype=int), 2)
        with pytest.raises(ParameterError):
            TwoViewDataset(np.zeros((3, 2)), np.zeros((3, 2)), np.array([0, 1, 2]), 2)


class TestCorruptView:
    def test_zero_sigma_identity(self):
        d = small_vector_data()
        c = corrupt_view(d, "B", 0.0, 5)
        np.testing.assert_array_equal(c.view_a, d.view_a)
        np.testing.assert_array_equal(c.view_b, d.view_b)

    def test_seeded(self):
        d = small_vector_data()
        np.testing.assert_array_equal(corrupt_view(d, "A", 1.0, 2).view_a, corrupt_view(d, "A", 1.0, 2).view_a)

    def test_only_one_view(self):
        d = small_vector_data()
        c = corrupt_view(d, "A", 1.0, 2)
        np.testing.assert_array_equal(c.view_b, d.view_b)
        assert not np.array_equal(c.view_a, d.view_a)

    def test_variance_doubles(self):
        r = np.random.default_rng(0)
        n = 5000
        b = r.normal(size=(n, 6))
        b = (b - b.mean(0)) / b.std(0, ddof=1)
        d = TwoViewDataset(np.zeros((n, 1)), b, np.zeros(n, dtype=int), 1)
        var = corrupt_view(d, "B", 1.0, 1).view_b.var(axis=0, ddof=1)
        np.testing.assert_allclose(var, 2.0, rtol=0.05)

    def test_bad_arguments(self):
        d = small_vector_data()
        with pytest.raises(ParameterError):
            corrupt_view(d, "C", 1.0, 0)
        with pytest.raises(ParameterError):
            corrupt_view(d, "A", -1.0, 0)


class TestForward:
    def test_zero_classifier_gives_log_classes(self):
        d = make_synthetic_twoview(30, 2, 3, 0.1, 0.1, 0)
        single = TwoViewDataset(d.view_a, d.view_b, np.zeros(30, dtype=int), 3)
        net = FeatureNet.init(SMALL, (16,), (16,), 3, np.random.default_rng(0), k=2)
        net.params["c.W2"][:] = 0.0
        net.params["c.b2"][:] = 0.0
        loss, _ = batch_loss(net, TrainSchedule(k=2), single.view_a, single.view_b, single.labels, False)
        assert loss == pytest.approx(np.log(3), abs=1e-15)

    def test_baseline_equals_accar_before_replacement(self):
        d = small_vector_data()
        net = FeatureNet.init(SMALL, (4,), (5,), 3, np.random.default_rng(1), k=2)
        lb, _ = forward(net, _schedule(Mode.BASELINE), d.view_a, d.view_b)
        la, _ = forward(net, _schedule(Mode.ACCAR), d.view_a, d.view_b)
        np.testing.assert_array_equal(lb, la)

    def test_shapes(self):
        d = small_matrix_data()
        net = FeatureNet.init(SMALL, (5, 4), (4, 3), 3, np.random.default_rng(1), d1=2, d2=2)
        logits, cache = net.forward(d.view_a[:7], d.view_b[:7])
        assert logits.shape == (7, 3) and cache["pa"].shape == (7, 2, 2)

    def test_batch_shape_mismatch(self):
        d = small_vector_data()
        net = FeatureNet.init(SMALL, (4,), (5,), 3, np.random.default_rng(1), k=2)
        with pytest.raises(DimensionError):
            net.forward(d.view_b, d.view_a)

    @pytest.mark.parametrize("n", [2, 3])
    def test_cca_layer_small_batch(self, n):
        d = small_vector_data()
        net = FeatureNet.init(SMALL, (4,), (5,), 3, np.random.default_rng(1), k=2)
        with pytest.raises(SingularityError):
            forward(net, _schedule(Mode.CCA_LAYER), d.view_a[:n], d.view_b[:n])

    def test_cca_layer_projection_is_batch_cca(self):
        d = small_vector_data()
        net = FeatureNet.init(SMALL, (4,), (5,), 3, np.random.default_rng(1), k=2)
        _, cache = forward(net, _schedule(Mode.CCA_LAYER), d.view_a[:20], d.view_b[:20])
        ha = net.features(d.view_a[:20], "a")
        m = fit_cca(ha, net.features(d.view_b[:20], "b"), 2)
        np.testing.assert_array_equal(cache["pa"], (ha - m.mean_x) @ m.u)

    def test_softmax_cross_entropy_gradient(self):
        r = np.random.default_rng(2)
        logits = r.normal(size=(5, 4))
        labels = np.array([0, 3, 1, 1, 2])
        _, g = softmax_cross_entropy(logits, labels)
        h = 1e-6
        fd = np.zeros_like(logits)
        for i in range(5):
            for j in range(4):
                e = np.zeros_like(logits)
                e[i, j] = h
                fd[i, j] = (softmax_cross_entropy(logits + e, labels)[0] - softmax_cross_entropy(logits - e, labels)[0]) / (2 * h)
        np.testing.assert_allclose(g, fd, atol=1e-9)


class TestGradients:
    @pytest.mark.parametrize("mode", [Mode.BASELINE, Mode.CCAR, Mode.ACCAR])
    def test_vector_modes(self, mode):
        d = small_vector_data(seed=5)
        sched = _schedule(mode, lambda_corr=0.7)
        net = FeatureNet.init(SMALL, (4,), (5,), 3, np.random.default_rng(7), k=2)
        assert network_gradcheck(net, sched, d.view_a[:16], d.view_b[:16], d.labels[:16]) <= 1e-4

    def test_matrix_mode(self):
        d = small_matrix_data(seed=5)
        sched = _schedule(Mode.ACCAR_2D)
        net = FeatureNet.init(SMALL, (5, 4), (4, 3), 3, np.random.default_rng(7), d1=2, d2=2)
        assert network_gradcheck(net, sched, d.view_a[:16], d.view_b[:16], d.labels[:16]) <= 1e-4

    def test_ccar_on_matrix_projections(self):
        d = small_matrix_data(seed=6)
        sched = _schedule(Mode.CCAR, lambda_corr=0.4)
        net = FeatureNet.init(SMALL, (5, 4), (4, 3), 3, np.random.default_rng(8), d1=2, d2=2)
        assert network_gradcheck(net, sched, d.view_a[:16], d.view_b[:16], d.labels[:16]) <= 1e-4


class TestTrain:
    def test_accar_replacement_is_exact(self):
        d = small_vector_data(n=100)
        sched = _schedule(Mode.ACCAR, epochs=3, cca_first_m=3, learning_rate=0.0)
        seen = []

        def check(stage, epoch, net):
            if stage != "start":
                return
            m = fit_cca(net.features(d.view_a, "a"), net.features(d.view_b, "b"), 2, sched.reg_epsilon)
            assert np.array_equal(net.params["a.Wp"], m.u) and np.array_equal(net.params["b.Wp"], m.v)
            assert np.array_equal(net.params["a.bp"], -(m.mean_x @ m.u))
            seen.append(epoch)

        _, logs = train(d, SMALL, sched, callback=check)
        assert seen == [0, 1, 2]
        assert all(log.cca_replaced for log in logs)

    def test_accar_2d_replacement_is_exact(self):
        d = small_matrix_data()
        sched = _schedule(Mode.ACCAR_2D, epochs=2, cca_first_m=2, learning_rate=0.0)

        def check(stage, epoch, net):
            if stage != "start":
                return
            m = fit_2dcca(
                net.features(d.view_a, "a"), net.features(d.view_b, "b"), 2, 2,
                max_iters=sched.cca2d_max_iters, reg_epsilon=sched.reg_epsilon,
            )
            for name, val in (("a.L", m.lx), ("a.R", m.rx), ("b.L", m.ly), ("b.R", m.ry)):
                assert np.array_equal(net.params[name], val)

        train(d, SMALL, sched, callback=check)

    def test_replacement_epochs(self):
        d = small_vector_data(n=64)
        sched = _schedule(Mode.ACCAR, epochs=9, cca_first_m=7, cca_freq_t=3)
        _, logs = train(d, SMALL, sched)
        assert [log.epoch for log in logs if log.cca_replaced] == [0, 3, 6]

    def test_baseline_never_replaces(self):
        _, logs = train(small_vector_data(n=64), SMALL, _schedule(Mode.BASELINE, cca_first_m=3))
        assert not any(log.cca_replaced for log in logs)

    def test_separable_baseline_fits(self):
        d = make_synthetic_twoview(400, 2, 2, 0.0, 0.0, 0)
        sched = TrainSchedule(epochs=200, cca_first_m=0, batch_size=32, seed=1)
        net, logs = train(d, NetConfig(hidden=(16,), classifier_hidden=16), sched)
        assert evaluate(net, sched, d) >= 0.99
        assert logs[-1].val_accuracy >= 0.99

    def test_ccar_zero_lambda_is_baseline(self):
        d = small_vector_data()
        _, base = train(d, SMALL, _schedule(Mode.BASELINE, epochs=4))
        _, ccar = train(d, SMALL, _schedule(Mode.CCAR, epochs=4, lambda_corr=0.0))
        assert [e.train_loss for e in base] == [e.train_loss for e in ccar]

    def test_ccar_raises_projection_correlation(self):
        d = small_vector_data(n=240)
        _, base = train(d, SMALL, _schedule(Mode.BASELINE, epochs=10))
        _, ccar = train(d, SMALL, _schedule(Mode.CCAR, epochs=10, lambda_corr=1.0))
        assert ccar[-1].train_corr > base[-1].train_corr

    def test_deterministic(self):
        d = small_vector_data()
        _, a = train(d, SMALL, _schedule(Mode.ACCAR, epochs=3))
        _, b = train(d, SMALL, _schedule(Mode.ACCAR, epochs=3))
        assert a == b

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reports_epoch(self):
        d = small_vector_data()
        with pytest.raises(TrainingError) as info:
            train(d, SMALL, _schedule(Mode.BASELINE, learning_rate=1e200))
        assert info.value.epoch == 0

    def test_mode_must_fit_views(self):
        with pytest.raises(ParameterError):
            train(small_vector_data(), SMALL, _schedule(Mode.ACCAR_2D))
        with pytest.raises(ParameterError):
            train(small_matrix_data(), SMALL, _schedule(Mode.ACCAR))
        with pytest.raises(ParameterError):
            train(small_matrix_data(), SMALL, _schedule(Mode.CCA_LAYER))

    @pytest.mark.parametrize("mode", [Mode.BASELINE, Mode.CCAR])
    def test_plain_modes_run_on_matrix_views(self, mode):
        _, logs = train(small_matrix_data(), SMALL, _schedule(mode, epochs=2))
        assert len(logs) == 2 and not any(log.cca_replaced for log in logs)

    def test_cca_layer_trains(self):
        _, logs = train(small_vector_data(), SMALL, _schedule(Mode.CCA_LAYER, epochs=2))
        assert all(np.isfinite(log.train_loss) for log in logs)

    def test_short_remainder_skipped(self, monkeypatch):
        # 40 samples, batch 16: two batches per epoch, last 8 samples skipped
        tr = importlib.import_module("ccafuse.fusion.train")
        calls = []
        orig = tr.batch_loss

        def spy(net, schedule, xa, xb, labels, with_grads=True):
            calls.append(len(labels))
            return orig(net, schedule, xa, xb, labels, with_grads)

        monkeypatch.setattr(tr, "batch_loss", spy)
        train(small_vector_data(n=40), SMALL, _schedule(Mode.BASELINE, epochs=1, cca_first_m=0))
        assert calls == [16, 16]


class TestSchedule:
    @pytest.mark.parametrize(
        "kw",
        [
            dict(epochs=5, cca_first_m=6),
            dict(cca_freq_t=0),
            dict(lambda_corr=-1.0),
            dict(batch_size=0),
            dict(learning_rate=-0.1),
            dict(k=0),
            dict(reg_epsilon=-1e-3),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ParameterError):
            TrainSchedule(**kw)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            TrainSchedule(mode="ADAM")

    def test_dict_round_trip(self):
        s = _schedule(Mode.CCAR, lambda_corr=0.3)
        assert TrainSchedule.from_dict(s.as_dict()) == s


class TestEvaluate:
    def test_perfect_predictor(self):
        n_classes = 4
        labels = np.arange(40) % n_classes
        onehot = np.eye(n_classes)[labels]
        d = TwoViewDataset(onehot, np.zeros((40, 2)), labels, n_classes)
        cfg = NetConfig(hidden=(), classifier_hidden=n_classes)
        net = FeatureNet.init(cfg, (n_classes,), (2,), n_classes, np.random.default_rng(0), k=n_classes)
        p = net.params
        p["a.Wp"] = np.eye(n_classes)
        p["b.Wp"][:] = 0.0
        p["c.W1"] = np.vstack([np.eye(n_classes), np.zeros((n_classes, n_classes))])
        p["c.W2"] = np.eye(n_classes)
        assert evaluate(net, TrainSchedule(k=n_classes), d) == 1.0

    def test_random_labels_chance(self):
        r = np.random.default_rng(0)
        n = 10000
        d = TwoViewDataset(r.normal(size=(n, 4)), r.normal(size=(n, 4)), r.integers(0, 4, n), 4)
        net = FeatureNet.init(SMALL, (4,), (4,), 4, np.random.default_rng(1), k=2)
        assert abs(evaluate(net, TrainSchedule(k=2), d) - 0.25) <= 0.02

    def test_zero_classifier_predicts_class_zero(self):
        d = small_vector_data(n=90)
        net = FeatureNet.init(SMALL, (4,), (5,), 3, np.random.default_rng(1), k=2)
        net.params["c.W2"][:] = 0.0
        net.params["c.b2"][:] = 0.0
        assert evaluate(net, TrainSchedule(k=2), d) == np.mean(d.labels == 0)

    def test_empty(self):
        d = small_vector_data()
        net = FeatureNet.init(SMALL, (4,), (5,), 3, np.random.default_rng(1), k=2)
        with pytest.raises(ParameterError):
            evaluate(net, TrainSchedule(k=2), d.subset(np.array([], dtype=int)))

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stdense.errors import ParameterError, TrainingError
from stdense.estimator import (
    ArchSpec,
    TrainConfig,
    empirical_weights,
    fit,
    predict_truncated,
    rate_exponent,
    residual_sigma,
    size_architecture,
    weighted_objective,
)
from stdense.net import DenseNet, backward, forward_batch
from stdense.panel import PanelDataset
from stdense.synth import NoiseScales, generate_panel


def linear_panel(n=20, m=5, seed=0):
    x = np.random.default_rng(seed).random((n * m, 1))
    return PanelDataset([m] * n, x, 2 * x[:, 0] - 0.5, 2 * x[:, 0] - 0.5)


class TestSizing:
    def test_wide_example(self):
        # nm = 10^4, p = 1, K = 2: exponent 1/4, r = 10, L = round(ln 10^4) = 9
        a = size_architecture(100, 100, p=1, K=2)
        assert (a.L, a.r) == (9, 10)

    def test_deep_example(self):
        a = size_architecture(100, 100, p=1, K=2, case="deep", c_r=3)
        assert a.r == 3
        assert a.L == round(math.log(1e4) * 10)

    def test_depth_floor(self):
        assert size_architecture(1, math.e, p=2, K=1).L == 1

    def test_threshold(self):
        a = size_architecture(1, math.e**4, sigma_eps=1.0, sigma_gamma=0.5)
        assert a.A == pytest.approx(2.0, rel=1e-12)
        b = size_architecture(1, math.e**4, sigma_eps=0.5, sigma_gamma=1.5, c_A=2)
        assert b.A == pytest.approx(6.0, rel=1e-12)

    def test_rate_exponent(self):
        assert rate_exponent(2, 2) == pytest.approx(1 / 6)

    def test_worst_pair_is_used(self):
        a = size_architecture(100, 100, pairs=[(2, 1), (1, 2), (3, 3)])
        assert (a.smoothness_p, a.order_K) == (1.0, 2)

    @pytest.mark.parametrize(
        "kwargs", [{"case": "square"}, {"p": 0.5}, {"K": 0}, {"sigma_eps": 0.0, "sigma_gamma": 0.0}]
    )
    def test_bad_arguments(self, kwargs):
        with pytest.raises(ParameterError):
            size_architecture(100, 10, **kwargs)

    def test_tiny_sample(self):
        with pytest.raises(ParameterError):
            size_architecture(1, 1)

    @settings(max_examples=100)
    @given(st.integers(2, 10**5), st.integers(2, 10**5), st.floats(1, 5), st.integers(1, 6))
    def test_monotone_in_sample_size(self, a, b, p, K):
        lo, hi = sorted((a, b))
        wide = [size_architecture(v, 1.0, p, K) for v in (lo, hi)]
        assert wide[0].L <= wide[1].L and wide[0].r <= wide[1].r
        deep = [size_architecture(v, 1.0, p, K, case="deep", c_r=4) for v in (lo, hi)]
        assert deep[0].L <= deep[1].L and deep[0].r == deep[1].r == 4

    @settings(max_examples=100)
    @given(st.floats(10, 1e6), st.floats(1, 5), st.integers(1, 6))
    def test_width_scales_with_rate(self, nm, p, K):
        # quadrupling c_r quadruples the unrounded width
        base = size_architecture(nm, 1.0, p, K, c_r=1.0).r
        big = size_architecture(nm, 1.0, p, K, c_r=4.0).r
        assert abs(big - 4 * nm ** rate_exponent(p, K)) <= 0.5
        assert abs(base - nm ** rate_exponent(p, K)) <= 0.5


class TestObjective:
    def test_empirical_weights(self):
        w = empirical_weights([2, 1])
        np.testing.assert_allclose(np.concatenate(w), [0.25, 0.25, 0.5])

    def test_objective_matches_backward_loss(self, rng):
        p = generate_panel(2, 2, 8, seed=1)
        net = DenseNet.he_init(2, 2, 5, rng)
        w = np.concatenate(empirical_weights(p.group_sizes))
        _, loss = backward(net, p.x, p.y, w)
        assert weighted_objective(net, p) == pytest.approx(loss, abs=1e-10)

    def test_objective_zero_network(self):
        p = PanelDataset([2, 1], np.zeros((3, 1)), [1.0, 3.0, 2.0])
        assert weighted_objective(DenseNet(1, 1, 2), p) == pytest.approx(0.5 * (5.0 + 4.0))


class TestFit:
    def test_zero_network_is_stationary(self):
        p = PanelDataset([3, 3], np.random.default_rng(0).random((6, 2)), np.zeros(6))
        net, trace = fit(p, ArchSpec("wide", 2, 3, 1.0, 2.0, 2), TrainConfig(epochs=5), init=DenseNet(2, 2, 3))
        assert not any(np.any(w) for w in net.weights)
        assert np.all(trace.objectives == 0.0)

    def test_init_not_mutated(self, rng):
        init = DenseNet.he_init(1, 1, 4, rng)
        before = init.copy()
        fit(linear_panel(), ArchSpec("wide", 1, 4, 2.0, 2.0, 1), TrainConfig(epochs=3), init=init)
        np.testing.assert_array_equal(init.weights[0], before.weights[0])

    def test_learns_a_line(self):
        cfg = TrainConfig(epochs=2000, batch_size=0, lr=0.05, momentum=0.9, lr_decay=1.0)
        net, trace = fit(linear_panel(), ArchSpec("wide", 1, 8, 3.0, 2.0, 1), cfg)
        assert trace.objectives[-1] <= 1e-3

    def test_full_batch_descent_is_monotone(self):
        p = generate_panel(2, 2, 8, seed=3)
        cfg = TrainConfig(epochs=200, batch_size=0, lr=1e-3, momentum=0.0, lr_decay=1.0)
        _, trace = fit(p, ArchSpec("wide", 2, 6, 3.0, 2.0, 2), cfg)
        assert np.all(np.diff(trace.objectives) <= 1e-12)

    def test_trace_rows(self, tmp_path):
        cfg = TrainConfig(epochs=4, lr_decay=0.5, decay_every=2)
        _, trace = fit(linear_panel(), ArchSpec("wide", 1, 3, 2.0, 2.0, 1), cfg)
        assert [r.epoch for r in trace.rows] == [0, 1, 2, 3, 4]
        assert [r.lr for r in trace.rows[1:]] == [0.01, 0.01, 0.005, 0.005]
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        trace.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,objective,learning_rate"
        assert len(lines) == 11

    def test_deterministic(self):
        p = generate_panel(2, 2, 8, seed=3)
        arch = ArchSpec("wide", 2, 4, 3.0, 2.0, 2)
        a, ta = fit(p, arch, TrainConfig(epochs=5, seed=9))
        b, tb = fit(p, arch, TrainConfig(epochs=5, seed=9))
        np.testing.assert_array_equal(ta.objectives, tb.objectives)
        for u, v in zip(a.weights, b.weights):
            np.testing.assert_array_equal(u, v)

    def test_early_stopping_returns_best(self):
        p = generate_panel(2, 2, 40, seed=1)
        cfg = TrainConfig(epochs=30, patience=3, seed=2)
        net, trace = fit(p, ArchSpec("wide", 2, 6, 3.0, 2.0, 2), cfg)
        vals = [r.val_objective for r in trace.rows]
        assert all(v is not None for v in vals)
        assert trace.rows[trace.best_epoch].val_objective == min(vals)

    def test_divergence_is_reported(self):
        p = generate_panel(2, 2, 8, noise=NoiseScales(0, 0), seed=1)
        cfg = TrainConfig(epochs=50, lr=1e6, batch_size=0, momentum=0.0)
        with np.errstate(all="ignore"), pytest.raises(TrainingError) as info:
            fit(p, ArchSpec("wide", 3, 8, 3.0, 2.0, 2), cfg)
        assert info.value.epoch >= 1

    def test_architecture_mismatch(self):
        with pytest.raises(ParameterError):
            fit(linear_panel(), ArchSpec("wide", 2, 3, 1.0, 2.0, 1), init=DenseNet(1, 1, 3))


class TestPrediction:
    def test_truncation_bound(self, rng):
        net = DenseNet.he_init(3, 2, 8, rng)
        net.weights[-1] *= 100
        out = predict_truncated(net, 0.5, rng.random((200, 3)))
        assert np.all(np.abs(out) <= 0.5)

    def test_scalar_and_vector_agree(self, rng):
        net = DenseNet.he_init(2, 1, 4, rng)
        X = rng.random((5, 2))
        np.testing.assert_allclose(predict_truncated(net, 1.0, X), [predict_truncated(net, 1.0, x) for x in X], rtol=0, atol=1e-14)

    def test_residual_sigma(self):
        p = PanelDataset([2], np.zeros((2, 1)), [3.0, 4.0])
        assert residual_sigma(DenseNet(1, 1, 1), p) == pytest.approx(math.sqrt(12.5))

    def test_fitted_scenario_error(self):
        p = generate_panel(2, 2, 100, seed=0)
        arch = size_architecture(p.n, 15.7, c_L=0.35, c_r=6, c_A=2)
        net, _ = fit(p, arch, TrainConfig(epochs=60))
        err = np.mean((predict_truncated(net, arch.A, p.x) - p.f_true) ** 2)
        assert err < 0.05 * np.mean(p.f_true**2)

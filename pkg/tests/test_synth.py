import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stdense.errors import ParameterError
from stdense.metrics import harmonic_mean
from stdense.scenarios import evaluate
from stdense.synth import (
    BASIS_SIZE,
    NoiseScales,
    SpatialNoiseState,
    basis_matrix,
    embed_manifold,
    eval_basis,
    generate_panel,
    group_sizes,
    manifold_designs,
    measurement_errors,
    noise_levels,
    sample_designs,
    spatial_noise_path,
    spatial_noise_step,
)


class TestGroupSizes:
    def test_quarters(self):
        np.testing.assert_array_equal(group_sizes(8), [16, 16, 24, 24, 20, 20, 10, 10])

    def test_multiplier(self):
        np.testing.assert_array_equal(group_sizes(4, 3), [48, 72, 60, 30])
        np.testing.assert_array_equal(group_sizes(8, 2), [32, 32, 48, 48, 40, 40, 20, 20])

    def test_harmonic_mean_constant(self):
        # 4 / (1/16 + 1/24 + 1/20 + 1/10) = 960/61
        assert harmonic_mean(group_sizes(400)) == pytest.approx(960 / 61, rel=1e-15)

    @pytest.mark.parametrize("n", [0, 3, 7, 10])
    def test_bad_n(self, n):
        with pytest.raises(ParameterError):
            group_sizes(n)


class TestDesigns:
    def test_fresh_when_phi_zero(self, rng):
        x = sample_designs([50] * 20, 2, 0.0, rng).reshape(20, 50, 2)
        assert not np.any(np.all(x[1:] == x[:-1], axis=2))

    def test_frozen_when_phi_one(self, rng):
        x = sample_designs([30] * 10, 3, 1.0, rng).reshape(10, 30, 3)
        assert np.all(x == x[0])

    def test_stick_frequency(self, rng):
        x = sample_designs([100] * 1001, 2, 0.1, rng).reshape(1001, 100, 2)
        freq = np.mean(np.all(x[1:] == x[:-1], axis=2))
        assert abs(freq - 0.1) <= 0.01

    def test_positions_without_predecessor_are_fresh(self, rng):
        x = sample_designs([2, 5], 2, 1.0, rng)
        np.testing.assert_array_equal(x[2:4], x[0:2])
        prev = {tuple(p) for p in x[:2]}
        assert all(tuple(p) not in prev for p in x[4:])

    def test_bounds_and_shape(self, rng):
        x = sample_designs([3, 4, 5], 4, 0.5, rng)
        assert x.shape == (12, 4)
        assert x.min() >= 0 and x.max() <= 1

    def test_bad_phi(self, rng):
        with pytest.raises(ParameterError):
            sample_designs([3], 2, 1.5, rng)


class TestSpatialNoise:
    def test_basis_value(self):
        assert eval_basis(1, [0.5]) == pytest.approx(0.225079079039276517, abs=1e-16)
        assert eval_basis(1, [0.5, 0.5]) == pytest.approx(0.0506605918211688857, abs=1e-16)

    def test_basis_zero_at_boundary(self):
        assert eval_basis(7, [0.0, 0.3]) == 0.0

    @pytest.mark.parametrize("t", [0, 26, 2.5])
    def test_basis_index(self, t):
        with pytest.raises(ParameterError):
            eval_basis(t, [0.5])

    def test_basis_matrix_matches_pointwise(self, rng):
        X = rng.random((4, 3))
        B = basis_matrix(X)
        assert B.shape == (4, BASIS_SIZE)
        for r in range(4):
            for t in range(1, BASIS_SIZE + 1):
                assert B[r, t - 1] == pytest.approx(eval_basis(t, X[r]), abs=1e-15)

    def test_step_recursion(self, rng):
        state = SpatialNoiseState(np.ones(BASIS_SIZE), scale=2.0)
        b = np.arange(BASIS_SIZE, dtype=float)
        new = spatial_noise_step(state, rng, innovations=b)
        t = np.arange(1, BASIS_SIZE + 1)
        np.testing.assert_allclose(new.coef, 0.5 + 2.0 * b / t, rtol=1e-15)
        assert new.i == 1
        np.testing.assert_array_equal(state.coef, np.ones(BASIS_SIZE))

    def test_noise_function_evaluation(self, rng):
        state = SpatialNoiseState(rng.normal(size=BASIS_SIZE))
        x = rng.random((1, 2))
        expected = sum(state.coef[t - 1] * eval_basis(t, x[0]) for t in range(1, BASIS_SIZE + 1))
        assert state(x)[0] == pytest.approx(expected, abs=1e-14)

    def test_stationary_variance(self, rng):
        c = spatial_noise_path(60_000, rng)
        t = np.arange(1, BASIS_SIZE + 1)
        # Var(c_t) = t^-2 / (1 - 0.5^2)
        ratio = c.var(axis=0) / ((4.0 / 3.0) * t**-2.0)
        assert np.all(np.abs(ratio - 1) <= 0.05)

    def test_lag_one_autocorrelation(self, rng):
        c = spatial_noise_path(60_000, rng)[:, 0]
        r = np.corrcoef(c[1:], c[:-1])[0, 1]
        assert abs(r - 0.5) <= 0.02


class TestMeasurementErrors:
    def test_first_row_is_innovation(self):
        e = measurement_errors([3], rng=np.random.default_rng(4))
        np.testing.assert_array_equal(e, np.random.default_rng(4).standard_normal(3))

    def test_truncated_rows_share_the_vector(self):
        e = measurement_errors([4, 2, 4], rho=0.3, rng=np.random.default_rng(1))
        xi = np.random.default_rng(1).standard_normal((3, 4))
        full = np.zeros(4)
        rows = []
        for k, m in enumerate([4, 2, 4]):
            full = 0.3 * full + xi[k]
            rows.append(full[:m])
        np.testing.assert_allclose(e, np.concatenate(rows), rtol=1e-15)

    def test_stationary_moments(self, rng):
        e = measurement_errors([5] * 60_000, sigma_xi=1.0, rng=rng).reshape(-1, 5)[100:]
        assert e.var() == pytest.approx(1.0 / 0.91, rel=0.05)
        r = np.corrcoef(e[1:].ravel(), e[:-1].ravel())[0, 1]
        assert abs(r - 0.3) <= 0.02
        # different positions at the same time are independent
        assert abs(np.corrcoef(e[:, 0], e[:, 1])[0, 1]) <= 0.02

    def test_max_size_check(self, rng):
        with pytest.raises(ParameterError):
            measurement_errors([5], rng=rng, max_size=3)


class TestManifold:
    def test_circle_and_padding(self, rng):
        x = embed_manifold(rng.random((500, 2)), 5)
        np.testing.assert_allclose((2 * x[:, 0] - 1) ** 2 + (2 * x[:, 1] - 1) ** 2, 1.0, atol=1e-12)
        assert np.all(x[:, 3:] == 0)
        assert x.min() >= 0 and x.max() <= 1

    def test_bi_lipschitz(self, rng):
        u, v = rng.random((2, 2000, 1))
        ratio = np.linalg.norm(embed_manifold(u, 3) - embed_manifold(v, 3), axis=1) / np.abs(u - v).ravel()
        assert ratio.min() >= 1 - 1e-9
        assert ratio.max() <= np.pi / 2 + 1e-9

    def test_dimension_checks(self, rng):
        with pytest.raises(ParameterError):
            manifold_designs([3], 2, 2, rng)
        with pytest.raises(ParameterError):
            embed_manifold(rng.random((3, 3)), 3)


class TestGeneratePanel:
    def test_noiseless_panel_is_exact(self):
        p = generate_panel(2, 3, 8, noise=NoiseScales(0.0, 0.0), seed=3)
        np.testing.assert_array_equal(p.y, p.f_true)
        np.testing.assert_array_equal(p.f_true, evaluate(2, p.x))

    def test_shape(self):
        p = generate_panel(4, 2, 12, m_mult=2, seed=1)
        np.testing.assert_array_equal(p.group_sizes, group_sizes(12, 2))
        assert p.x.shape == (int(group_sizes(12, 2).sum()), 2)

    def test_deterministic(self):
        a = generate_panel(3, 2, 8, seed=11)
        b = generate_panel(3, 2, 8, seed=11)
        c = generate_panel(3, 2, 8, seed=12)
        assert a.equals(b)
        assert not np.array_equal(a.y, c.y)

    def test_noise_is_centred(self):
        p = generate_panel(2, 2, 400, seed=5)
        resid = p.y - p.f_true
        # the time-level AR structure inflates the standard error; allow a generous band
        se = resid.std() / np.sqrt(p.n)
        assert abs(resid.mean()) <= 5 * se

    def test_manifold_panel(self):
        p = generate_panel(2, 4, 8, d_star=1, seed=2)
        np.testing.assert_array_equal(p.x[:, 2:], 0.0)

    def test_noise_levels(self):
        se, sg = noise_levels(NoiseScales(1.0, 2.0), 2)
        assert se == pytest.approx(2.0 / np.sqrt(0.91))
        t = np.arange(1, 26)
        assert sg == pytest.approx(np.sqrt(np.sum(1.0 / t**2) * 4 / 3) / (2 * np.pi**2))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**9), st.sampled_from([1, 2, 3, 4, 5, 6]), st.integers(2, 4))
def test_panels_stay_in_cube(seed, sid, d):
    p = generate_panel(sid, d, 4, seed=seed)
    assert p.x.min() >= 0 and p.x.max() <= 1
    assert np.all(np.isfinite(p.y))

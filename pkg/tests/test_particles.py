import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pffloc.particles import (Origin, ParticleSet, effective_sample_size, estimate_pose,
                              gaussian_density, make_particles, normalize_log_weights, normalize_weights,
                              resample, sample_measurement_particles, systematic_indices,
                              weight_measurement_log, weight_measurement_samples, weight_predictive)

PROPOSAL = np.diag([0.3, 0.3, 0.3, 0.1, 0.1, 0.1])


def _peak(cov):
    return 1.0 / ((2 * np.pi) ** 3 * math.sqrt(np.linalg.det(cov)))


def _naive_density(x, mean, cov):
    r = np.array(x, float) - mean
    for j in range(3, 6):
        r[j] = math.atan2(math.sin(r[j]), math.cos(r[j]))
    q = r @ np.linalg.solve(cov, r)
    return _peak(cov) * math.exp(-0.5 * q)


class TestPredictiveWeights:
    def test_mode_is_peak(self):
        cov = np.diag([0.1, 0.2, 0.3, 0.01, 0.02, 0.03])
        mu = np.array([1, 2, 3, 0.1, 0.2, 0.3])
        assert weight_predictive(mu, mu, cov)[0] == pytest.approx(_peak(cov), rel=1e-12)

    def test_offset_two_gives_exp_minus_one(self):
        x = np.array([1.0, 1.0, 0, 0, 0, 0])
        assert weight_predictive(x, np.zeros(6), np.eye(6))[0] == pytest.approx(_peak(np.eye(6)) * math.exp(-1))

    def test_decreases_with_mahalanobis_distance(self):
        cov = np.diag([0.3, 0.1, 0.2, 0.05, 0.05, 0.05])
        steps = np.linspace(0, 2, 20)[:, None] * np.array([1, -1, 0.5, 0.1, 0.1, -0.2])
        w = weight_predictive(steps, np.zeros(6), cov)
        assert np.all(np.diff(w) < 0)

    def test_angle_residual_is_wrapped(self):
        a = np.array([0, 0, 0, 0, 0, 3.1])
        b = np.array([0, 0, 0, 0, 0, -3.1])
        cov = np.eye(6) * 0.1
        assert weight_predictive(a, b, cov)[0] == pytest.approx(_naive_density(a, b, cov), rel=1e-10)


class TestMeasurementWeights:
    def test_single_kernel_peak(self):
        x = np.array([[0.5, 0.2, 0.1, 0.0, 0.1, 1.0]])
        assert weight_measurement_samples(x, x, PROPOSAL)[0] == pytest.approx(_peak(PROPOSAL), rel=1e-12)

    def test_far_tail(self):
        pred = np.zeros((5, 6))
        meas = np.array([[10 * math.sqrt(0.3), 0, 0, 0, 0, 0]])
        assert weight_measurement_samples(meas, pred, PROPOSAL)[0] < 1e-10 * _peak(PROPOSAL)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_double_loop(self, seed):
        rng = np.random.default_rng(seed)
        pred = np.column_stack([rng.normal(0, 0.5, (50, 3)), rng.uniform(-np.pi, np.pi, (50, 3))])
        meas = pred[rng.integers(0, 50, 20)] + rng.normal(0, 0.3, (20, 6))
        got = weight_measurement_samples(meas, pred, PROPOSAL)
        for i in range(20):
            ref = sum(_naive_density(meas[i], pred[j], PROPOSAL) for j in range(50)) / 50
            assert got[i] == pytest.approx(ref, rel=1e-12, abs=1e-300)

    def test_weighted_mixture_matches_loop(self):
        rng = np.random.default_rng(9)
        pred = rng.normal(0, 0.4, (30, 6))
        meas = rng.normal(0, 0.4, (10, 6))
        pw = rng.uniform(0.1, 1.0, 30)
        got = weight_measurement_samples(meas, pred, PROPOSAL, pw)
        pw = pw / pw.sum()
        for i in range(10):
            ref = sum(pw[j] * _naive_density(meas[i], pred[j], PROPOSAL) for j in range(30))
            assert got[i] == pytest.approx(ref, rel=1e-12)

    def test_log_form_survives_underflow(self):
        pred = np.zeros((3, 6))
        meas = np.array([[40.0, 0, 0, 0, 0, 0]])
        lw = weight_measurement_log(meas, pred, PROPOSAL)[0]
        expected = math.log(_peak(PROPOSAL)) - 0.5 * 40.0 ** 2 / 0.3
        assert lw == pytest.approx(expected, rel=1e-9)


class TestSampling:
    def test_zero_covariance_limit(self, rng):
        x = np.array([1, 2, 3, 0.1, 0.2, 0.3])
        ps = sample_measurement_particles(x, np.eye(6) * 1e-20, 100, rng)
        assert np.allclose(ps.poses, x, atol=1e-8)
        assert np.all(ps.origin == Origin.MEASUREMENT)
        assert ps.weights.sum() == pytest.approx(1.0)

    def test_identity_covariance(self, rng):
        ps = sample_measurement_particles(np.zeros(6), np.eye(6), 100_000, rng)
        C = np.cov(ps.poses.T)
        assert np.linalg.norm(C - np.eye(6)) / np.linalg.norm(np.eye(6)) < 0.05

    def test_anisotropic_std(self, rng):
        var = np.array([0.04, 0.01, 0.09, 0.0004, 0.0001, 0.0025])
        n = 100_000
        ps = sample_measurement_particles(np.zeros(6), np.diag(var), n, rng)
        std = ps.poses.std(axis=0, ddof=1)
        # standard error of a sample std is sigma / sqrt(2(n-1))
        assert np.all(np.abs(std - np.sqrt(var)) < 3 * np.sqrt(var) / math.sqrt(2 * (n - 1)))

    def test_angles_are_wrapped(self, rng):
        ps = sample_measurement_particles([0, 0, 0, 0, 0, math.pi], np.eye(6) * 0.5, 2000, rng)
        assert np.all(np.abs(ps.poses[:, 3:]) <= math.pi)


class TestNormalize:
    def test_uniform(self):
        w, bad = normalize_weights(np.ones(8))
        assert np.allclose(w, 1 / 8) and not bad

    def test_two_twos(self):
        assert np.allclose(normalize_weights([2.0, 2.0])[0], [0.5, 0.5])

    def test_all_zero_resets_with_warning(self, caplog):
        w, bad = normalize_weights(np.zeros(4))
        assert bad and np.allclose(w, 0.25)
        assert "degenerate" in caplog.text

    def test_non_finite_resets(self):
        assert normalize_weights([1.0, np.inf])[1]
        assert normalize_log_weights([-np.inf, -np.inf])[1]
        assert normalize_log_weights([0.0, np.nan])[1]

    def test_log_matches_linear(self, rng):
        w = rng.uniform(0.01, 1, 40)
        assert np.allclose(normalize_log_weights(np.log(w))[0], normalize_weights(w)[0], atol=1e-15)

    def test_log_handles_huge_offsets(self):
        w, bad = normalize_log_weights([-1e4, -1e4 + math.log(3)])
        assert not bad and np.allclose(w, [0.25, 0.75])

    @settings(max_examples=200)
    @given(arrays(np.float64, st.integers(1, 200), elements=st.floats(0, 1e6)))
    def test_sum_to_one(self, w):
        out, _ = normalize_weights(w)
        assert out.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(out >= 0)


class TestEstimate:
    def test_single_particle(self):
        p = np.array([[1, 2, 3, 0.1, -0.2, 2.0]])
        assert np.allclose(estimate_pose(p, [1.0]), p[0])

    def test_circular_mean_at_pi(self):
        p = np.zeros((2, 6))
        p[:, 5] = [3.1, -3.1]
        yaw = estimate_pose(p, [0.5, 0.5])[5]
        assert abs(abs(yaw) - math.pi) < 1e-9

    def test_weighted_position(self):
        p = np.zeros((2, 6))
        p[1, 0] = 2.0
        assert np.allclose(estimate_pose(p, [0.25, 0.75])[:3], [1.5, 0, 0])


class TestESS:
    def test_values(self):
        assert effective_sample_size(np.full(10, 0.1)) == pytest.approx(10)
        assert effective_sample_size([1.0, 0, 0]) == 1.0
        assert effective_sample_size([0.5, 0.25, 0.25]) == pytest.approx(2.6667, abs=1e-4)

    @given(arrays(np.float64, st.integers(1, 300), elements=st.floats(1e-6, 1.0)))
    def test_range(self, w):
        w = w / w.sum()
        assert 1 - 1e-9 <= effective_sample_size(w) <= len(w) + 1e-9


class TestResample:
    def test_single_heavy_particle(self, rng):
        ps = make_particles(np.arange(18.0).reshape(3, 6), [0.0, 1.0, 0.0])
        out = resample(ps, 7, rng)
        assert len(out) == 7 and np.all(out.poses == ps.poses[1])
        assert np.allclose(out.weights, 1 / 7)
        assert np.all(out.origin == Origin.PREDICTIVE)

    @pytest.mark.parametrize("offset", [0.0, 0.05, 0.5, 0.95, 0.999999])
    def test_ninety_ten(self, offset):
        idx = systematic_indices([0.9, 0.1], 10, offset)
        assert np.bincount(idx, minlength=2).tolist() == [9, 1]

    def test_uniform_counts_over_many_runs(self):
        rng = np.random.default_rng(3)
        n_src, m = 1500, 1000
        w = np.full(n_src, 1 / n_src)
        for _ in range(1000):
            counts = np.bincount(systematic_indices(w, m, rng.uniform()), minlength=n_src)
            assert counts.sum() == m
            assert counts.min() >= math.floor(m / n_src) and counts.max() <= math.ceil(m / n_src)

    @settings(max_examples=300)
    @given(arrays(np.float64, st.integers(1, 100), elements=st.floats(0, 1.0)),
           st.integers(1, 500), st.floats(0, 1, exclude_max=True))
    def test_copy_counts_within_one_of_expectation(self, w, m, offset):
        if w.sum() <= 0:
            return
        w = w / w.sum()
        counts = np.bincount(systematic_indices(w, m, offset), minlength=len(w))
        assert counts.sum() == m
        assert np.all(np.abs(counts - m * w) < 1 + 1e-9)

    def test_mixed_origins_collapse_to_predictive(self, rng):
        a = make_particles(np.zeros((3, 6)))
        b = make_particles(np.ones((3, 6)), origin=Origin.MEASUREMENT)
        ps = ParticleSet.concat(a, b)
        ps.weights = np.full(6, 1 / 6)
        out = resample(ps, 4, rng)
        assert np.all(out.origin == Origin.PREDICTIVE)


def test_gaussian_density_matches_scipy():
    from scipy.stats import multivariate_normal
    rng = np.random.default_rng(4)
    A = rng.normal(size=(6, 6))
    cov = A @ A.T + np.eye(6)
    x = rng.normal(scale=0.3, size=(25, 6))
    assert np.allclose(gaussian_density(x, np.zeros(6), cov), multivariate_normal(np.zeros(6), cov).pdf(x), rtol=1e-10)

import math

import numpy as np
import pytest
from scipy.stats import chisquare

from jdtclab.rfs import Label
from jdtclab.sensing import (
    EsmModel,
    RadarModel,
    TruthTarget,
    declare_class,
    esm_likelihood,
    radar_likelihood,
    simulate_scan,
    wrap_angle,
)


def truth_at(x, y, class_id=1, label=Label(0, 0)):
    state = np.zeros(6)
    state[0], state[3] = x, y
    return TruthTarget(state=state, class_id=class_id, label=label)


class TestSimulateScan:
    def test_perfect_detection_no_noise(self, rng):
        radar = RadarModel(p_d=1.0, clutter_rate=0.0, noise_cov=np.zeros((2, 2)))
        esm = EsmModel(enabled=False)
        targets = [truth_at(100.0, 900.0), truth_at(500.0, 1500.0, label=Label(0, 1))]
        scan = simulate_scan(targets, radar, esm, rng)
        got = sorted(scan.radar_meas.tolist())
        np.testing.assert_allclose(got, [[100.0, 900.0], [500.0, 1500.0]])

    def test_no_detections_no_clutter(self, rng):
        radar = RadarModel(p_d=0.0, clutter_rate=0.0)
        esm = EsmModel(enabled=True, p_d=0.0, clutter_rate=0.0)
        scan = simulate_scan([truth_at(0.0, 1000.0)], radar, esm, rng)
        assert scan.n_radar == 0
        assert scan.n_esm == 0

    def test_clutter_count_poisson_mean(self):
        lam = 10.0
        radar = RadarModel(p_d=0.0, clutter_rate=lam)
        esm = EsmModel(enabled=False)
        rng = np.random.default_rng(99)
        n = 10_000
        counts = [simulate_scan([], radar, esm, rng).n_radar for _ in range(n)]
        tol = 3.0 * math.sqrt(lam / n)
        assert abs(np.mean(counts) - lam) < tol

    def test_reproducible_with_seed(self):
        radar = RadarModel()
        esm = EsmModel(enabled=True)
        targets = [truth_at(100.0, 900.0, class_id=2)]
        a = simulate_scan(targets, radar, esm, np.random.default_rng(5), k=3)
        b = simulate_scan(targets, radar, esm, np.random.default_rng(5), k=3)
        np.testing.assert_array_equal(a.radar_meas, b.radar_meas)
        np.testing.assert_array_equal(a.esm_bearings, b.esm_bearings)
        np.testing.assert_array_equal(a.esm_classes, b.esm_classes)

    def test_clutter_inside_region(self, rng):
        radar = RadarModel(p_d=0.0, clutter_rate=30.0)
        scan = simulate_scan([], radar, EsmModel(enabled=False), rng)
        lo, hi = radar.region[:, 0], radar.region[:, 1]
        assert np.all(scan.radar_meas >= lo) and np.all(scan.radar_meas <= hi)


class TestDeclareClass:
    def test_identity_confusion(self, rng):
        eye = np.eye(3)
        for true in (1, 2, 3):
            assert declare_class(true, eye, rng) == true

    def test_uniform_row_frequencies(self):
        rng = np.random.default_rng(4)
        conf = np.full((2, 2), 0.5)
        draws = np.array([declare_class(1, conf, rng) for _ in range(10_000)])
        freq = np.mean(draws == 1)
        assert abs(freq - 0.5) < 3.0 * math.sqrt(0.25 / 10_000)

    def test_biased_row_frequency(self):
        rng = np.random.default_rng(8)
        conf = np.array([[0.9, 0.1], [0.1, 0.9]])
        draws = np.array([declare_class(1, conf, rng) for _ in range(10_000)])
        assert abs(np.mean(draws == 1) - 0.9) < 0.01

    def test_chi_square_convergence(self):
        rng = np.random.default_rng(21)
        conf = np.array([[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.2, 0.2, 0.6]])
        n = 10_000
        draws = np.array([declare_class(2, conf, rng) for _ in range(n)])
        observed = [np.sum(draws == j) for j in (1, 2, 3)]
        _, p = chisquare(observed, [n * p_ for p_ in conf[1]])
        assert p > 0.01

    def test_bad_class_rejected(self, rng):
        with pytest.raises(ValueError):
            declare_class(5, np.eye(2), rng)


class TestLikelihoods:
    def test_radar_miss_value(self):
        radar = RadarModel(p_d=0.98)
        assert radar_likelihood(None, np.zeros(6), radar) == pytest.approx(0.02)

    def test_zero_detection_probability(self):
        radar = RadarModel(p_d=0.0)
        assert radar_likelihood(np.array([0.0, 0.0]), np.zeros(6), radar) == 0.0

    def test_scalar_gaussian_value(self):
        # 1-D measurement, unit noise, kappa = 1: density at the mean is 1/sqrt(2 pi).
        H = np.zeros((1, 6))
        H[0, 0] = 1.0
        radar = RadarModel(
            H=H,
            noise_cov=np.array([[1.0]]),
            p_d=1.0,
            clutter_rate=1.0,
            region=np.array([[0.0, 1.0], [0.0, 1.0]]),
        )
        value = radar_likelihood(np.array([0.0]), np.zeros(6), radar)
        assert value == pytest.approx(1.0 / math.sqrt(2.0 * math.pi))

    def test_esm_miss_value(self):
        esm = EsmModel(p_d=0.9, enabled=True)
        assert esm_likelihood(None, np.zeros(6), 1, esm) == pytest.approx(0.1)

    def test_esm_declaration_factor_ratio(self):
        esm = EsmModel(enabled=True)
        state = np.zeros(6)
        state[0], state[3] = 100.0, 100.0
        z = (esm.bearing(state), 1)
        l1 = esm_likelihood(z, state, 1, esm)
        l2 = esm_likelihood(z, state, 2, esm)
        assert l1 / l2 == pytest.approx(0.9 / 0.1)

    def test_miss_independent_of_state(self, rng):
        radar = RadarModel(p_d=0.7)
        values = [radar_likelihood(None, rng.normal(size=6) * 100, radar) for _ in range(5)]
        np.testing.assert_allclose(values, 0.3)


def test_wrap_angle_range():
    angles = np.linspace(-10.0, 10.0, 101)
    wrapped = wrap_angle(angles)
    assert np.all(wrapped <= math.pi + 1e-12)
    assert np.all(wrapped > -math.pi - 1e-12)
    np.testing.assert_allclose(np.cos(wrapped), np.cos(angles), atol=1e-12)

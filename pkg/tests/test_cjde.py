import math

import numpy as np
import pytest

from jdtclab.cjde import (
    BirthModel,
    BirthSite,
    CjdeLmbFilter,
    FilterConfig,
    enumerate_associations,
    extract_estimates,
    predict,
    update_conditioned,
)
from jdtclab.motion import ClassModelSet, MotionModel
from jdtclab.rfs import Label, LmbDensity
from jdtclab.risk import RiskCoefficients
from jdtclab.sensing import EsmModel, RadarModel, ScanData, SensorSuite

from conftest import make_density, make_track, random_micro_instance
from _reference import brute_force_update

EXHAUSTIVE = FilterConfig(gate_chi2=math.inf, k_best=None)


def radar_only(radar=None):
    return SensorSuite(radar=radar or RadarModel(), esm=EsmModel(enabled=False))


def scan_of(k=1, radar_meas=(), bearings=(), classes=(), z_dim=2):
    return ScanData(
        k=k,
        radar_meas=np.array(radar_meas) if len(radar_meas) else np.zeros((0, z_dim)),
        esm_bearings=np.array(bearings, dtype=float),
        esm_classes=np.array(classes, dtype=int),
        truth=(),
    )


def birth_model(*means, r=0.02):
    sites = tuple(
        BirthSite(
            slot=i,
            existence=r,
            density=make_density(np.asarray(m, float), np.diag([100.0, 10, 1, 100, 10, 1])),
        )
        for i, m in enumerate(means)
    )
    return BirthModel(sites)


class TestPredict:
    def test_birth_from_empty(self, model_sets_two_class):
        births = birth_model([0.0, 0, 0, 1000.0, 0, 0])
        out = predict(LmbDensity(()), births, model_sets_two_class, 0.98, k=1)
        assert len(out) == 1
        assert out.tracks[0].existence == pytest.approx(0.02)
        assert out.tracks[0].label == Label(1, 0)

    def test_survival_scaling(self, model_sets_two_class):
        prior = LmbDensity((make_track(Label(0, 0), 1.0, np.zeros(6), np.eye(6)),))
        out = predict(prior, BirthModel(()), model_sets_two_class, 0.98, k=1)
        assert out.tracks[0].existence == pytest.approx(0.98)

    def test_identity_dynamics_no_births(self):
        identity = MotionModel("CV", np.eye(6), np.zeros((6, 6)))
        sets = {1: ClassModelSet(1, (identity,), np.array([[1.0]]))}
        mean = np.arange(6.0)
        prior = LmbDensity(
            (make_track(Label(0, 0), 0.7, mean, np.eye(6), class_probs=(1.0,), models_per_class=(1,)),)
        )
        out = predict(prior, BirthModel(()), sets, 1.0, k=1)
        np.testing.assert_allclose(
            out.tracks[0].density.mixtures[0][0].components[0].mean, mean
        )
        assert out.tracks[0].existence == pytest.approx(0.7)

    def test_duplicate_birth_label_rejected(self, model_sets_two_class):
        births = birth_model([0.0, 0, 0, 1000.0, 0, 0])
        prior = LmbDensity((make_track(Label(1, 0), 0.5, np.zeros(6), np.eye(6)),))
        with pytest.raises(RuntimeError):
            predict(prior, births, model_sets_two_class, 1.0, k=1)


class TestEnumerateAssociations:
    def test_one_track_one_radar_one_esm(self):
        sensors = SensorSuite(radar=RadarModel(), esm=EsmModel(enabled=True))
        mean = np.zeros(6)
        mean[0], mean[3] = 500.0, 1000.0
        track = make_track(Label(0, 0), 0.5, mean, np.diag([100.0, 10, 1, 100, 10, 1]))
        scan = scan_of(
            radar_meas=[[500.0, 1000.0]],
            bearings=[sensors.esm.bearing(mean)],
            classes=[1],
        )
        maps = enumerate_associations([track], scan, sensors, gate_chi2=math.inf, k_best=None)
        pairs = {m.assignment(Label(0, 0)) for m in maps}
        assert pairs == {(None, None), (0, None), (None, 0), (0, 0)}

    def test_injectivity(self, rng):
        sensors = radar_only()
        tracks = [
            make_track(Label(0, i), 0.6, np.array([500.0, 0, 0, 1000.0, 0, 0]), np.diag([100.0, 10, 1, 100, 10, 1]))
            for i in range(2)
        ]
        scan = scan_of(radar_meas=[[500.0, 1000.0]])
        maps = enumerate_associations(tracks, scan, sensors, gate_chi2=math.inf, k_best=None)
        for m in maps:
            radar_picks = [a for _, (a, _) in m.entries if a is not None]
            assert len(set(radar_picks)) == len(radar_picks)

    def test_two_tracks_two_meas_seven_maps(self):
        sensors = radar_only()
        tracks = [
            make_track(Label(0, i), 0.6, np.array([500.0, 0, 0, 1000.0, 0, 0]), np.diag([100.0, 10, 1, 100, 10, 1]))
            for i in range(2)
        ]
        scan = scan_of(radar_meas=[[500.0, 1000.0], [510.0, 1010.0]])
        maps = enumerate_associations(tracks, scan, sensors, gate_chi2=math.inf, k_best=None)
        assert len(maps) == 7

    def test_always_includes_all_miss(self):
        sensors = radar_only()
        track = make_track(Label(0, 0), 0.99, np.array([500.0, 0, 0, 1000.0, 0, 0]), np.eye(6))
        scan = scan_of(radar_meas=[[500.0, 1000.0]])
        maps = enumerate_associations([track], scan, sensors, gate_chi2=math.inf, k_best=1)
        assert any(m.is_all_miss() for m in maps)


class TestUpdateConditioned:
    def test_missed_detection_fixed_point(self, coeffs_default):
        # r = 1, p_s = 1: the standard miss update keeps r = 1.
        sensors = radar_only()
        track = make_track(Label(0, 0), 1.0, np.array([500.0, 0, 0, 1000.0, 0, 0]), np.eye(6))
        out = update_conditioned(
            LmbDensity((track,)), scan_of(), sensors, coeffs_default, config=EXHAUSTIVE
        )
        assert out.stats[0].existence == pytest.approx(1.0)

    def test_miss_update_formula(self, coeffs_default):
        sensors = radar_only()
        r = 0.6
        track = make_track(Label(0, 0), r, np.array([500.0, 0, 0, 1000.0, 0, 0]), np.eye(6))
        out = update_conditioned(
            LmbDensity((track,)), scan_of(), sensors, coeffs_default, config=EXHAUSTIVE
        )
        p_d = sensors.radar.p_d
        want = r * (1 - p_d) / (1 - r * p_d)
        assert out.stats[0].existence == pytest.approx(want, abs=1e-12)

    def test_scalar_kalman_toy(self):
        # Prior N(0, 1) on x, z = 1, H = [1 0...], R = 1, p_d = 1: posterior N(0.5, 0.5).
        H = np.zeros((1, 6))
        H[0, 0] = 1.0
        radar = RadarModel(
            H=H, noise_cov=np.array([[1.0]]), p_d=1.0, clutter_rate=0.0,
            region=np.array([[-10.0, 10.0], [-10.0, 10.0]]),
        )
        sensors = radar_only(radar)
        cov = np.diag([1.0, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6])
        track = make_track(Label(0, 0), 1.0, np.zeros(6), cov, class_probs=(1.0,), models_per_class=(1,))
        coeffs = RiskCoefficients.uniform(20.0, 1.0, 100.0, 1)
        out = update_conditioned(
            LmbDensity((track,)), scan_of(radar_meas=[[1.0]], z_dim=1), sensors, coeffs,
            config=EXHAUSTIVE,
        )
        st = out.stats[0]
        assert st.existence == pytest.approx(1.0)
        assert st.means[0][0] == pytest.approx(0.5, abs=1e-9)
        assert st.covs[0][0, 0] == pytest.approx(0.5, abs=1e-9)

    def test_esm_class_bayes_update(self, coeffs_default):
        # Identical kinematics across classes, ESM declares class 1:
        # posterior P(H1) = 0.9 with the default confusion matrix. ESM p_d = 1
        # removes the miss branch so the marginal equals the detection case.
        esm = EsmModel(enabled=True, p_d=1.0)
        radar = RadarModel(p_d=0.0, clutter_rate=0.0)  # radar silent
        sensors = SensorSuite(radar=radar, esm=esm)
        mean = np.zeros(6)
        mean[0], mean[3] = 500.0, 1000.0
        track = make_track(Label(0, 0), 0.9, mean, np.diag([100.0, 10, 1, 100, 10, 1]))
        scan = scan_of(bearings=[esm.bearing(mean)], classes=[1])
        out = update_conditioned(LmbDensity((track,)), scan, sensors, coeffs_default, config=EXHAUSTIVE)
        st = out.stats[0]
        np.testing.assert_allclose(st.class_probs, [0.9, 0.1], atol=1e-9)

    def test_hypothesis_weights_normalized(self, coeffs_default, rng):
        density, scan, sensors = random_micro_instance(rng)
        out = update_conditioned(density, scan, sensors, coeffs_default, config=EXHAUSTIVE)
        total = sum(h.weight for h in out.hypotheses)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_cardinality_first_moment_match(self, coeffs_default, rng):
        # Sum of existence equals sum over hypotheses of N * weight.
        for _ in range(10):
            density, scan, sensors = random_micro_instance(rng)
            out = update_conditioned(density, scan, sensors, coeffs_default, config=EXHAUSTIVE)
            by_card = sum(len(h.label_set) * h.weight for h in out.hypotheses)
            assert out.card_mean == pytest.approx(by_card, abs=1e-8)
            assert out.card_mean == pytest.approx(
                sum(st.existence for st in out.stats), abs=1e-8
            )

    def test_region_exclusion_drops_measurement(self):
        # Class densities far apart: the measurement sits in class 2's region,
        # so conditioning on class 1 treats the track as missed.
        from jdtclab.rfs import ClassConditionedDensity, GaussianMixture, Track

        radar = RadarModel(clutter_rate=5.0)
        sensors = radar_only(radar)
        mean1 = np.array([500.0, 0, 0, 1000.0, 0, 0])
        mean2 = np.array([800.0, 0, 0, 1300.0, 0, 0])
        cov = np.diag([25.0, 10, 1, 25.0, 10, 1])
        density = ClassConditionedDensity(
            (
                (GaussianMixture.single(mean1, cov),),
                (GaussianMixture.single(mean2, cov),),
            ),
            (np.array([1.0]), np.array([1.0])),
            np.array([0.5, 0.5]),
        )
        track = Track(Label(0, 0), 0.9, density)
        coeffs = RiskCoefficients.uniform(20.0, 1.0, 100.0, 2)
        scan = scan_of(radar_meas=[[800.0, 1300.0]])  # matches class 2 only
        kept = update_conditioned(
            LmbDensity((track,)), scan, sensors, coeffs, decisions={Label(0, 0): 2},
            config=EXHAUSTIVE,
        )
        excluded = update_conditioned(
            LmbDensity((track,)), scan, sensors, coeffs, decisions={Label(0, 0): 1},
            config=EXHAUSTIVE,
        )
        assert kept.stats[0].existence > 0.95
        assert excluded.stats[0].existence < 0.5
        assert not excluded.flagged  # the miss branch keeps the table alive

    def test_all_zero_fallback_flags_scan(self, coeffs_default):
        # p_d = 1 and r = 1 with no measurements empties the table.
        radar = RadarModel(p_d=1.0, clutter_rate=0.0)
        sensors = radar_only(radar)
        track = make_track(Label(0, 0), 1.0, np.array([500.0, 0, 0, 1000.0, 0, 0]), np.eye(6))
        out = update_conditioned(
            LmbDensity((track,)), scan_of(), sensors, coeffs_default, config=EXHAUSTIVE
        )
        assert out.flagged


class TestOracleEquivalence:
    def test_micro_instances_match_brute_force(self, coeffs_default, rng):
        for _ in range(20):
            density, scan, sensors = random_micro_instance(rng)
            decisions = {t.label: int(rng.integers(1, 3)) for t in density.tracks}
            out = update_conditioned(
                density, scan, sensors, coeffs_default, decisions=decisions, config=EXHAUSTIVE
            )
            want_r, want_means, _ = brute_force_update(
                density, scan, sensors, coeffs_default, decisions
            )
            for st in out.stats:
                assert st.existence == pytest.approx(want_r[st.label], abs=1e-8)
                if want_r[st.label] > 1e-6:
                    fused = st.class_probs @ st.means
                    np.testing.assert_allclose(fused, want_means[st.label], atol=1e-8)


class TestExtractEstimates:
    def test_threshold_counts(self):
        density = LmbDensity(
            (
                make_track(Label(0, 0), 0.9, np.zeros(6), np.eye(6)),
                make_track(Label(0, 1), 0.1, np.ones(6), np.eye(6)),
            )
        )
        n_hat, records = extract_estimates(density, r_threshold=0.5)
        assert n_hat == 1
        assert records[0][0] == Label(0, 0)

    def test_point_mass_class(self):
        mean = np.arange(6.0)
        density = LmbDensity(
            (make_track(Label(0, 0), 0.9, mean, np.eye(6), class_probs=(1.0, 0.0)),)
        )
        _, records = extract_estimates(density, 0.5)
        np.testing.assert_allclose(records[0][1], mean)

    def test_midpoint_mixing(self):
        from jdtclab.rfs import ClassConditionedDensity, GaussianMixture, Track

        m1, m2 = np.zeros(6), np.full(6, 2.0)
        density = ClassConditionedDensity(
            ((GaussianMixture.single(m1, np.eye(6)),), (GaussianMixture.single(m2, np.eye(6)),)),
            (np.array([1.0]), np.array([1.0])),
            np.array([0.5, 0.5]),
        )
        _, records = extract_estimates(LmbDensity((Track(Label(0, 0), 0.9, density),)), 0.5)
        np.testing.assert_allclose(records[0][1], np.ones(6))


class TestFilterStep:
    def test_posterior_invariants_over_scans(self, model_sets_two_class, coeffs_default, rng):
        from jdtclab.sensing import simulate_scan, TruthTarget

        sensors = radar_only()
        births = birth_model([0.0, 10.0, 0, 1000.0, 0.0, 0], [400.0, 0, 0, 1400.0, 0, 0])
        filt = CjdeLmbFilter(
            model_sets_two_class,
            sensors,
            births,
            coeffs_default,
            p_s=0.98,
            config=FilterConfig(check_invariants=True),
        )
        state = np.array([0.0, 10.0, 0.0, 1000.0, 0.0, 0.0])
        for k in range(1, 8):
            truth = [TruthTarget(state=state, class_id=1, label=Label(1, 0))]
            scan = simulate_scan(truth, sensors.radar, sensors.esm, rng, k=k)
            result = filt.step(scan)  # raises if an invariant breaks
            for track in result.posterior.tracks:
                assert 0.0 <= track.existence <= 1.0
            state = model_sets_two_class[1].models[0].transition @ state

    def test_sweep_mode_matches_joint_on_easy_case(self, model_sets_two_class, coeffs_default):
        sensors = radar_only()
        births = birth_model([0.0, 0, 0, 1000.0, 0, 0], [400.0, 0, 0, 1400.0, 0, 0])
        scan = scan_of(radar_meas=[[0.0, 1000.0], [400.0, 1400.0]])
        decisions = {}
        for limit in (6, 0):
            filt = CjdeLmbFilter(
                model_sets_two_class,
                sensors,
                births,
                coeffs_default,
                p_s=0.98,
                config=FilterConfig(joint_decision_limit=limit),
            )
            result = filt.step(scan)
            decisions[limit] = result.decision.decisions
        assert decisions[6] == decisions[0]

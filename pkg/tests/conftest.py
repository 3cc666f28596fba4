import numpy as np
import pytest

from jdtclab.motion import ClassModelSet, build_ca_model, build_cv_model
from jdtclab.rfs import ClassConditionedDensity, Label, LmbDensity, Track
from jdtclab.risk import RiskCoefficients
from jdtclab.sensing import EsmModel, RadarModel, SensorSuite


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def default_radar():
    return RadarModel()


@pytest.fixture
def default_esm_on():
    return EsmModel(enabled=True)


@pytest.fixture
def sensors_radar_only(default_radar):
    return SensorSuite(radar=default_radar, esm=EsmModel(enabled=False))


@pytest.fixture
def model_sets_two_class():
    cv = build_cv_model(1.0, 1.0)
    ca = build_ca_model(1.0, 10.0)
    return {
        1: ClassModelSet(1, (cv,), np.array([[1.0]])),
        2: ClassModelSet(2, (cv, ca), np.array([[0.7, 0.3], [0.3, 0.7]])),
    }


@pytest.fixture
def coeffs_default():
    return RiskCoefficients.uniform(20.0, 1.0, 100.0, n_classes=2)


def make_density(mean, cov, class_probs=(0.5, 0.5), models_per_class=(1, 2)):
    return ClassConditionedDensity.from_single_gaussian(
        np.asarray(mean, float), np.asarray(cov, float), class_probs, models_per_class
    )


def make_track(label, r, mean, cov, class_probs=(0.5, 0.5), models_per_class=(1, 2)):
    return Track(label, r, make_density(mean, cov, class_probs, models_per_class))


def simple_lmb(existences):
    """LmbDensity with the given existence probabilities at spread-out means."""
    tracks = []
    for i, r in enumerate(existences):
        mean = np.array([100.0 * i, 0.0, 0.0, 500.0 + 100.0 * i, 0.0, 0.0])
        tracks.append(make_track(Label(0, i), r, mean, np.diag([100.0, 10, 1, 100, 10, 1])))
    return LmbDensity(tuple(tracks))


def random_micro_instance(rng, max_tracks=2, max_meas=3, with_esm=None):
    """Small random predicted density + scan for oracle comparisons."""
    from jdtclab.sensing import ScanData

    n_tracks = int(rng.integers(1, max_tracks + 1))
    n_meas = int(rng.integers(0, max_meas + 1))
    esm_on = bool(rng.random() < 0.5) if with_esm is None else with_esm
    radar = RadarModel(p_d=float(rng.uniform(0.6, 0.98)), clutter_rate=float(rng.uniform(1.0, 8.0)))
    esm = EsmModel(enabled=esm_on, p_d=float(rng.uniform(0.5, 0.95)), clutter_rate=1.0)
    sensors = SensorSuite(radar=radar, esm=esm)

    tracks = []
    for i in range(n_tracks):
        mean = np.zeros(6)
        mean[0] = rng.uniform(0.0, 800.0)
        mean[3] = rng.uniform(800.0, 1600.0)
        mean[[1, 4]] = rng.normal(size=2) * 20
        mean[[2, 5]] = rng.normal(size=2) * 2
        cov = np.diag(rng.uniform(0.5, 3.0, size=6) * np.array([50, 10, 1, 50, 10, 1]))
        class_probs = rng.dirichlet(np.ones(2))
        tracks.append(
            make_track(Label(0, i), float(rng.uniform(0.05, 0.98)), mean, cov, class_probs)
        )
    density = LmbDensity(tuple(tracks))

    radar_meas = []
    for _ in range(n_meas):
        if tracks and rng.random() < 0.7:
            src = tracks[int(rng.integers(0, n_tracks))]
            pos = np.array([src.density.mixtures[0][0].components[0].mean[i] for i in (0, 3)])
            radar_meas.append(pos + rng.normal(size=2) * 4.0)
        else:
            lo, hi = radar.region[:, 0], radar.region[:, 1]
            radar_meas.append(lo + rng.random(2) * (hi - lo))
    bearings, classes = [], []
    if esm_on:
        for _ in range(int(rng.integers(0, 3))):
            if tracks and rng.random() < 0.7:
                src = tracks[int(rng.integers(0, n_tracks))]
                state = src.density.mixtures[0][0].components[0].mean
                bearings.append(esm.bearing(state) + rng.normal() * 0.03)
            else:
                bearings.append(rng.uniform(-np.pi, np.pi))
            classes.append(int(rng.integers(1, 3)))
    scan = ScanData(
        k=1,
        radar_meas=np.array(radar_meas) if radar_meas else np.zeros((0, 2)),
        esm_bearings=np.array(bearings),
        esm_classes=np.array(classes, dtype=int),
        truth=(),
    )
    return density, scan, sensors

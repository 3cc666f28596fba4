"""Radar and ESM measurement models, clutter, and truth-to-measurement simulation.

The radar default is a direct position measurement z = [x, y]; a range-bearing
mode with a linearized update is provided as an alternative. The ESM sensor
reports a bearing plus a declared emitter class drawn from a confusion matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .rfs import Label

__all__ = [
    "RadarModel",
    "EsmModel",
    "TruthTarget",
    "ScanData",
    "SensorSuite",
    "simulate_scan",
    "declare_class",
    "radar_likelihood",
    "esm_likelihood",
    "gaussian_density",
    "wrap_angle",
]

_TWO_PI = 2.0 * math.pi

# Lower bound for clutter densities so zero-clutter configs keep likelihood
# ratios finite (detections then dominate misses, the correct limit).
KAPPA_FLOOR = 1e-12


def wrap_angle(angle):
    """Wrap an angle (or array of angles) to (-pi, pi]."""
    return np.arctan2(np.sin(angle), np.cos(angle))


def gaussian_density(residual: np.ndarray, cov: np.ndarray) -> float:
    """Multivariate normal density of a residual with the given covariance."""
    residual = np.atleast_1d(np.asarray(residual, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    dim = residual.size
    chol = np.linalg.cholesky(cov)
    alpha = np.linalg.solve(chol, residual)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    return float(np.exp(-0.5 * (alpha @ alpha + log_det + dim * math.log(_TWO_PI))))


def _position_matrix(dim: int = 6) -> np.ndarray:
    H = np.zeros((2, dim))
    H[0, 0] = 1.0
    H[1, 3] = 1.0
    return H


@dataclass(frozen=True, eq=False)
class RadarModel:
    """Kinematic sensor: detection probability, noise, and Poisson clutter over a region."""

    mode: str = "linear-position"
    H: np.ndarray = field(default_factory=_position_matrix)
    noise_cov: np.ndarray = field(default_factory=lambda: np.eye(2) * 4.0)
    p_d: float = 0.98
    clutter_rate: float = 10.0
    region: np.ndarray = field(
        default_factory=lambda: np.array([[-400.0, 1600.0], [400.0, 2200.0]])
    )
    sensor_pos: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        if self.mode not in ("linear-position", "range-bearing"):
            raise ValueError(f"unknown radar mode {self.mode!r}")
        if not 0.0 <= self.p_d <= 1.0:
            raise ValueError("detection probability must lie in [0, 1]")
        if self.clutter_rate < 0.0:
            raise ValueError("clutter rate must be nonnegative")
        object.__setattr__(self, "H", np.array(self.H, dtype=float))
        object.__setattr__(self, "noise_cov", np.array(self.noise_cov, dtype=float))
        object.__setattr__(self, "region", np.array(self.region, dtype=float))
        object.__setattr__(self, "sensor_pos", np.array(self.sensor_pos, dtype=float))

    @property
    def z_dim(self) -> int:
        return 2 if self.mode == "range-bearing" else self.H.shape[0]

    def region_area(self) -> float:
        spans = self.region[:, 1] - self.region[:, 0]
        return float(np.prod(spans))

    def clutter_density(self) -> float:
        """Spatial clutter intensity: expected count times the uniform density."""
        return max(self.clutter_rate / self.region_area(), KAPPA_FLOOR)

    def measure(self, state: np.ndarray) -> np.ndarray:
        if self.mode == "linear-position":
            return self.H @ state
        dx = state[0] - self.sensor_pos[0]
        dy = state[3] - self.sensor_pos[1]
        return np.array([math.hypot(dx, dy), math.atan2(dy, dx)])

    def jacobian(self, state: np.ndarray) -> np.ndarray:
        if self.mode == "linear-position":
            return self.H
        dx = state[0] - self.sensor_pos[0]
        dy = state[3] - self.sensor_pos[1]
        rng2 = dx * dx + dy * dy
        rng = math.sqrt(rng2)
        J = np.zeros((2, state.size))
        J[0, 0] = dx / rng
        J[0, 3] = dy / rng
        J[1, 0] = -dy / rng2
        J[1, 3] = dx / rng2
        return J

    def residual(self, z: np.ndarray, predicted: np.ndarray) -> np.ndarray:
        res = np.asarray(z, dtype=float) - predicted
        if self.mode == "range-bearing":
            res[1] = wrap_angle(res[1])
        return res


@dataclass(frozen=True, eq=False)
class EsmModel:
    """Passive sensor: bearing measurement plus an emitter class declaration."""

    bearing_noise_var: float = math.radians(1.0) ** 2
    p_d: float = 0.9
    confusion: np.ndarray = field(default_factory=lambda: np.array([[0.9, 0.1], [0.1, 0.9]]))
    enabled: bool = False
    clutter_rate: float = 1.0
    sensor_pos: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        if not 0.0 <= self.p_d <= 1.0:
            raise ValueError("detection probability must lie in [0, 1]")
        conf = np.array(self.confusion, dtype=float)
        if not np.allclose(conf.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("confusion matrix rows must sum to 1")
        object.__setattr__(self, "confusion", conf)
        object.__setattr__(self, "sensor_pos", np.array(self.sensor_pos, dtype=float))

    @property
    def n_classes(self) -> int:
        return self.confusion.shape[0]

    def clutter_density(self) -> float:
        # Uniform over bearing space and declared classes.
        return max(self.clutter_rate / (_TWO_PI * self.n_classes), KAPPA_FLOOR)

    def bearing(self, state: np.ndarray) -> float:
        dx = state[0] - self.sensor_pos[0]
        dy = state[3] - self.sensor_pos[1]
        return math.atan2(dy, dx)

    def jacobian(self, state: np.ndarray) -> np.ndarray:
        dx = state[0] - self.sensor_pos[0]
        dy = state[3] - self.sensor_pos[1]
        rng2 = dx * dx + dy * dy
        J = np.zeros((1, state.size))
        J[0, 0] = -dy / rng2
        J[0, 3] = dx / rng2
        return J


@dataclass(frozen=True, eq=False)
class SensorSuite:
    """Radar plus optional ESM, bundled so filter code takes a single argument."""

    radar: RadarModel
    esm: EsmModel

    @property
    def esm_enabled(self) -> bool:
        return self.esm.enabled


@dataclass(frozen=True, eq=False)
class TruthTarget:
    state: np.ndarray
    class_id: int
    label: Label

    def __post_init__(self):
        object.__setattr__(self, "state", np.array(self.state, dtype=float))

    @property
    def position(self) -> np.ndarray:
        return self.state[[0, 3]]


@dataclass(frozen=True, eq=False)
class ScanData:
    """One scan's measurements plus ground truth kept only for scoring."""

    k: int
    radar_meas: np.ndarray  # (m, z_dim)
    esm_bearings: np.ndarray  # (me,)
    esm_classes: np.ndarray  # (me,) declared class ids
    truth: tuple[TruthTarget, ...]

    def __post_init__(self):
        object.__setattr__(self, "radar_meas", np.atleast_2d(np.asarray(self.radar_meas, float)))
        object.__setattr__(self, "esm_bearings", np.asarray(self.esm_bearings, float).reshape(-1))
        object.__setattr__(self, "esm_classes", np.asarray(self.esm_classes, int).reshape(-1))
        object.__setattr__(self, "truth", tuple(self.truth))
        if self.radar_meas.size == 0:
            object.__setattr__(self, "radar_meas", np.zeros((0, 2)))

    @property
    def n_radar(self) -> int:
        return self.radar_meas.shape[0]

    @property
    def n_esm(self) -> int:
        return self.esm_bearings.size


def declare_class(true_class: int, confusion: np.ndarray, rng: np.random.Generator) -> int:
    """Sample a declared class from the confusion matrix row of the true class."""
    confusion = np.asarray(confusion, dtype=float)
    if not 1 <= true_class <= confusion.shape[0]:
        raise ValueError(f"class id {true_class} outside 1..{confusion.shape[0]}")
    row = confusion[true_class - 1]
    return int(rng.choice(confusion.shape[1], p=row)) + 1


def simulate_scan(
    truth: Sequence[TruthTarget],
    radar: RadarModel,
    esm: EsmModel,
    rng: np.random.Generator,
    k: int = 0,
) -> ScanData:
    """Generate one scan of radar (and optionally ESM) measurements from truth states."""
    radar_list: list[np.ndarray] = []
    chol_r = np.linalg.cholesky(radar.noise_cov) if radar.noise_cov.max() > 0 else None
    for target in truth:
        if rng.random() < radar.p_d:
            z = radar.measure(target.state)
            if chol_r is not None:
                z = z + chol_r @ rng.standard_normal(z.size)
            radar_list.append(z)
    n_clutter = rng.poisson(radar.clutter_rate)
    lo, hi = radar.region[:, 0], radar.region[:, 1]
    for _ in range(n_clutter):
        pos = lo + rng.random(2) * (hi - lo)
        if radar.mode == "range-bearing":
            fake = np.zeros(6)
            fake[0], fake[3] = pos
            radar_list.append(radar.measure(fake))
        else:
            radar_list.append(pos)
    if radar_list:
        radar_meas = np.stack(radar_list)
        radar_meas = radar_meas[rng.permutation(len(radar_list))]
    else:
        radar_meas = np.zeros((0, radar.z_dim))

    bearings: list[float] = []
    classes: list[int] = []
    if esm.enabled:
        sigma_b = math.sqrt(esm.bearing_noise_var)
        for target in truth:
            if rng.random() < esm.p_d:
                bearings.append(wrap_angle(esm.bearing(target.state) + sigma_b * rng.standard_normal()))
                classes.append(declare_class(target.class_id, esm.confusion, rng))
        for _ in range(rng.poisson(esm.clutter_rate)):
            bearings.append(rng.uniform(-math.pi, math.pi))
            classes.append(int(rng.integers(1, esm.n_classes + 1)))
        if bearings:
            order = rng.permutation(len(bearings))
            bearings = [bearings[i] for i in order]
            classes = [classes[i] for i in order]

    return ScanData(
        k=k,
        radar_meas=radar_meas,
        esm_bearings=np.array(bearings, dtype=float),
        esm_classes=np.array(classes, dtype=int),
        truth=tuple(truth),
    )


def radar_likelihood(z: np.ndarray | None, state: np.ndarray, radar: RadarModel) -> float:
    """Single-target radar likelihood: 1 - p_d on a miss, p_d g(z|x) / kappa otherwise."""
    if z is None:
        return 1.0 - radar.p_d
    if radar.p_d == 0.0:
        return 0.0
    predicted = radar.measure(np.asarray(state, dtype=float))
    g = gaussian_density(radar.residual(z, predicted), radar.noise_cov)
    return radar.p_d * g / radar.clutter_density()


def esm_likelihood(
    z: tuple[float, int] | None, state: np.ndarray, class_id: int, esm: EsmModel
) -> float:
    """Single-target ESM likelihood including the class-declaration factor."""
    if z is None:
        return 1.0 - esm.p_d
    if esm.p_d == 0.0:
        return 0.0
    bearing, declared = z
    residual = wrap_angle(bearing - esm.bearing(np.asarray(state, dtype=float)))
    g = gaussian_density(np.array([residual]), np.array([[esm.bearing_noise_var]]))
    declare_prob = esm.confusion[class_id - 1, declared - 1]
    return esm.p_d * g * declare_prob / esm.clutter_density()

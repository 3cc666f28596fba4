"""Scenario definitions, deterministic ground truth, and Monte Carlo orchestration.

Ground truth is noise-free kinematics: class-1 targets fly constant velocity,
the maneuvering target flies constant acceleration (optionally after a
constant-velocity lead-in for the maneuver-onset variant). Process noise only
exists inside the filters' models.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Sequence

import numpy as np

from .baselines import BaselineConfig, DteTracker, EtdTracker
from .cjde import BirthModel, BirthSite, CjdeLmbFilter, FilterConfig
from .metrics import ScanScore, jpm_value, misclassification_rate, ospa
from .motion import ClassModelSet, build_ca_model, build_cv_model
from .rfs import ClassConditionedDensity, Label
from .risk import RiskCoefficients
from .sensing import EsmModel, RadarModel, SensorSuite, TruthTarget, simulate_scan

__all__ = [
    "MotionSegment",
    "TargetSpec",
    "ScenarioConfig",
    "ConfigError",
    "build_example1",
    "build_example2",
    "build_fusion_demo",
    "truth_at_scan",
    "MonteCarloResult",
    "run_monte_carlo",
    "run_single_trial",
]

ALGORITHMS = ("cjde-lmb", "etd", "dte")


class ConfigError(ValueError):
    """Raised for malformed scenario configurations."""


@dataclass(frozen=True)
class MotionSegment:
    """Piece of a truth trajectory: motion kind from a scan offset after birth."""

    start_offset: int
    kind: str  # "cv" | "ca"
    accel: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in ("cv", "ca"):
            raise ConfigError(f"segment kind must be cv or ca, got {self.kind!r}")
        if self.kind == "ca" and self.accel is None:
            raise ConfigError("ca segments need an acceleration")


@dataclass(frozen=True)
class TargetSpec:
    """One true target: lifetime, initial state, class, and motion segments."""

    birth_scan: int
    death_scan: int  # last scan alive, inclusive
    initial_state: tuple[float, ...]  # 6-D [x, vx, ax, y, vy, ay]
    class_id: int
    segments: tuple[MotionSegment, ...] = (MotionSegment(0, "cv"),)

    def __post_init__(self):
        if self.birth_scan >= self.death_scan:
            raise ConfigError("birth scan must precede the death scan")
        if len(self.initial_state) != 6:
            raise ConfigError("initial state must be 6-D")
        if not all(math.isfinite(v) for v in self.initial_state):
            raise ConfigError("initial state must be finite")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "example1"
    scan_period: float = 1.0
    horizon: int = 30
    n_classes: int = 2
    targets: tuple[TargetSpec, ...] = ()
    # sensors
    radar_sigma: float = 2.0
    p_d: float = 0.98
    clutter_rate: float = 10.0
    region: tuple[tuple[float, float], tuple[float, float]] = ((-400.0, 1600.0), (400.0, 2200.0))
    esm_enabled: bool = False
    esm_p_d: float = 0.9
    esm_bearing_sigma_deg: float = 1.0
    esm_confusion: tuple[tuple[float, ...], ...] = ((0.9, 0.1), (0.1, 0.9))
    esm_clutter_rate: float = 1.0
    # dynamics
    p_s: float = 0.98
    sigma_v2: float = 1.0
    sigma_a2: float = 10.0
    model_switch: tuple[tuple[float, ...], ...] = ((0.7, 0.3), (0.3, 0.7))
    # births
    birth_prob: float = 0.02
    birth_means: tuple[tuple[float, ...], ...] = (
        (-200.0, 50.0, 0.0, 700.0, 0.0, 0.0),
        (-200.0, 40.0, 0.0, 1000.0, 30.0, 0.0),
        (0.0, 20.0, 4.0, 1900.0, -15.0, -3.0),
    )
    birth_cov_diag: tuple[float, ...] = (100.0, 10.0, 1.0, 100.0, 10.0, 1.0)
    # risk
    alpha: float = 20.0
    beta: float = 1.0
    gamma: float = 100.0
    # metrics
    ospa_cutoff: float = 100.0
    ospa_order: float = 2.0
    # harness
    algorithm: str = "cjde-lmb"
    trials: int = 100
    master_seed: int = 20260810
    # filter knobs
    gate_chi2: float = 9.21
    k_best: int = 100
    extract_existence: float = 0.45
    joint_decision_limit: int = 6
    paper_miss_existence: bool = False

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm: expected one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.horizon < 1:
            raise ConfigError("horizon: must be at least 1 scan")
        if self.trials < 1:
            raise ConfigError("trials: must be at least 1")
        if not 0.0 <= self.p_d <= 1.0:
            raise ConfigError("p_d: must lie in [0, 1]")
        if not 0.0 < self.p_s <= 1.0:
            raise ConfigError("p_s: must lie in (0, 1]")
        if self.gamma < 0.0:
            raise ConfigError("gamma: must be nonnegative")
        if self.gamma == 0.0:
            warnings.warn("gamma=0 disables the cardinality channel of the risk")
        for t, target in enumerate(self.targets):
            if target.death_scan > self.horizon:
                raise ConfigError(f"targets[{t}]: death scan beyond the horizon")
            if not 1 <= target.class_id <= self.n_classes:
                raise ConfigError(f"targets[{t}]: class id outside 1..{self.n_classes}")

    # -- assembly helpers ---------------------------------------------------

    def radar_model(self) -> RadarModel:
        H = np.zeros((2, 6))
        H[0, 0] = 1.0
        H[1, 3] = 1.0
        return RadarModel(
            mode="linear-position",
            H=H,
            noise_cov=np.eye(2) * self.radar_sigma**2,
            p_d=self.p_d,
            clutter_rate=self.clutter_rate,
            region=np.array(self.region),
        )

    def esm_model(self) -> EsmModel:
        return EsmModel(
            bearing_noise_var=math.radians(self.esm_bearing_sigma_deg) ** 2,
            p_d=self.esm_p_d,
            confusion=np.array(self.esm_confusion),
            enabled=self.esm_enabled,
            clutter_rate=self.esm_clutter_rate,
        )

    def sensors(self) -> SensorSuite:
        return SensorSuite(radar=self.radar_model(), esm=self.esm_model())

    def model_sets(self) -> dict[int, ClassModelSet]:
        cv = build_cv_model(self.scan_period, self.sigma_v2)
        ca = build_ca_model(self.scan_period, self.sigma_a2)
        sets = {1: ClassModelSet(1, (cv,), np.array([[1.0]]))}
        if self.n_classes >= 2:
            sets[2] = ClassModelSet(2, (cv, ca), np.array(self.model_switch))
        if self.n_classes > 2:
            raise ConfigError("n_classes: only 1 or 2 classes are configured")
        return sets

    def models_per_class(self) -> list[int]:
        return [1, 2][: self.n_classes]

    def birth_model(self) -> BirthModel:
        class_probs = np.full(self.n_classes, 1.0 / self.n_classes)
        cov = np.diag(self.birth_cov_diag)
        sites = tuple(
            BirthSite(
                slot=i,
                existence=self.birth_prob,
                density=ClassConditionedDensity.from_single_gaussian(
                    np.array(mean), cov, class_probs, self.models_per_class()
                ),
            )
            for i, mean in enumerate(self.birth_means)
        )
        return BirthModel(sites)

    def coefficients(self) -> RiskCoefficients:
        return RiskCoefficients.uniform(self.alpha, self.beta, self.gamma, self.n_classes)

    def filter_config(self) -> FilterConfig:
        return FilterConfig(
            gate_chi2=self.gate_chi2,
            k_best=self.k_best,
            extract_existence=self.extract_existence,
            joint_decision_limit=self.joint_decision_limit,
            paper_miss_existence=self.paper_miss_existence,
        )

    # -- (de)serialization ----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "ScenarioConfig":
        data = dict(data)
        targets = []
        for t in data.pop("targets", ()):
            t = dict(t)
            segments = tuple(
                MotionSegment(
                    start_offset=s["start_offset"],
                    kind=s["kind"],
                    accel=tuple(s["accel"]) if s.get("accel") is not None else None,
                )
                for s in t.pop("segments", [{"start_offset": 0, "kind": "cv", "accel": None}])
            )
            targets.append(
                TargetSpec(
                    birth_scan=t["birth_scan"],
                    death_scan=t["death_scan"],
                    initial_state=tuple(t["initial_state"]),
                    class_id=t["class_id"],
                    segments=segments,
                )
            )
        known = {f for f in ScenarioConfig.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        for key in ("region", "esm_confusion", "model_switch", "birth_means"):
            if key in data:
                data[key] = tuple(tuple(row) for row in data[key])
        if "birth_cov_diag" in data:
            data["birth_cov_diag"] = tuple(data["birth_cov_diag"])
        return ScenarioConfig(targets=tuple(targets), **data)


# ---------------------------------------------------------------------------
# Canonical scenarios


def _example_targets(maneuver_onset: bool) -> tuple[TargetSpec, ...]:
    target3_segments: tuple[MotionSegment, ...]
    if maneuver_onset:
        # The maneuvering target flies CV for its first five scans, then pulls
        # the constant acceleration.
        target3_segments = (MotionSegment(0, "cv"), MotionSegment(5, "ca", (4.0, -3.0)))
    else:
        target3_segments = (MotionSegment(0, "ca", (4.0, -3.0)),)
    return (
        TargetSpec(
            birth_scan=1,
            death_scan=30,
            initial_state=(-200.0, 50.0, 0.0, 700.0, 0.0, 0.0),
            class_id=1,
        ),
        TargetSpec(
            birth_scan=5,
            death_scan=25,
            initial_state=(-200.0, 40.0, 0.0, 1000.0, 30.0, 0.0),
            class_id=1,
        ),
        TargetSpec(
            birth_scan=3,
            death_scan=27,
            initial_state=(0.0, 20.0, 4.0, 1900.0, -15.0, -3.0),
            class_id=2,
            segments=target3_segments,
        ),
    )


def build_example1(trials: int = 100, seed: int = 20260810) -> ScenarioConfig:
    """Three-target scenario: two constant-velocity targets plus one maneuvering."""
    return ScenarioConfig(
        name="example1",
        targets=_example_targets(maneuver_onset=False),
        trials=trials,
        master_seed=seed,
    )


def build_example2(
    gamma: float, trials: int = 100, seed: int = 20260810, maneuver_onset: bool = True
) -> ScenarioConfig:
    """Example 1 with the cardinality weight overridden (maneuver-onset variant by default)."""
    cfg = ScenarioConfig(
        name="example2",
        targets=_example_targets(maneuver_onset=maneuver_onset),
        gamma=gamma,
        trials=trials,
        master_seed=seed,
    )
    if gamma == 0.0:
        warnings.warn("gamma=0 disables the cardinality channel of the risk")
    return cfg


def build_fusion_demo(trials: int = 100, seed: int = 20260810) -> ScenarioConfig:
    """Example 1 trajectories observed by radar plus an enabled ESM sensor."""
    return ScenarioConfig(
        name="fusion-demo",
        targets=_example_targets(maneuver_onset=False),
        esm_enabled=True,
        trials=trials,
        master_seed=seed,
    )


def builtin_scenario(name: str, gamma: float | None = None) -> ScenarioConfig:
    if name == "example1":
        cfg = build_example1()
    elif name == "example2":
        cfg = build_example2(gamma if gamma is not None else 100.0)
        return cfg
    elif name == "fusion-demo":
        cfg = build_fusion_demo()
    else:
        raise ConfigError(f"unknown scenario {name!r}")
    if gamma is not None:
        cfg = replace_gamma(cfg, gamma)
    return cfg


def replace_gamma(cfg: ScenarioConfig, gamma: float) -> ScenarioConfig:
    from dataclasses import replace

    return replace(cfg, gamma=gamma)


# ---------------------------------------------------------------------------
# Ground truth


def _segment_for(target: TargetSpec, k: int) -> MotionSegment:
    active = target.segments[0]
    for seg in target.segments:
        if target.birth_scan + seg.start_offset <= k:
            active = seg
    return active


def _apply_segment_accel(state: np.ndarray, seg: MotionSegment) -> None:
    if seg.kind == "cv":
        state[[2, 5]] = 0.0
    elif seg.accel is not None and np.all(state[[2, 5]] == 0.0):
        state[[2, 5]] = seg.accel


def truth_at_scan(config: ScenarioConfig, k: int) -> list[TruthTarget]:
    """Deterministic truth states at scan k (1-based)."""
    out = []
    for idx, target in enumerate(config.targets):
        if not target.birth_scan <= k <= target.death_scan:
            continue
        state = np.array(target.initial_state, dtype=float)
        _apply_segment_accel(state, target.segments[0])
        for scan in range(target.birth_scan, k):
            seg = _segment_for(target, scan)
            _apply_segment_accel(state, seg)
            T = config.scan_period
            if seg.kind == "ca":
                ax, ay = state[2], state[5]
                state[0] += state[1] * T + 0.5 * ax * T**2
                state[1] += ax * T
                state[3] += state[4] * T + 0.5 * ay * T**2
                state[4] += ay * T
            else:
                state[0] += state[1] * T
                state[3] += state[4] * T
        _apply_segment_accel(state, _segment_for(target, k))
        label = Label(target.birth_scan, idx)
        out.append(TruthTarget(state=state, class_id=target.class_id, label=label))
    return out


# ---------------------------------------------------------------------------
# Monte Carlo harness


@dataclass(frozen=True)
class MonteCarloResult:
    config: ScenarioConfig
    rows: tuple[dict[str, Any], ...]  # one per scan: aggregated means
    raw: tuple[tuple[ScanScore, ...], ...]  # per trial per scan
    failures: int


def _score_scan(
    config: ScenarioConfig,
    k: int,
    truth: Sequence[TruthTarget],
    est_positions: Sequence[np.ndarray],
    est_classes: Sequence[int],
    coeffs: RiskCoefficients,
) -> ScanScore:
    truth_pos = [t.position for t in truth]
    truth_cls = [t.class_id for t in truth]
    dist = ospa(truth_pos, est_positions, config.ospa_cutoff, config.ospa_order)
    mis = misclassification_rate(
        est_positions, est_classes, truth_pos, truth_cls, config.ospa_cutoff, config.ospa_order
    )
    score = ScanScore(
        k=k,
        true_n=len(truth),
        est_n=len(est_positions),
        ospa=dist,
        miscls=mis,
        jpm=jpm_value(mis, dist, len(est_positions) - len(truth), coeffs),
    )
    return score


def run_single_trial(config: ScenarioConfig, trial: int) -> tuple[ScanScore, ...]:
    """One seeded trial of the configured algorithm over the full horizon."""
    rng = np.random.default_rng(config.master_seed + trial)
    sensors = config.sensors()
    model_sets = config.model_sets()
    coeffs = config.coefficients()

    if config.algorithm == "cjde-lmb":
        filt = CjdeLmbFilter(
            model_sets=model_sets,
            sensors=sensors,
            birth_model=config.birth_model(),
            coeffs=coeffs,
            p_s=config.p_s,
            config=config.filter_config(),
        )
    elif config.algorithm == "etd":
        filt = EtdTracker(
            model_sets,
            sensors.radar,
            BaselineConfig(gate_chi2=config.gate_chi2, scan_period=config.scan_period),
        )
    else:
        filt = DteTracker(
            model_sets,
            sensors.radar,
            coeffs,
            BaselineConfig(gate_chi2=config.gate_chi2, scan_period=config.scan_period),
        )

    scores: list[ScanScore] = []
    for k in range(1, config.horizon + 1):
        truth = truth_at_scan(config, k)
        scan = simulate_scan(truth, sensors.radar, sensors.esm, rng, k=k)
        if config.algorithm == "cjde-lmb":
            result = filt.step(scan)
            positions = [e.position for e in result.estimates]
            classes = [e.decided_class for e in result.estimates]
        else:
            confirmed = filt.step(scan)
            positions = [t.position() for t in confirmed]
            classes = [t.decided_class for t in confirmed]
        if any(not np.all(np.isfinite(p)) for p in positions):
            raise FloatingPointError(f"non-finite estimate at scan {k}")
        scores.append(_score_scan(config, k, truth, positions, classes, coeffs))
    return tuple(scores)


def _trial_worker(args: tuple[dict[str, Any], int]):
    config_dict, trial = args
    config = ScenarioConfig.from_dict(config_dict)
    try:
        return trial, run_single_trial(config, trial), None
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        return trial, None, str(exc)


def run_monte_carlo(config: ScenarioConfig, threads: int | None = None) -> MonteCarloResult:
    """Run the configured number of seeded trials and aggregate per-scan means.

    Trial t draws its own RNG stream from master_seed + t, so results are
    identical for any worker count. Trials whose filter diverges are excluded
    from the means and counted in the failure column.
    """
    config.validate()
    jobs = [(config.to_dict(), t) for t in range(config.trials)]
    results: list[tuple[int, tuple[ScanScore, ...] | None, str | None]] = []
    if threads is not None and threads <= 1:
        results = [_trial_worker(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_trial_worker, jobs))
    results.sort(key=lambda r: r[0])

    raw = tuple(r[1] for r in results if r[1] is not None)
    failures = sum(1 for r in results if r[1] is None)
    rows = aggregate_scores(config, raw, failures)
    return MonteCarloResult(config=config, rows=rows, raw=raw, failures=failures)


def aggregate_scores(
    config: ScenarioConfig, raw: Sequence[Sequence[ScanScore]], failures: int = 0
) -> tuple[dict[str, Any], ...]:
    rows = []
    n_trials = len(raw)
    for i in range(config.horizon):
        k = i + 1
        true_n = len(truth_at_scan(config, k))
        if n_trials:
            est_n = float(np.mean([trial[i].est_n for trial in raw]))
            mean_ospa = float(np.mean([trial[i].ospa for trial in raw]))
            mean_mis = float(np.mean([trial[i].miscls for trial in raw]))
            mean_jpm = float(np.mean([trial[i].jpm for trial in raw]))
        else:
            est_n = mean_ospa = mean_mis = mean_jpm = float("nan")
        rows.append(
            {
                "scan": k,
                "true_n": true_n,
                "mean_est_n": est_n,
                "mean_ospa": mean_ospa,
                "mean_miscls": mean_mis,
                "mean_jpm": mean_jpm,
                "trials": n_trials,
                "failures": failures,
            }
        )
    return tuple(rows)

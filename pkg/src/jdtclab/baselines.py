"""Comparison trackers: estimation-then-decision and decision-then-estimation.

Both run global-nearest-neighbor association with M-of-N track management on
radar measurements only. ETD tracks with one IMM bank over the union of all
classes' motion models and classifies afterwards from per-class measurement
likelihoods; DTE first decides the class by minimum Bayes decision risk and
then updates the state with the decided class's model bank only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .association import gnn_assign
from .kalman import kalman_update
from .motion import ClassModelSet
from .risk import RiskCoefficients
from .sensing import RadarModel, ScanData

__all__ = [
    "BaselineConfig",
    "ImmBank",
    "GnnTrack",
    "Tentative",
    "etd_step",
    "dte_step",
    "EtdTracker",
    "DteTracker",
]


@dataclass(frozen=True)
class BaselineConfig:
    gate_chi2: float = 9.21
    confirm_hits: int = 2  # M of N confirmation after two-point initiation
    confirm_window: int = 3
    delete_misses: int = 3
    max_speed: float = 120.0  # pairing window for two-point initiation (m/s)
    pair_slack: float = 12.0  # measurement noise margin on the pairing radius (m)
    tentative_scans: int = 2  # how long an unpaired first detection survives
    scan_period: float = 1.0
    init_acc_var: float = 25.0
    recursive_belief: bool = True  # smooth the class belief over scans
    min_class_prob: float = 1e-6


@dataclass(eq=False)
class ImmBank:
    """Bank of model-matched Kalman filters with Markov switching."""

    model_set: ClassModelSet
    means: np.ndarray  # (M, 6)
    covs: np.ndarray  # (M, 6, 6)
    probs: np.ndarray  # (M,)

    @staticmethod
    def from_state(model_set: ClassModelSet, mean: np.ndarray, cov: np.ndarray) -> "ImmBank":
        M = model_set.n_models
        return ImmBank(
            model_set=model_set,
            means=np.tile(mean, (M, 1)),
            covs=np.tile(cov, (M, 1, 1)),
            probs=np.full(M, 1.0 / M),
        )

    def predict(self) -> None:
        M = self.model_set.n_models
        if M > 1:
            pi = self.model_set.switch_matrix
            mu_plus = self.probs @ pi
            mixing = pi * self.probs[:, None] / np.maximum(mu_plus[None, :], 1e-300)
            mixed_means = mixing.T @ self.means
            mixed_covs = np.zeros_like(self.covs)
            for m in range(M):
                for i in range(M):
                    diff = self.means[i] - mixed_means[m]
                    mixed_covs[m] += mixing[i, m] * (self.covs[i] + np.outer(diff, diff))
            self.means, self.covs, self.probs = mixed_means, mixed_covs, mu_plus
        for m, model in enumerate(self.model_set.models):
            F, Q = model.transition, model.process_noise
            self.means[m] = F @ self.means[m]
            self.covs[m] = F @ self.covs[m] @ F.T + Q
            self.covs[m] = 0.5 * (self.covs[m] + self.covs[m].T)

    def combined(self) -> tuple[np.ndarray, np.ndarray]:
        mean = self.probs @ self.means
        cov = np.zeros_like(self.covs[0])
        for mu, m, P in zip(self.probs, self.means, self.covs):
            diff = m - mean
            cov += mu * (P + np.outer(diff, diff))
        return mean, cov

    def meas_likelihood(self, z: np.ndarray, H: np.ndarray, R: np.ndarray) -> float:
        """Model-probability weighted predicted measurement likelihood."""
        from .kalman import innovation_likelihood

        total = 0.0
        for mu, m, P in zip(self.probs, self.means, self.covs):
            S = H @ P @ H.T + R
            total += mu * innovation_likelihood(z - H @ m, S)
        return total

    def update(self, z: np.ndarray, H: np.ndarray, R: np.ndarray) -> None:
        M = self.model_set.n_models
        likes = np.zeros(M)
        for m in range(M):
            likes[m], self.means[m], self.covs[m] = kalman_update(
                self.means[m], self.covs[m], z - H @ self.means[m], H, R
            )
        post = self.probs * np.maximum(likes, 1e-300)
        self.probs = post / post.sum()


@dataclass(eq=False)
class Tentative:
    """A first detection waiting for a second one inside the speed window."""

    z: np.ndarray
    age: int = 0


@dataclass(eq=False)
class GnnTrack:
    """Baseline track: per-class filter banks, class belief, and life-cycle counters."""

    label: int
    banks: list[ImmBank]  # one bank per class (ETD: a single union bank)
    class_belief: np.ndarray
    hits: int = 0  # detections after two-point initiation
    age: int = 0  # scans since initiation
    miss_streak: int = 0
    confirmed: bool = False
    decided_class: int = 1

    def _bank(self, class_id: int | None) -> ImmBank:
        if len(self.banks) == 1:  # ETD: one union bank
            return self.banks[0]
        return self.banks[(class_id or self.decided_class) - 1]

    def position(self, class_id: int | None = None) -> np.ndarray:
        mean, _ = self._bank(class_id).combined()
        return mean[[0, 3]]

    def state(self, class_id: int | None = None) -> np.ndarray:
        return self._bank(class_id).combined()[0]


def _union_model_set(model_sets: Mapping[int, ClassModelSet]) -> ClassModelSet:
    """Union (by model name) of every class's motion models.

    The switch matrix is reused from a class whose bank matches the union
    exactly; otherwise a mildly sticky default is built.
    """
    seen = {}
    unique = []
    for j in sorted(model_sets):
        for m in model_sets[j].models:
            if m.name not in seen:
                seen[m.name] = m
                unique.append(m)
    names = tuple(m.name for m in unique)
    for j in sorted(model_sets):
        if tuple(m.name for m in model_sets[j].models) == names:
            return ClassModelSet(class_id=0, models=tuple(unique), switch_matrix=model_sets[j].switch_matrix)
    n = len(unique)
    if n == 1:
        switch = np.array([[1.0]])
    else:
        switch = np.full((n, n), 0.3 / (n - 1)) + np.eye(n) * (0.7 - 0.3 / (n - 1))
        switch = switch / switch.sum(axis=1, keepdims=True)
    return ClassModelSet(class_id=0, models=tuple(unique), switch_matrix=switch)


def _new_track(
    label: int,
    z_first: np.ndarray,
    z_second: np.ndarray,
    dt: float,
    radar: RadarModel,
    model_sets: Mapping[int, ClassModelSet],
    cfg: BaselineConfig,
    mode: str,
) -> GnnTrack:
    """Two-point initiation: velocity from differencing the founding pair."""
    vel = (z_second - z_first) / dt
    mean = np.zeros(6)
    mean[0], mean[3] = z_second
    mean[1], mean[4] = vel
    vel_var = 2.0 * radar.noise_cov[0, 0] / dt**2 + cfg.init_acc_var * dt**2
    cov = np.diag(
        [
            radar.noise_cov[0, 0],
            vel_var,
            cfg.init_acc_var,
            radar.noise_cov[1, 1],
            vel_var,
            cfg.init_acc_var,
        ]
    )
    n_classes = len(model_sets)
    if mode == "etd":
        union = _union_model_set(model_sets)
        banks = [ImmBank.from_state(union, mean, cov)]
    else:
        banks = [ImmBank.from_state(model_sets[j], mean, cov) for j in sorted(model_sets)]
    return GnnTrack(
        label=label,
        banks=banks,
        class_belief=np.full(n_classes, 1.0 / n_classes),
    )


def _gnn_associate(
    tracks: Sequence[GnnTrack], scan: ScanData, radar: RadarModel, cfg: BaselineConfig
) -> dict[int, int]:
    if not tracks or scan.n_radar == 0:
        return {}
    H, R = radar.H, radar.noise_cov
    cost = np.zeros((len(tracks), scan.n_radar))
    for i, track in enumerate(tracks):
        mean, cov = _reference_bank(track).combined()
        S = H @ cov @ H.T + R
        S_inv = np.linalg.inv(S)
        z_pred = H @ mean
        for a in range(scan.n_radar):
            res = scan.radar_meas[a] - z_pred
            cost[i, a] = float(res @ S_inv @ res)
    return gnn_assign(cost, gate=cfg.gate_chi2)


def _reference_bank(track: GnnTrack) -> ImmBank:
    # ETD tracks carry one union bank; DTE tracks associate with the decided class's bank.
    if len(track.banks) == 1:
        return track.banks[0]
    return track.banks[track.decided_class - 1]


def _class_likelihoods_etd(track: GnnTrack, z, radar: RadarModel, model_sets) -> np.ndarray:
    """Per-class likelihoods from the union bank's model-matched components.

    Class j's likelihood mixes the union-bank models belonging to class j,
    renormalizing that class's model probabilities.
    """
    bank = track.banks[0]
    H, R = radar.H, radar.noise_cov
    from .kalman import innovation_likelihood

    model_names = [m.name for m in bank.model_set.models]
    by_name = {}
    for name, mu, mean, cov in zip(model_names, bank.probs, bank.means, bank.covs):
        S = H @ cov @ H.T + R
        by_name[name] = (mu, innovation_likelihood(z - H @ mean, S))
    likes = np.zeros(len(model_sets))
    for j in sorted(model_sets):
        weights = np.array([by_name[m.name][0] for m in model_sets[j].models])
        vals = np.array([by_name[m.name][1] for m in model_sets[j].models])
        weights = weights / weights.sum() if weights.sum() > 0 else np.full(len(vals), 1.0 / len(vals))
        likes[j - 1] = float(weights @ vals)
    return likes


def _life_cycle(tracks: list[GnnTrack], assigned: set[int], cfg: BaselineConfig) -> list[GnnTrack]:
    survivors = []
    for i, track in enumerate(tracks):
        track.age += 1
        if i in assigned:
            track.hits += 1
            track.miss_streak = 0
        else:
            track.miss_streak += 1
        if not track.confirmed:
            if track.hits >= cfg.confirm_hits:
                track.confirmed = True
            elif track.age >= cfg.confirm_window:
                continue  # failed M-of-N confirmation
        if track.confirmed and track.miss_streak >= cfg.delete_misses:
            continue
        survivors.append(track)
    return survivors


def _initiate(
    tracks: list[GnnTrack],
    tentatives: list[Tentative],
    unused: list[np.ndarray],
    radar: RadarModel,
    model_sets: Mapping[int, ClassModelSet],
    cfg: BaselineConfig,
    mode: str,
    next_label: int,
) -> tuple[list[Tentative], int]:
    """Pair unassigned measurements with pending first detections, else store them."""
    remaining = list(unused)
    kept: list[Tentative] = []
    for tent in tentatives:
        tent.age += 1
        radius = tent.age * cfg.max_speed * cfg.scan_period + cfg.pair_slack
        best, best_dist = None, radius
        for idx, z in enumerate(remaining):
            dist = float(np.linalg.norm(z - tent.z))
            if dist <= best_dist:
                best, best_dist = idx, dist
        if best is not None:
            z = remaining.pop(best)
            dt = tent.age * cfg.scan_period
            tracks.append(_new_track(next_label, tent.z, z, dt, radar, model_sets, cfg, mode))
            next_label += 1
        elif tent.age < cfg.tentative_scans:
            kept.append(tent)
    kept.extend(Tentative(z=z) for z in remaining)
    return kept, next_label


def etd_step(
    tracks: list[GnnTrack],
    scan: ScanData,
    model_sets: Mapping[int, ClassModelSet],
    radar: RadarModel,
    cfg: BaselineConfig = BaselineConfig(),
    next_label: int = 0,
    tentatives: list[Tentative] | None = None,
) -> tuple[list[GnnTrack], list[Tentative], int]:
    """One estimation-then-decision scan: GNN + union-IMM tracking, then classify."""
    tentatives = [] if tentatives is None else tentatives
    for track in tracks:
        for bank in track.banks:
            bank.predict()
    assignment = _gnn_associate(tracks, scan, radar, cfg)
    for i, track in enumerate(tracks):
        if i not in assignment:
            continue
        z = scan.radar_meas[assignment[i]]
        likes = _class_likelihoods_etd(track, z, radar, model_sets)
        if cfg.recursive_belief:
            belief = track.class_belief * np.maximum(likes, cfg.min_class_prob)
            track.class_belief = belief / belief.sum()
        else:
            likes = np.maximum(likes, cfg.min_class_prob)
            track.class_belief = likes / likes.sum()
        track.banks[0].update(z, radar.H, radar.noise_cov)
        track.decided_class = int(np.argmax(track.class_belief)) + 1
    tracks = _life_cycle(tracks, set(assignment), cfg)
    used = set(assignment.values())
    unused = [scan.radar_meas[a] for a in range(scan.n_radar) if a not in used]
    tentatives, next_label = _initiate(
        tracks, tentatives, unused, radar, model_sets, cfg, "etd", next_label
    )
    return tracks, tentatives, next_label


def dte_step(
    tracks: list[GnnTrack],
    scan: ScanData,
    model_sets: Mapping[int, ClassModelSet],
    radar: RadarModel,
    coeffs: RiskCoefficients,
    cfg: BaselineConfig = BaselineConfig(),
    next_label: int = 0,
    tentatives: list[Tentative] | None = None,
) -> tuple[list[GnnTrack], list[Tentative], int]:
    """One decision-then-estimation scan: decide the class first, then track with it.

    The decision minimizes the alpha-weighted Bayes decision risk
    sum_j c_ij L(z|H^j) P(H^j); only the decided class's bank absorbs the
    measurement, the other banks coast.
    """
    tentatives = [] if tentatives is None else tentatives
    for track in tracks:
        for bank in track.banks:
            bank.predict()
    assignment = _gnn_associate(tracks, scan, radar, cfg)
    for i, track in enumerate(tracks):
        if i not in assignment:
            continue
        z = scan.radar_meas[assignment[i]]
        likes = np.array(
            [bank.meas_likelihood(z, radar.H, radar.noise_cov) for bank in track.banks]
        )
        risks = (coeffs.alpha * coeffs.c) @ (likes * track.class_belief)
        track.decided_class = int(np.argmin(risks)) + 1
        belief = track.class_belief * np.maximum(likes, cfg.min_class_prob)
        track.class_belief = belief / belief.sum()
        track.banks[track.decided_class - 1].update(z, radar.H, radar.noise_cov)
    tracks = _life_cycle(tracks, set(assignment), cfg)
    used = set(assignment.values())
    unused = [scan.radar_meas[a] for a in range(scan.n_radar) if a not in used]
    tentatives, next_label = _initiate(
        tracks, tentatives, unused, radar, model_sets, cfg, "dte", next_label
    )
    return tracks, tentatives, next_label


class _BaseTracker:
    def __init__(self, model_sets, radar, cfg: BaselineConfig = BaselineConfig()):
        self.model_sets = dict(model_sets)
        self.radar = radar
        self.cfg = cfg
        self.tracks: list[GnnTrack] = []
        self.tentatives: list[Tentative] = []
        self.next_label = 0

    def confirmed(self) -> list[GnnTrack]:
        return [t for t in self.tracks if t.confirmed]


class EtdTracker(_BaseTracker):
    def step(self, scan: ScanData) -> list[GnnTrack]:
        self.tracks, self.tentatives, self.next_label = etd_step(
            self.tracks,
            scan,
            self.model_sets,
            self.radar,
            self.cfg,
            self.next_label,
            self.tentatives,
        )
        return self.confirmed()


class DteTracker(_BaseTracker):
    def __init__(self, model_sets, radar, coeffs: RiskCoefficients, cfg: BaselineConfig = BaselineConfig()):
        super().__init__(model_sets, radar, cfg)
        self.coeffs = coeffs

    def step(self, scan: ScanData) -> list[GnnTrack]:
        self.tracks, self.tentatives, self.next_label = dte_step(
            self.tracks,
            scan,
            self.model_sets,
            self.radar,
            self.coeffs,
            self.cfg,
            self.next_label,
            self.tentatives,
        )
        return self.confirmed()

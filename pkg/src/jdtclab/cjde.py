"""Conditional labeled multi-Bernoulli filter with decision-conditioned updates.

One scan of the filter runs: predict (survivors plus births), gate and rank
association maps between tracks and the radar/ESM measurement sets, evaluate
the decision-conditioned update for every candidate class-decision set, pick
the minimum-risk decision, and moment-match the winning posterior back to an
LMB density.

A decision set conditions the update through per-track decision regions: a
hypothesis assigning a measurement outside the decided class's region gets
zero weight. Missed detections belong to every region, so the update always
has probability mass left; if numerical corner cases still empty the table
the filter falls back to the miss-only hypothesis and flags the scan.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import chi2

from . import risk as risk_mod
from .association import murty
from .kalman import kalman_update
from .motion import ClassModelSet, predict_class_density
from .rfs import (
    AssociationMap,
    ClassConditionedDensity,
    GaussianComponent,
    GaussianMixture,
    HypothesisWeight,
    Label,
    LmbDensity,
    Track,
    mixture_moments,
    prune_and_merge,
)
from .risk import CandidateEvaluation, DecisionSet, RiskCoefficients, TrackDecisionStats
from .sensing import ScanData, SensorSuite, wrap_angle

__all__ = [
    "BirthSite",
    "BirthModel",
    "FilterConfig",
    "TrackUpdateStats",
    "UpdateOutput",
    "TrackEstimate",
    "StepResult",
    "predict",
    "enumerate_associations",
    "update_conditioned",
    "extract_estimates",
    "CjdeLmbFilter",
]

_MISS = -1
_WEIGHT_FLOOR = 1e-290


@dataclass(frozen=True, eq=False)
class BirthSite:
    """One birth location: label slot, birth probability, and prior density."""

    slot: int
    existence: float
    density: ClassConditionedDensity

    def __post_init__(self):
        if not 0.0 <= self.existence <= 1.0:
            raise ValueError("birth probability must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class BirthModel:
    sites: tuple[BirthSite, ...]

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        slots = [s.slot for s in self.sites]
        if len(set(slots)) != len(slots):
            raise ValueError("birth slots must be distinct")


@dataclass(frozen=True)
class FilterConfig:
    """Tunables of the conditional LMB filter (defaults match the reproduction runs)."""

    gate_chi2: float = 9.21  # chi-square 0.99 quantile, 2 dof
    k_best: int | None = 100
    prune_existence: float = 1e-6
    # Just below the existence a p_d=0.98 track keeps after one missed
    # detection (0.4949), so an isolated miss does not unreport the track.
    extract_existence: float = 0.45
    decision_r_min: float = 0.01
    # Decision regions only gate measurements for established tracks;
    # acquisition-stage tracks (low predicted existence, class priors still
    # flat) update unconditioned so a small cardinality weight cannot veto
    # every birth.
    condition_r_min: float = 0.3
    gm_prune: float = 1e-5
    gm_merge: float = 4.0
    gm_max: int = 20
    joint_decision_limit: int = 6
    paper_miss_existence: bool = False
    check_invariants: bool = False

    def esm_gate(self) -> float:
        if not math.isfinite(self.gate_chi2):
            return math.inf
        return float(chi2.ppf(chi2.cdf(self.gate_chi2, df=2), df=1))


@dataclass(frozen=True, eq=False)
class TrackUpdateStats:
    """Marginal statistics of one track after a decision-conditioned update."""

    label: Label
    decision: int
    existence: float
    class_probs: np.ndarray  # (J,)
    means: np.ndarray  # (J, 6) class-conditional estimates
    covs: np.ndarray  # (J, 6, 6)
    fused_mean: np.ndarray  # (6,) class-probability weighted estimate
    est_costs: np.ndarray  # (J,) estimation cost of each class hypothesis


@dataclass(frozen=True, eq=False)
class UpdateOutput:
    """Decision-conditioned update result: posterior LMB plus the hypothesis table."""

    posterior: LmbDensity
    hypotheses: tuple[HypothesisWeight, ...]
    stats: tuple[TrackUpdateStats, ...]
    card_mean: float
    flagged: bool


@dataclass(frozen=True, eq=False)
class TrackEstimate:
    label: Label
    state: np.ndarray
    class_probs: np.ndarray
    decided_class: int

    @property
    def position(self) -> np.ndarray:
        return self.state[[0, 3]]


@dataclass(frozen=True, eq=False)
class StepResult:
    k: int
    decision: DecisionSet
    posterior: LmbDensity
    n_hat: int
    estimates: tuple[TrackEstimate, ...]
    card_mean: float
    flagged: bool


# ---------------------------------------------------------------------------
# Prediction


def predict(
    prior: LmbDensity,
    births: BirthModel,
    model_sets: Mapping[int, ClassModelSet],
    p_s: float,
    k: int,
    config: FilterConfig = FilterConfig(),
) -> LmbDensity:
    """Survival-scaled prediction of every prior track plus fresh birth tracks."""
    tracks: list[Track] = []
    for track in prior.tracks:
        density, factor = predict_class_density(track.density, model_sets, p_s)
        density = _housekeep_density(density, config)
        tracks.append(Track(track.label, factor * track.existence, density))
    existing = {t.label for t in tracks}
    for site in births.sites:
        label = Label(k, site.slot)
        if label in existing:
            raise RuntimeError(f"birth label {label} collides with a surviving track")
        tracks.append(Track(label, site.existence, site.density))
    return LmbDensity(tuple(tracks))


def _housekeep_density(
    density: ClassConditionedDensity, config: FilterConfig
) -> ClassConditionedDensity:
    banks = tuple(
        tuple(
            prune_and_merge(gm, config.gm_prune, config.gm_merge, config.gm_max)
            for gm in bank
        )
        for bank in density.mixtures
    )
    return ClassConditionedDensity(banks, density.model_probs, density.class_probs)


# ---------------------------------------------------------------------------
# Per-scan precomputation: gating plus per-tuple conditional updates


@dataclass(eq=False)
class _TrackPrecomp:
    label: Label
    r_plus: float
    prior_class_probs: np.ndarray
    tuples: list[tuple[int, int]]  # (radar idx | -1, esm idx | -1); index 0 is the miss tuple
    eta: np.ndarray  # (T, J)
    post_class_probs: np.ndarray  # (T, J)
    means: np.ndarray  # (T, J, 6)
    covs: np.ndarray  # (T, J, 6, 6)
    banks: list[list[tuple[np.ndarray, tuple[GaussianMixture, ...]]]]  # [t][j] -> (model probs, mixtures)
    score: np.ndarray  # (T,) class-marginal tuple likelihoods
    pred_means: np.ndarray  # (J, 6)
    pred_covs: np.ndarray  # (J, 6, 6)
    miss_total: float = 0.0  # (1 - r+) + r+ * score[miss]
    miss_existence: float = 0.0  # posterior existence of a missed track

    @property
    def n_tuples(self) -> int:
        return len(self.tuples)


@dataclass(eq=False)
class _ScanPrecomp:
    tracks: list[_TrackPrecomp]
    scan: ScanData
    sensors: SensorSuite

    @property
    def labels(self) -> list[Label]:
        return [t.label for t in self.tracks]


def _flatten_density(density: ClassConditionedDensity, class_id: int):
    """Class mixture as arrays: weights (model prob folded in), means, covariances, model ids."""
    bank = density.mixtures[class_id - 1]
    probs = density.model_probs[class_id - 1]
    weights, means, covs, model_idx = [], [], [], []
    for m, (mu, gm) in enumerate(zip(probs, bank)):
        for comp in gm.components:
            weights.append(mu * comp.weight)
            means.append(comp.mean)
            covs.append(comp.covariance)
            model_idx.append(m)
    return (
        np.array(weights),
        np.stack(means),
        np.stack(covs),
        np.array(model_idx, dtype=int),
        len(bank),
    )


def _marginal_radar_moments(track: Track, sensors: SensorSuite):
    """Moment-matched predicted radar measurement over classes, models and components."""
    radar = sensors.radar
    zs, Ss, ws = [], [], []
    cp = track.density.class_probs
    for j in range(1, track.density.n_classes + 1):
        weights, means, covs, _, _ = _flatten_density(track.density, j)
        for w, m, P in zip(weights, means, covs):
            H = radar.jacobian(m)
            zs.append(radar.measure(m))
            Ss.append(H @ P @ H.T + radar.noise_cov)
            ws.append(cp[j - 1] * w)
    ws_arr = np.array(ws)
    ws_arr = ws_arr / ws_arr.sum()
    z_mean = sum(w * z for w, z in zip(ws_arr, zs))
    dim = z_mean.size
    S_bar = np.zeros((dim, dim))
    for w, z, S in zip(ws_arr, zs, Ss):
        diff = z - z_mean
        if radar.mode == "range-bearing":
            diff[1] = wrap_angle(diff[1])
        S_bar += w * (S + np.outer(diff, diff))
    return z_mean, S_bar


def _marginal_bearing_moments(track: Track, sensors: SensorSuite):
    esm = sensors.esm
    bs, Ss, ws = [], [], []
    cp = track.density.class_probs
    for j in range(1, track.density.n_classes + 1):
        weights, means, covs, _, _ = _flatten_density(track.density, j)
        for w, m, P in zip(weights, means, covs):
            J = esm.jacobian(m)
            bs.append(esm.bearing(m))
            Ss.append(float((J @ P @ J.T)[0, 0]) + esm.bearing_noise_var)
            ws.append(cp[j - 1] * w)
    ws_arr = np.array(ws)
    ws_arr = ws_arr / ws_arr.sum()
    ref = bs[0]
    unrolled = ref + wrap_angle(np.array(bs) - ref)
    b_mean = float(ws_arr @ unrolled)
    var = float(ws_arr @ (np.array(Ss) + (unrolled - b_mean) ** 2))
    return wrap_angle(b_mean), var


def _gate_indices(track: Track, scan: ScanData, sensors: SensorSuite, gate_chi2: float, esm_gate: float):
    radar_idx: list[int] = []
    if scan.n_radar > 0:
        z_mean, S_bar = _marginal_radar_moments(track, sensors)
        S_inv = np.linalg.inv(S_bar)
        for a in range(scan.n_radar):
            res = sensors.radar.residual(scan.radar_meas[a], z_mean)
            if float(res @ S_inv @ res) <= gate_chi2:
                radar_idx.append(a)
    esm_idx: list[int] = []
    if sensors.esm_enabled and scan.n_esm > 0:
        b_mean, b_var = _marginal_bearing_moments(track, sensors)
        for b in range(scan.n_esm):
            res = wrap_angle(scan.esm_bearings[b] - b_mean)
            if res * res / b_var <= esm_gate:
                esm_idx.append(b)
    return radar_idx, esm_idx


def _tuple_update(
    track: Track,
    tup: tuple[int, int],
    scan: ScanData,
    sensors: SensorSuite,
):
    """Per-class likelihoods and posterior banks of one association tuple.

    The radar and ESM measurements assigned by the tuple are stacked into one
    augmented measurement with block-diagonal noise, so a joint assignment is
    a single Kalman update per mixture component.
    """
    radar, esm = sensors.radar, sensors.esm
    a, b = tup
    n_classes = track.density.n_classes
    etas = np.zeros(n_classes)
    means = np.zeros((n_classes, 6))
    covs = np.zeros((n_classes, 6, 6))
    banks: list[tuple[np.ndarray, tuple[GaussianMixture, ...]]] = []

    # Detection factors common to every class (the ESM declaration factor is not).
    if a == _MISS:
        radar_factor = 1.0 - radar.p_d
    else:
        radar_factor = radar.p_d / radar.clutter_density()
    if not sensors.esm_enabled:
        esm_factor = 1.0
    elif b == _MISS:
        esm_factor = 1.0 - esm.p_d
    else:
        esm_factor = esm.p_d / esm.clutter_density()

    for j in range(1, n_classes + 1):
        weights, comp_means, comp_covs, model_idx, n_models = _flatten_density(track.density, j)
        if a == _MISS and b == _MISS:
            etas[j - 1] = radar_factor * esm_factor
            new_weights = weights
            new_means, new_covs = comp_means, comp_covs
        else:
            qs = np.zeros(len(weights))
            new_means = np.zeros_like(comp_means)
            new_covs = np.zeros_like(comp_covs)
            for n, (m, P) in enumerate(zip(comp_means, comp_covs)):
                rows_H, rows_res, blocks_R = [], [], []
                if a != _MISS:
                    H_r = radar.jacobian(m)
                    rows_H.append(H_r)
                    rows_res.append(radar.residual(scan.radar_meas[a], radar.measure(m)))
                    blocks_R.append(radar.noise_cov)
                if b != _MISS:
                    rows_H.append(esm.jacobian(m))
                    rows_res.append(
                        np.array([wrap_angle(scan.esm_bearings[b] - esm.bearing(m))])
                    )
                    blocks_R.append(np.array([[esm.bearing_noise_var]]))
                H = np.vstack(rows_H)
                residual = np.concatenate(rows_res)
                R = _block_diag(blocks_R)
                qs[n], new_means[n], new_covs[n] = kalman_update(m, P, residual, H, R)
            class_factor = radar_factor * esm_factor
            if b != _MISS:
                class_factor *= esm.confusion[j - 1, scan.esm_classes[b] - 1]
            total_q = float(weights @ qs)
            etas[j - 1] = class_factor * total_q
            new_weights = weights * qs
            if new_weights.sum() <= 0.0:
                # Numerically dead assignment: keep the prediction for moments.
                new_weights = weights
                new_means, new_covs = comp_means, comp_covs

        norm = new_weights / new_weights.sum()
        means[j - 1] = norm @ new_means
        diff = new_means - means[j - 1]
        covs[j - 1] = np.einsum("n,nde->de", norm, new_covs) + np.einsum(
            "n,nd,ne->de", norm, diff, diff
        )
        covs[j - 1] = 0.5 * (covs[j - 1] + covs[j - 1].T)

        model_probs = np.zeros(n_models)
        mixtures: list[GaussianMixture] = []
        for m_id in range(n_models):
            sel = model_idx == m_id
            w_m = new_weights[sel]
            model_probs[m_id] = w_m.sum() / new_weights.sum()
            if w_m.sum() <= 0.0:
                w_m = np.full(sel.sum(), 1.0 / max(sel.sum(), 1))
            comps = tuple(
                GaussianComponent(w, mu, P)
                for w, mu, P in zip(w_m / w_m.sum(), new_means[sel], new_covs[sel])
            )
            mixtures.append(GaussianMixture(comps))
        banks.append((model_probs, tuple(mixtures)))

    return etas, means, covs, banks


def _block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    dims = [np.atleast_2d(b).shape[0] for b in blocks]
    out = np.zeros((sum(dims), sum(dims)))
    ofs = 0
    for b, d in zip(blocks, dims):
        out[ofs : ofs + d, ofs : ofs + d] = np.atleast_2d(b)
        ofs += d
    return out


def _precompute_track(
    track: Track,
    scan: ScanData,
    sensors: SensorSuite,
    gate_chi2: float,
    esm_gate: float,
    p_s: float,
    paper_miss: bool,
) -> _TrackPrecomp:
    radar_idx, esm_idx = _gate_indices(track, scan, sensors, gate_chi2, esm_gate)
    tuples: list[tuple[int, int]] = [(_MISS, _MISS)]
    tuples += [(a, _MISS) for a in radar_idx]
    if sensors.esm_enabled:
        tuples += [(_MISS, b) for b in esm_idx]
        tuples += [(a, b) for a in radar_idx for b in esm_idx]

    n_tuples = len(tuples)
    n_classes = track.density.n_classes
    eta = np.zeros((n_tuples, n_classes))
    means = np.zeros((n_tuples, n_classes, 6))
    covs = np.zeros((n_tuples, n_classes, 6, 6))
    banks = []
    for t, tup in enumerate(tuples):
        eta[t], means[t], covs[t], bank = _tuple_update(track, tup, scan, sensors)
        banks.append(bank)

    cp = track.density.class_probs
    score = eta @ cp
    pcp = eta * cp[None, :]
    row_sums = pcp.sum(axis=1)
    dead = row_sums <= 0.0
    pcp[dead] = cp[None, :]
    row_sums[dead] = 1.0
    pcp = pcp / row_sums[:, None]

    pred_means = means[0].copy()
    pred_covs = covs[0].copy()

    r_plus = track.existence
    miss_total = (1.0 - r_plus) + r_plus * score[0]
    if miss_total <= 0.0:
        miss_existence = 0.0
    elif paper_miss:
        pdr = sensors.radar.p_d
        pde = sensors.esm.p_d if sensors.esm_enabled else 1.0
        denom = p_s * (1.0 - pdr * pde) + (1.0 - p_s)
        miss_existence = min((r_plus / max(p_s, 1e-12)) * p_s * pdr * pde / max(denom, 1e-12), 1.0)
    else:
        miss_existence = r_plus * score[0] / miss_total

    return _TrackPrecomp(
        label=track.label,
        r_plus=r_plus,
        prior_class_probs=cp,
        tuples=tuples,
        eta=eta,
        post_class_probs=pcp,
        means=means,
        covs=covs,
        banks=banks,
        score=score,
        pred_means=pred_means,
        pred_covs=pred_covs,
        miss_total=miss_total,
        miss_existence=miss_existence,
    )


def _precompute(
    predicted: LmbDensity,
    scan: ScanData,
    sensors: SensorSuite,
    config: FilterConfig,
    p_s: float = 1.0,
) -> _ScanPrecomp:
    esm_gate = config.esm_gate()
    tracks = [
        _precompute_track(
            t, scan, sensors, config.gate_chi2, esm_gate, p_s, config.paper_miss_existence
        )
        for t in predicted.tracks
    ]
    return _ScanPrecomp(tracks=tracks, scan=scan, sensors=sensors)


# ---------------------------------------------------------------------------
# Ranked association maps


def _side_cost_matrix(pre: _ScanPrecomp, side: str) -> tuple[np.ndarray, list[list[int]]]:
    """Murty cost matrix of one sensor side: columns are measurements then per-track miss."""
    n_tracks = len(pre.tracks)
    n_meas = pre.scan.n_radar if side == "radar" else pre.scan.n_esm
    cost = np.full((n_tracks, n_meas + n_tracks), np.inf)
    tuple_cols: list[list[int]] = []
    for i, tp in enumerate(pre.tracks):
        cols = [-1] * n_meas
        for t, (a, b) in enumerate(tp.tuples):
            idx = a if side == "radar" else b
            other = b if side == "radar" else a
            if idx != _MISS and other == _MISS:
                weight = tp.r_plus * tp.score[t]
                cost[i, idx] = -math.log(max(weight, _WEIGHT_FLOOR))
                cols[idx] = t
        cost[i, n_meas + i] = -math.log(max(tp.miss_total, _WEIGHT_FLOOR))
        tuple_cols.append(cols)
    cost[np.isinf(cost)] = 1e9
    return cost, tuple_cols


def _side_maps(pre: _ScanPrecomp, side: str, k_best: int | None) -> list[np.ndarray]:
    """Ranked per-side maps as arrays of measurement index (or -1) per track."""
    n_tracks = len(pre.tracks)
    n_meas = pre.scan.n_radar if side == "radar" else pre.scan.n_esm
    if n_tracks == 0:
        return [np.zeros(0, dtype=int)]
    if n_meas == 0 or (side == "esm" and not pre.sensors.esm_enabled):
        return [np.full(n_tracks, _MISS, dtype=int)]
    cost, _ = _side_cost_matrix(pre, side)
    maps: list[np.ndarray] = []
    for assignment, _total in murty(cost, k_best):
        arr = np.where(assignment < n_meas, assignment, _MISS)
        maps.append(arr.astype(int))
    all_miss = np.full(n_tracks, _MISS, dtype=int)
    if not any(np.array_equal(m, all_miss) for m in maps):
        maps.append(all_miss)
    return maps


@dataclass(eq=False)
class _MapTable:
    tid: np.ndarray  # (n_maps, n_tracks) tuple index per track
    base_w: np.ndarray  # (n_maps,) unnormalized exact weights


def _pair_maps(pre: _ScanPrecomp, k_best: int | None) -> _MapTable:
    """Combine ranked radar-side and ESM-side maps, keep the K best exact products."""
    radar_maps = _side_maps(pre, "radar", k_best)
    esm_maps = _side_maps(pre, "esm", k_best)
    n_tracks = len(pre.tracks)
    tuple_index = [
        {tup: t for t, tup in enumerate(tp.tuples)} for tp in pre.tracks
    ]

    rows: list[np.ndarray] = []
    weights: list[float] = []
    for r_map in radar_maps:
        for e_map in esm_maps:
            tid = np.zeros(n_tracks, dtype=int)
            w = 1.0
            valid = True
            for i, tp in enumerate(pre.tracks):
                tup = (int(r_map[i]), int(e_map[i]))
                t = tuple_index[i].get(tup)
                if t is None:
                    valid = False
                    break
                tid[i] = t
                w *= tp.miss_total if t == 0 else tp.r_plus * tp.score[t]
            if valid:
                rows.append(tid)
                weights.append(w)
    order = np.argsort(weights)[::-1]
    if k_best is not None:
        keep = list(order[:k_best])
        all_miss_row = next(
            (i for i, tid in enumerate(rows) if np.all(tid == 0)), None
        )
        if all_miss_row is not None and all_miss_row not in keep:
            keep.append(all_miss_row)
        order = keep
    tid = np.stack([rows[i] for i in order]) if rows else np.zeros((1, n_tracks), dtype=int)
    base_w = np.array([weights[i] for i in order]) if rows else np.ones(1)
    return _MapTable(tid=tid, base_w=base_w)


def enumerate_associations(
    predicted: LmbDensity | Sequence[Track],
    scan: ScanData,
    sensors: SensorSuite,
    gate_chi2: float = 9.21,
    k_best: int | None = 100,
) -> list[AssociationMap]:
    """Gated, ranked association maps between predicted tracks and the scan.

    Injective per sensor; the all-miss map is always present; with the gate
    open and ``k_best=None`` the output enumerates the full association space.
    """
    if not isinstance(predicted, LmbDensity):
        predicted = LmbDensity(tuple(predicted))
    config = FilterConfig(gate_chi2=gate_chi2, k_best=k_best)
    pre = _precompute(predicted, scan, sensors, config)
    table = _pair_maps(pre, k_best)
    maps: list[AssociationMap] = []
    for row in table.tid:
        entries = []
        for i, tp in enumerate(pre.tracks):
            a, b = tp.tuples[int(row[i])]
            entries.append(
                (tp.label, (None if a == _MISS else int(a), None if b == _MISS else int(b)))
            )
        maps.append(AssociationMap(tuple(entries)))
    return maps


# ---------------------------------------------------------------------------
# Decision regions and conditioned evaluation


def region_tables(
    pre: _ScanPrecomp, coeffs: RiskCoefficients
) -> list[np.ndarray]:
    """Per-track boolean (n_tuples, J) tables: tuple allowed under decision i.

    Tuple 0 (double miss) is allowed under every decision; any other tuple is
    allowed exactly for the decision whose intermediate cost it minimizes, so
    the regions partition each track's gated measurement set.
    """
    tables = []
    for tp in pre.tracks:
        n_classes = tp.prior_class_probs.size
        ok = np.zeros((tp.n_tuples, n_classes), dtype=bool)
        ok[0, :] = True
        if tp.n_tuples > 1 and n_classes > 1:
            fused = tp.prior_class_probs @ tp.pred_means
            eps_pred = np.array(
                [
                    risk_mod.state_estimation_cost(tp.pred_covs[j], tp.pred_means[j], fused)
                    for j in range(n_classes)
                ]
            )
            cost_mat = coeffs.alpha * coeffs.c + coeffs.beta * eps_pred[None, :]
            weighted = tp.eta[1:] * tp.prior_class_probs[None, :]
            costs = weighted @ cost_mat.T  # (T-1, J): cost of each decision
            decided = np.argmin(costs, axis=1)
            ok[1:][np.arange(tp.n_tuples - 1), decided] = True
        elif tp.n_tuples > 1:
            ok[1:, :] = True
        tables.append(ok)
    return tables


@dataclass(eq=False)
class _Evaluation:
    map_weights: np.ndarray  # normalized, (n_maps,)
    track_stats: list[TrackUpdateStats]
    tuple_weights: list[np.ndarray]  # per track, (n_tuples,)
    card_mean: float
    flagged: bool


def _evaluate(
    pre: _ScanPrecomp,
    table: _MapTable,
    regions: list[np.ndarray] | None,
    decisions: Sequence[int | None],
) -> _Evaluation:
    n_maps, n_tracks = table.tid.shape
    mask = np.ones(n_maps, dtype=float)
    if regions is not None:
        for i, dec in enumerate(decisions):
            if dec is None:
                continue
            mask *= regions[i][table.tid[:, i], dec - 1]
    weights = table.base_w * mask
    total = weights.sum()
    flagged = False
    if total <= 0.0:
        # Decision regions emptied the table: fall back to the all-miss hypothesis.
        flagged = True
        weights = np.where(np.all(table.tid == 0, axis=1), 1.0, 0.0)
        total = weights.sum()
        if total <= 0.0:
            weights = np.zeros(n_maps)
            weights[0] = 1.0
            total = 1.0
    weights = weights / total

    stats: list[TrackUpdateStats] = []
    tuple_weights: list[np.ndarray] = []
    card = 0.0
    for i, tp in enumerate(pre.tracks):
        W = np.bincount(table.tid[:, i], weights=weights, minlength=tp.n_tuples)
        W[0] *= tp.miss_existence
        r = float(W.sum())
        card += r
        dec = decisions[i] if decisions[i] is not None else 1
        n_classes = tp.prior_class_probs.size
        if r <= 1e-300:
            class_probs = tp.prior_class_probs.copy()
            means = tp.pred_means.copy()
            covs = tp.pred_covs.copy()
        else:
            G = W[:, None] * tp.post_class_probs  # (T, J)
            class_mass = G.sum(axis=0)
            class_probs = class_mass / r
            safe = np.maximum(class_mass, 1e-300)
            means = np.einsum("tj,tjd->jd", G, tp.means) / safe[:, None]
            second = np.einsum("tj,tjde->jde", G, tp.covs) + np.einsum(
                "tj,tjd,tje->jde", G, tp.means, tp.means
            )
            covs = second / safe[:, None, None] - np.einsum("jd,je->jde", means, means)
            covs = 0.5 * (covs + np.transpose(covs, (0, 2, 1)))
            zero = class_mass <= 1e-300
            if np.any(zero):
                means[zero] = tp.pred_means[zero]
                covs[zero] = tp.pred_covs[zero]
        fused = class_probs @ means
        est_costs = np.array(
            [
                risk_mod.state_estimation_cost(covs[j], means[j], fused)
                for j in range(n_classes)
            ]
        )
        stats.append(
            TrackUpdateStats(
                label=tp.label,
                decision=dec,
                existence=min(r, 1.0),
                class_probs=class_probs,
                means=means,
                covs=covs,
                fused_mean=fused,
                est_costs=est_costs,
            )
        )
        tuple_weights.append(W)
    return _Evaluation(
        map_weights=weights,
        track_stats=stats,
        tuple_weights=tuple_weights,
        card_mean=card,
        flagged=flagged,
    )


# ---------------------------------------------------------------------------
# Posterior assembly


def _marginal_density(
    tp: _TrackPrecomp, W: np.ndarray, stats: TrackUpdateStats, config: FilterConfig
) -> ClassConditionedDensity:
    """Moment-matched marginal of one track: mix the per-tuple posteriors."""
    n_classes = tp.prior_class_probs.size
    r = W.sum()
    banks: list[tuple[GaussianMixture, ...]] = []
    mprobs: list[np.ndarray] = []
    for j in range(n_classes):
        class_mass = float(W @ tp.post_class_probs[:, j])
        n_models = tp.banks[0][j][0].size
        if r <= 1e-300 or class_mass <= 1e-300:
            banks.append(tuple(tp.banks[0][j][1]))
            mprobs.append(tp.banks[0][j][0])
            continue
        model_mass = np.zeros(n_models)
        model_comps: list[list[GaussianComponent]] = [[] for _ in range(n_models)]
        for t in range(tp.n_tuples):
            omega = W[t] * tp.post_class_probs[t, j] / class_mass
            if omega <= 1e-300:
                continue
            model_probs_t, mixtures_t = tp.banks[t][j]
            for m in range(n_models):
                share = omega * model_probs_t[m]
                if share <= 1e-300:
                    continue
                model_mass[m] += share
                model_comps[m].extend(
                    GaussianComponent(share * c.weight, c.mean, c.covariance)
                    for c in mixtures_t[m].components
                )
        total_mass = model_mass.sum()
        model_probs = model_mass / total_mass if total_mass > 0 else np.full(n_models, 1.0 / n_models)
        mixtures = []
        for m in range(n_models):
            if model_comps[m]:
                gm = GaussianMixture(tuple(model_comps[m])).normalized()
                gm = prune_and_merge(gm, config.gm_prune, config.gm_merge, config.gm_max)
            else:
                gm = tp.banks[0][j][1][m]
            mixtures.append(gm)
        banks.append(tuple(mixtures))
        mprobs.append(model_probs)
    return ClassConditionedDensity(tuple(banks), tuple(mprobs), stats.class_probs)


def _posterior_density(
    pre: _ScanPrecomp, evaluation: _Evaluation, config: FilterConfig, prune: bool = True
) -> LmbDensity:
    tracks = []
    for tp, stats, W in zip(pre.tracks, evaluation.track_stats, evaluation.tuple_weights):
        r = stats.existence
        if prune and r < config.prune_existence:
            continue
        density = _marginal_density(tp, W, stats, config)
        tracks.append(Track(tp.label, r, density))
    return LmbDensity(tuple(tracks))


def _materialize_hypotheses(
    pre: _ScanPrecomp, table: _MapTable, evaluation: _Evaluation
) -> tuple[HypothesisWeight, ...]:
    """Expand per-map weights into explicit (label set, association map) hypotheses."""
    out: dict[tuple[frozenset[Label], AssociationMap], float] = {}
    n_maps, n_tracks = table.tid.shape
    for m in range(n_maps):
        w_map = float(evaluation.map_weights[m])
        if w_map <= 0.0:
            continue
        assigned: list[tuple[int, tuple[int, int]]] = []
        missing: list[int] = []
        for i, tp in enumerate(pre.tracks):
            t = int(table.tid[m, i])
            if t == 0:
                missing.append(i)
            else:
                assigned.append((i, tp.tuples[t]))
        for include in itertools.product((False, True), repeat=len(missing)):
            w = w_map
            labels = [pre.tracks[i].label for i, _ in assigned]
            entries = [
                (
                    pre.tracks[i].label,
                    (None if a == _MISS else a, None if b == _MISS else b),
                )
                for i, (a, b) in assigned
            ]
            for flag, i in zip(include, missing):
                q = pre.tracks[i].miss_existence
                if flag:
                    w *= q
                    labels.append(pre.tracks[i].label)
                    entries.append((pre.tracks[i].label, (None, None)))
                else:
                    w *= 1.0 - q
            if w <= 0.0:
                continue
            key = (frozenset(labels), AssociationMap(tuple(entries)))
            out[key] = out.get(key, 0.0) + w
    return tuple(
        HypothesisWeight(label_set=k[0], assoc=k[1], weight=w) for (k, w) in out.items()
    )


# ---------------------------------------------------------------------------
# Public update and extraction


def update_conditioned(
    predicted: LmbDensity,
    scan: ScanData,
    sensors: SensorSuite,
    coeffs: RiskCoefficients,
    decisions: Mapping[Label, int] | None = None,
    config: FilterConfig = FilterConfig(),
    prune: bool = False,
) -> UpdateOutput:
    """Decision-conditioned LMB update against one scan.

    ``decisions`` maps track labels to class decisions; ``None`` runs the
    unconditioned (all regions inclusive) update, which is also the exact
    behavior for a single-class configuration.
    """
    pre = _precompute(predicted, scan, sensors, config)
    table = _pair_maps(pre, config.k_best)
    if decisions is None:
        decision_vec: list[int | None] = [None] * len(pre.tracks)
    else:
        decision_vec = [decisions.get(tp.label, 1) for tp in pre.tracks]
    regions = region_tables(pre, coeffs)
    evaluation = _evaluate(pre, table, regions, decision_vec)
    posterior = _posterior_density(pre, evaluation, config, prune=prune)
    hypotheses = _materialize_hypotheses(pre, table, evaluation)
    return UpdateOutput(
        posterior=posterior,
        hypotheses=hypotheses,
        stats=tuple(evaluation.track_stats),
        card_mean=evaluation.card_mean,
        flagged=evaluation.flagged,
    )


def extract_estimates(
    posterior: LmbDensity, r_threshold: float = 0.5
) -> tuple[int, list[tuple[Label, np.ndarray, np.ndarray]]]:
    """Cardinality estimate plus fused state estimates of the confident tracks.

    Each reported state is the class-probability weighted mix of the per-class
    mixture means.
    """
    records = []
    for track in posterior.tracks:
        if track.existence > r_threshold:
            cp = track.density.class_probs
            means = np.stack(
                [
                    mixture_moments(track.density.class_mixture(j))[0]
                    for j in range(1, track.density.n_classes + 1)
                ]
            )
            records.append((track.label, cp @ means, cp.copy()))
    return len(records), records


# ---------------------------------------------------------------------------
# The filter


class CjdeLmbFilter:
    """Recursive conditional LMB filter for joint detection, tracking and classification."""

    def __init__(
        self,
        model_sets: Mapping[int, ClassModelSet],
        sensors: SensorSuite,
        birth_model: BirthModel,
        coeffs: RiskCoefficients,
        p_s: float = 0.98,
        config: FilterConfig = FilterConfig(),
    ):
        self.model_sets = dict(model_sets)
        self.sensors = sensors
        self.birth_model = birth_model
        self.coeffs = coeffs
        self.p_s = float(p_s)
        self.config = config
        self.density = LmbDensity(())
        self.flagged_scans: list[int] = []

    def _candidate_vectors(self, n_tracks: int) -> list[tuple[int, ...]]:
        J = self.coeffs.n_classes
        if J == 1 or n_tracks == 0:
            return [tuple([1] * n_tracks)]
        return [tuple(c) for c in itertools.product(range(1, J + 1), repeat=n_tracks)]

    def _track_cost(self, st: TrackUpdateStats, dec: int) -> float:
        # Per-track classification + estimation channel, weighted by the
        # decision-conditioned existence: discarding a track's measurements
        # shrinks these channels and is charged through the gamma term.
        idx = dec - 1
        return st.existence * float(
            (self.coeffs.alpha[idx] * self.coeffs.c[idx] + self.coeffs.beta[idx] * st.est_costs)
            @ st.class_probs
        )

    def _select(
        self,
        pre: _ScanPrecomp,
        table: _MapTable,
        regions: list[np.ndarray],
        unconditioned: _Evaluation,
    ) -> tuple[DecisionSet, _Evaluation]:
        n_tracks = len(pre.tracks)
        J = self.coeffs.n_classes
        card_uncond = unconditioned.card_mean
        evaluations: dict[tuple[int, ...], _Evaluation] = {}

        def evaluate(vec: Sequence[int | None]) -> _Evaluation:
            key = tuple(v if v is not None else 0 for v in vec)
            if key not in evaluations:
                evaluations[key] = _evaluate(pre, table, regions, list(vec))
            return evaluations[key]

        if J == 1 or n_tracks == 0:
            candidates = [tuple([1] * n_tracks)]
        else:
            # A decision only conditions the update when the track has gated
            # measurements; for miss-only tracks the argmin is analytic.
            base: list[int | None] = [None] * n_tracks
            maskable: list[int] = []
            for i, tp in enumerate(pre.tracks):
                if tp.n_tuples == 1:
                    st = unconditioned.track_stats[i]
                    costs = [self._track_cost(st, dec) for dec in range(1, J + 1)]
                    base[i] = int(np.argmin(costs)) + 1
                else:
                    maskable.append(i)
            joint = [i for i in maskable if pre.tracks[i].r_plus >= self.config.decision_r_min]
            sweep = [i for i in maskable if i not in joint]
            if len(joint) > self.config.joint_decision_limit:
                sweep, joint = maskable, []
            # Scaling strategy for the swept tracks: pick each decision
            # independently with every other track unconditioned, coupling
            # through the cardinality term.
            for i in sweep:
                best_dec, best_cost = 1, math.inf
                for dec in range(1, J + 1):
                    vec: list[int | None] = [None] * n_tracks
                    vec[i] = dec
                    ev = evaluate(vec)
                    cost = self._track_cost(ev.track_stats[i], dec) + self.coeffs.gamma * (
                        card_uncond - ev.card_mean
                    )
                    if cost < best_cost - 1e-15:
                        best_dec, best_cost = dec, cost
                base[i] = best_dec
            if joint:
                candidates = []
                for combo in itertools.product(range(1, J + 1), repeat=len(joint)):
                    vec = list(base)
                    for i, dec in zip(joint, combo):
                        vec[i] = dec
                    candidates.append(tuple(vec))
            else:
                candidates = [tuple(base)]

        records = []
        for cand in candidates:
            ev = evaluate(cand)
            records.append(
                CandidateEvaluation(
                    tracks=tuple(
                        TrackDecisionStats(
                            label=st.label,
                            decision=dec,
                            existence=st.existence,
                            class_probs=st.class_probs,
                            est_costs=st.est_costs,
                        )
                        for st, dec in zip(ev.track_stats, cand)
                    ),
                    card_mean=ev.card_mean,
                    card_mean_unconditioned=card_uncond,
                )
            )
        decision = risk_mod.select_decision(records, self.coeffs)
        winning = tuple(dec for _, dec in decision.decisions)
        return decision, evaluations[winning]

    def step(self, scan: ScanData) -> StepResult:
        predicted = predict(
            self.density, self.birth_model, self.model_sets, self.p_s, scan.k, self.config
        )
        pre = _precompute(predicted, scan, self.sensors, self.config, self.p_s)
        table = _pair_maps(pre, self.config.k_best)
        regions = region_tables(pre, self.coeffs)
        for i, tp in enumerate(pre.tracks):
            if tp.r_plus < self.config.condition_r_min:
                regions[i][:] = True
        unconditioned = _evaluate(pre, table, None, [None] * len(pre.tracks))
        decision, evaluation = self._select(pre, table, regions, unconditioned)
        posterior = _posterior_density(pre, evaluation, self.config, prune=True)
        if self.config.check_invariants:
            self._check(evaluation, posterior)
        if evaluation.flagged:
            self.flagged_scans.append(scan.k)
        self.density = posterior

        estimates = []
        decided = decision.as_dict()
        for st in evaluation.track_stats:
            if st.existence > self.config.extract_existence:
                estimates.append(
                    TrackEstimate(
                        label=st.label,
                        state=st.fused_mean,
                        class_probs=st.class_probs,
                        decided_class=decided.get(st.label, 1),
                    )
                )
        return StepResult(
            k=scan.k,
            decision=decision,
            posterior=posterior,
            n_hat=len(estimates),
            estimates=tuple(estimates),
            card_mean=evaluation.card_mean,
            flagged=evaluation.flagged,
        )

    def _check(self, evaluation: _Evaluation, posterior: LmbDensity) -> None:
        total = evaluation.map_weights.sum()
        if abs(total - 1.0) > 1e-9:
            raise AssertionError(f"hypothesis weights sum to {total}")
        for st in evaluation.track_stats:
            if abs(st.class_probs.sum() - 1.0) > 1e-9:
                raise AssertionError(f"class probabilities of {st.label} sum to {st.class_probs.sum()}")
            if not -1e-12 <= st.existence <= 1.0 + 1e-12:
                raise AssertionError(f"existence of {st.label} is {st.existence}")
        for track in posterior.tracks:
            track.density.validate(tol=1e-6)
            for bank in track.density.mixtures:
                for gm in bank:
                    for comp in gm.components:
                        eig_min = np.linalg.eigvalsh(comp.covariance).min()
                        if eig_min < -1e-6:
                            raise AssertionError(f"covariance eigenvalue {eig_min} of {track.label}")

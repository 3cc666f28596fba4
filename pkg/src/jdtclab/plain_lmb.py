"""A plain single-class LMB filter, coded directly from the standard recipe.

This is a deliberately separate, simple implementation (no class hypotheses,
no ESM, no decision conditioning) used to validate that the conditional
filter degenerates to a standard LMB filter when there is a single class.
It shares only low-level kernels (Kalman update, Murty ranking, mixture
housekeeping) with the main filter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .association import murty
from .kalman import kalman_update
from .motion import MotionModel
from .rfs import GaussianComponent, GaussianMixture, Label, mixture_moments, prune_and_merge
from .sensing import RadarModel, ScanData

__all__ = ["PlainBirthSite", "PlainLmbFilter", "PlainTrack"]

_WEIGHT_FLOOR = 1e-290


@dataclass(frozen=True, eq=False)
class PlainBirthSite:
    slot: int
    existence: float
    mean: np.ndarray
    cov: np.ndarray


@dataclass(eq=False)
class PlainTrack:
    label: Label
    existence: float
    mixture: GaussianMixture


class PlainLmbFilter:
    """Standard GM-LMB filter: predict, gate, rank maps, update, moment match."""

    def __init__(
        self,
        model: MotionModel,
        radar: RadarModel,
        births: Sequence[PlainBirthSite],
        p_s: float = 0.98,
        gate_chi2: float = 9.21,
        k_best: int | None = 100,
        prune_existence: float = 1e-3,
        gm_prune: float = 1e-5,
        gm_merge: float = 4.0,
        gm_max: int = 20,
    ):
        self.model = model
        self.radar = radar
        self.births = tuple(births)
        self.p_s = float(p_s)
        self.gate_chi2 = gate_chi2
        self.k_best = k_best
        self.prune_existence = prune_existence
        self.gm_prune = gm_prune
        self.gm_merge = gm_merge
        self.gm_max = gm_max
        self.tracks: list[PlainTrack] = []

    # -- prediction --------------------------------------------------------

    def _predict(self, k: int) -> list[PlainTrack]:
        F, Q = self.model.transition, self.model.process_noise
        predicted: list[PlainTrack] = []
        for track in self.tracks:
            comps = tuple(
                GaussianComponent(c.weight, F @ c.mean, F @ c.covariance @ F.T + Q)
                for c in track.mixture.components
            )
            gm = prune_and_merge(GaussianMixture(comps), self.gm_prune, self.gm_merge, self.gm_max)
            predicted.append(PlainTrack(track.label, self.p_s * track.existence, gm))
        for site in self.births:
            predicted.append(
                PlainTrack(
                    Label(k, site.slot),
                    site.existence,
                    GaussianMixture.single(site.mean, site.cov),
                )
            )
        return predicted

    # -- update ------------------------------------------------------------

    def step(self, scan: ScanData) -> list[PlainTrack]:
        predicted = self._predict(scan.k)
        n_tracks = len(predicted)
        radar = self.radar
        p_d = radar.p_d
        kappa = radar.clutter_density()

        # Per track: gated measurement list, per-measurement likelihood and
        # updated mixtures; the miss entry sits at local index 0.
        gated: list[list[int]] = []
        etas: list[np.ndarray] = []
        post: list[list[GaussianMixture]] = []
        for track in predicted:
            weights = track.mixture.weights
            means = np.stack([c.mean for c in track.mixture.components])
            covs = np.stack([c.covariance for c in track.mixture.components])
            z_mean, S_bar = self._predicted_measurement(weights, means, covs)
            S_inv = np.linalg.inv(S_bar)
            idx: list[int] = []
            if scan.n_radar > 0:
                for a in range(scan.n_radar):
                    res = scan.radar_meas[a] - z_mean
                    if float(res @ S_inv @ res) <= self.gate_chi2:
                        idx.append(a)
            track_etas = np.zeros(1 + len(idx))
            track_post: list[GaussianMixture] = [track.mixture]
            track_etas[0] = 1.0 - p_d
            for local, a in enumerate(idx, start=1):
                qs = np.zeros(len(weights))
                new_means = np.zeros_like(means)
                new_covs = np.zeros_like(covs)
                for n, (m, P) in enumerate(zip(means, covs)):
                    residual = scan.radar_meas[a] - radar.H @ m
                    qs[n], new_means[n], new_covs[n] = kalman_update(
                        m, P, residual, radar.H, radar.noise_cov
                    )
                track_etas[local] = (p_d / kappa) * float(weights @ qs)
                w_new = weights * qs
                comps = tuple(
                    GaussianComponent(w, mu, P)
                    for w, mu, P in zip(w_new / w_new.sum(), new_means, new_covs)
                )
                track_post.append(GaussianMixture(comps))
            gated.append(idx)
            etas.append(track_etas)
            post.append(track_post)

        maps, base_w = self._ranked_maps(predicted, gated, etas, scan.n_radar)
        weights = base_w / base_w.sum()

        updated: list[PlainTrack] = []
        for i, track in enumerate(predicted):
            r_plus = track.existence
            miss_total = (1.0 - r_plus) + r_plus * etas[i][0]
            q_miss = r_plus * etas[i][0] / miss_total if miss_total > 0 else 0.0
            W = np.bincount(maps[:, i], weights=weights, minlength=1 + len(gated[i]))
            W[0] *= q_miss
            r = float(W.sum())
            if r < self.prune_existence:
                continue
            comps: list[GaussianComponent] = []
            for t, w_t in enumerate(W):
                share = w_t / r
                if share <= 0.0:
                    continue
                comps.extend(
                    GaussianComponent(share * c.weight, c.mean, c.covariance)
                    for c in post[i][t].components
                )
            gm = GaussianMixture(tuple(comps)).normalized()
            gm = prune_and_merge(gm, self.gm_prune, self.gm_merge, self.gm_max)
            updated.append(PlainTrack(track.label, min(r, 1.0), gm))
        self.tracks = updated
        return updated

    def _predicted_measurement(self, weights, means, covs):
        H, R = self.radar.H, self.radar.noise_cov
        zs = means @ H.T
        z_mean = weights @ zs
        S_bar = np.zeros((H.shape[0], H.shape[0]))
        for w, z, P in zip(weights, zs, covs):
            diff = z - z_mean
            S_bar += w * (H @ P @ H.T + R + np.outer(diff, diff))
        return z_mean, S_bar

    def _ranked_maps(self, predicted, gated, etas, n_meas):
        n_tracks = len(predicted)
        if n_tracks == 0:
            return np.zeros((1, 0), dtype=int), np.ones(1)
        cost = np.full((n_tracks, n_meas + n_tracks), 1e9)
        for i, track in enumerate(predicted):
            r_plus = track.existence
            for local, a in enumerate(gated[i], start=1):
                cost[i, a] = -math.log(max(r_plus * etas[i][local], _WEIGHT_FLOOR))
            miss_total = (1.0 - r_plus) + r_plus * etas[i][0]
            cost[i, n_meas + i] = -math.log(max(miss_total, _WEIGHT_FLOOR))

        miss_totals = [
            (1.0 - t.existence) + t.existence * etas[i][0] for i, t in enumerate(predicted)
        ]
        rows: list[np.ndarray] = []
        weights: list[float] = []
        for assignment, _total in murty(cost, self.k_best):
            tid = np.zeros(n_tracks, dtype=int)
            w = 1.0
            for i, track in enumerate(predicted):
                col = int(assignment[i])
                if col >= n_meas:
                    tid[i] = 0
                    w *= miss_totals[i]
                else:
                    t = gated[i].index(col) + 1
                    tid[i] = t
                    w *= track.existence * etas[i][t]
            rows.append(tid)
            weights.append(w)
        all_miss = np.zeros(n_tracks, dtype=int)
        if not any(np.array_equal(r, all_miss) for r in rows):
            rows.append(all_miss)
            w = 1.0
            for m_total in miss_totals:
                w *= m_total
            weights.append(w)
        order = np.argsort(weights)[::-1]
        if self.k_best is not None:
            keep = list(order[: self.k_best])
            miss_row = next(i for i, r in enumerate(rows) if np.array_equal(r, all_miss))
            if miss_row not in keep:
                keep.append(miss_row)
            order = keep
        maps = np.stack([rows[i] for i in order])
        base_w = np.array([weights[i] for i in order])
        return maps, base_w

    # -- reporting ---------------------------------------------------------

    def estimates(self, r_threshold: float = 0.5) -> list[tuple[Label, float, np.ndarray]]:
        out = []
        for track in self.tracks:
            if track.existence > r_threshold:
                mean, _ = mixture_moments(track.mixture)
                out.append((track.label, track.existence, mean))
        return out

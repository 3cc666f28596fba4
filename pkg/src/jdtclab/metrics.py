"""Scoring: OSPA distance, misclassification rate, and the joint performance metric.

The JPM here mirrors the three risk channels (classification, localization,
cardinality) so algorithm comparisons are internally consistent; it is a
stand-in formula, flagged as such in the outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .risk import RiskCoefficients

__all__ = ["ScanScore", "ospa", "ospa_assignment", "misclassification_rate", "jpm", "jpm_value"]


@dataclass(frozen=True)
class ScanScore:
    """Per-scan scoring record of one trial."""

    k: int
    true_n: int
    est_n: int
    ospa: float
    miscls: float
    jpm: float


def _as_points(X) -> np.ndarray:
    if len(X) == 0:
        return np.zeros((0, 2))
    return np.atleast_2d(np.asarray(X, dtype=float))


def _canonical_order(X: np.ndarray, Y: np.ndarray) -> bool:
    # Symmetry must hold exactly, so both argument orders are evaluated
    # through the identical sequence of float operations.
    if X.shape[0] != Y.shape[0]:
        return X.shape[0] > Y.shape[0]
    for a, b in zip(sorted(map(tuple, X.tolist())), sorted(map(tuple, Y.tolist()))):
        if a != b:
            return a > b
    return False


def ospa_assignment(
    X, Y, c: float = 100.0, p: float = 2.0
) -> tuple[float, list[tuple[int, int]]]:
    """OSPA distance between two point sets plus the optimal pairing used.

    Distances are cut off at c; the per-point assignment minimizes the summed
    cut-off distances to the power p, and unmatched points on the larger side
    contribute the full cut-off penalty.
    """
    if c <= 0.0:
        raise ValueError("cut-off must be positive")
    if p < 1.0:
        raise ValueError("order must be at least 1")
    X = _as_points(X)
    Y = _as_points(Y)
    n, m = X.shape[0], Y.shape[0]
    if n == 0 and m == 0:
        return 0.0, []
    if n == 0 or m == 0:
        return float(c), []
    swap = _canonical_order(X, Y)
    A, B = (Y, X) if swap else (X, Y)
    diff = A[:, None, :] - B[None, :, :]
    D = np.minimum(np.linalg.norm(diff, axis=2), c) ** p
    rows, cols = linear_sum_assignment(D)
    cost = float(D[rows, cols].sum())
    big = max(n, m)
    dist = ((cost + (c**p) * abs(n - m)) / big) ** (1.0 / p)
    pairs = [(int(r), int(c_)) for r, c_ in zip(rows, cols)]
    if swap:
        pairs = [(c_, r) for r, c_ in pairs]
    return float(dist), pairs


def ospa(X, Y, c: float = 100.0, p: float = 2.0) -> float:
    return ospa_assignment(X, Y, c, p)[0]


def misclassification_rate(
    est_positions,
    est_classes: Sequence[int],
    truth_positions,
    truth_classes: Sequence[int],
    c: float = 100.0,
    p: float = 2.0,
) -> float:
    """Fraction of accountable targets with a wrong (or missing) class decision.

    Estimates are matched to truth through the OSPA assignment; every matched
    pair with a differing class counts as misclassified and every unmatched
    truth counts as misclassified too, over a denominator of matched pairs
    plus unmatched truths.
    """
    n_truth = len(truth_classes)
    if n_truth == 0:
        return 0.0
    _, pairs = ospa_assignment(est_positions, truth_positions, c, p)
    wrong = sum(1 for e, t in pairs if est_classes[e] != truth_classes[t])
    unmatched = n_truth - len(pairs)
    return (wrong + unmatched) / (len(pairs) + unmatched)


def jpm_value(
    miscls: float, ospa_dist: float, card_error: float, coeffs: RiskCoefficients
) -> float:
    """Scalar joint performance value of one scan of one trial."""
    return (
        coeffs.alpha_scalar() * miscls
        + coeffs.beta_scalar() * ospa_dist**2
        + coeffs.gamma * abs(card_error)
    )


def jpm(per_trial_scores: Sequence[Sequence[ScanScore]], coeffs: RiskCoefficients) -> np.ndarray:
    """Per-scan mean JPM curve over trials (recomputed from the stored channels)."""
    if not per_trial_scores:
        return np.zeros(0)
    n_scans = len(per_trial_scores[0])
    curve = np.zeros(n_scans)
    for scores in per_trial_scores:
        if len(scores) != n_scans:
            raise ValueError("trials disagree on the number of scans")
        for i, s in enumerate(scores):
            curve[i] += jpm_value(s.miscls, s.ospa, s.est_n - s.true_n, coeffs)
    return curve / len(per_trial_scores)

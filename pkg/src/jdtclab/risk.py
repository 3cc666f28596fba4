"""Generalized Bayesian risk: decision regions, cost assembly, and decision selection.

The risk mixes three channels: a classification cost (alpha-weighted decision
cost matrix), a state estimation cost (beta-weighted trace-plus-offset), and a
cardinality cost (gamma times the drop in expected target count caused by
conditioning the update on the decision).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rfs import HypothesisWeight, Label

__all__ = [
    "RiskCoefficients",
    "TrackDecisionStats",
    "CandidateEvaluation",
    "DecisionSet",
    "intermediate_costs",
    "region_decision",
    "decision_region_membership",
    "state_estimation_cost",
    "cardinality_cost",
    "select_decision",
    "advise_gamma",
]


@dataclass(frozen=True, eq=False)
class RiskCoefficients:
    """Weights of the three risk channels plus the decision cost matrix.

    ``alpha`` and ``beta`` are (J, J) matrices indexed [decision, hypothesis];
    ``gamma`` is a single scalar (the cardinality weight is hypothesis
    independent); ``c`` is the decision cost matrix with a zero diagonal.
    """

    alpha: np.ndarray
    beta: np.ndarray
    gamma: float
    c: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        c = np.atleast_2d(np.asarray(self.c, dtype=float))
        if alpha.shape != beta.shape or alpha.shape != c.shape:
            raise ValueError("alpha, beta and c must share one (J, J) shape")
        if np.any(alpha < 0.0) or np.any(beta < 0.0) or self.gamma < 0.0 or np.any(c < 0.0):
            raise ValueError("risk weights must be nonnegative")
        if np.any(np.abs(np.diag(c)) > 0.0):
            raise ValueError("decision cost matrix must have a zero diagonal")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n_classes(self) -> int:
        return self.alpha.shape[0]

    @staticmethod
    def uniform(alpha: float, beta: float, gamma: float, n_classes: int = 2) -> "RiskCoefficients":
        """Scalar coefficients applied to every decision/hypothesis pair."""
        ones = np.ones((n_classes, n_classes))
        c = ones - np.eye(n_classes)
        return RiskCoefficients(alpha * ones, beta * ones, gamma, c)

    def alpha_scalar(self) -> float:
        return float(self.alpha.max())

    def beta_scalar(self) -> float:
        return float(self.beta.max())


def intermediate_costs(
    likelihoods: np.ndarray,
    class_probs: np.ndarray,
    pred_est_costs: np.ndarray,
    coeffs: RiskCoefficients,
) -> np.ndarray:
    """Per-decision intermediate cost of one candidate measurement.

    ``likelihoods[j]`` is the class-j likelihood of the measurement (class
    dependent factors only; factors common to all classes cancel in the
    comparison), ``pred_est_costs[i, j]`` the predicted estimation cost used
    inside the region predicate. Returns the J costs; the measurement belongs
    to the region of the argmin decision.
    """
    likelihoods = np.asarray(likelihoods, dtype=float)
    class_probs = np.asarray(class_probs, dtype=float)
    pred_est_costs = np.atleast_2d(np.asarray(pred_est_costs, dtype=float))
    weighted = likelihoods * class_probs
    return (coeffs.alpha * coeffs.c + coeffs.beta * pred_est_costs) @ weighted


def region_decision(
    likelihoods: np.ndarray,
    class_probs: np.ndarray,
    pred_est_costs: np.ndarray,
    coeffs: RiskCoefficients,
) -> int:
    """Decision whose region contains the measurement (ties go to the lower class)."""
    costs = intermediate_costs(likelihoods, class_probs, pred_est_costs, coeffs)
    return int(np.argmin(costs)) + 1


def decision_region_membership(
    likelihoods: np.ndarray,
    class_probs: np.ndarray,
    pred_est_costs: np.ndarray,
    decision: int,
    coeffs: RiskCoefficients,
) -> bool:
    """Whether a measurement with the given class likelihoods lies in decision's region.

    The regions of one track partition its gated measurement set; a missed
    detection belongs to every region by convention and is handled by callers.
    """
    return region_decision(likelihoods, class_probs, pred_est_costs, coeffs) == decision


def state_estimation_cost(
    cov: np.ndarray, mean: np.ndarray, fused_mean: np.ndarray
) -> float:
    """Estimation cost of one class hypothesis: tr(P) plus the squared offset
    between the class estimate and the decision's fused estimate."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    diff = np.asarray(mean, dtype=float) - np.asarray(fused_mean, dtype=float)
    return float(np.trace(cov) + diff @ diff)


def _cardinality_mean(hypotheses: Sequence[HypothesisWeight]) -> float:
    return float(sum(len(h.label_set) * h.weight for h in hypotheses))


def cardinality_cost(
    hypotheses_unconditioned: Sequence[HypothesisWeight],
    hypotheses_decided: Sequence[HypothesisWeight],
) -> float:
    """Sum over hypotheses of N(I) (w_unconditioned - w_decided).

    Both weight tables must be normalized; hypotheses missing from one table
    count with weight zero, so the sum equals the difference of the two
    cardinality means.
    """
    return _cardinality_mean(hypotheses_unconditioned) - _cardinality_mean(hypotheses_decided)


@dataclass(frozen=True, eq=False)
class TrackDecisionStats:
    """Per-track ingredients of the risk under one candidate decision set."""

    label: Label
    decision: int
    existence: float
    class_probs: np.ndarray  # (J,)
    est_costs: np.ndarray  # (J,) estimation cost of the decided estimate vs class j


@dataclass(frozen=True, eq=False)
class CandidateEvaluation:
    """Everything select_decision needs about one candidate decision set."""

    tracks: tuple[TrackDecisionStats, ...]
    card_mean: float
    card_mean_unconditioned: float

    @property
    def decisions(self) -> tuple[tuple[Label, int], ...]:
        return tuple((t.label, t.decision) for t in self.tracks)


@dataclass(frozen=True)
class DecisionSet:
    """Selected per-track class decisions with the risk breakdown that chose them."""

    decisions: tuple[tuple[Label, int], ...]
    total_cost: float
    classification_cost: float
    estimation_cost: float
    cardinality_cost: float

    def decision_for(self, label: Label) -> int:
        for lab, dec in self.decisions:
            if lab == label:
                return dec
        raise KeyError(label)

    def as_dict(self) -> dict[Label, int]:
        return dict(self.decisions)


def evaluate_candidate(evaluation: CandidateEvaluation, coeffs: RiskCoefficients) -> DecisionSet:
    """Assemble the three risk terms of one candidate decision set."""
    cls_cost = 0.0
    est_cost = 0.0
    for t in evaluation.tracks:
        i = t.decision - 1
        cls_cost += t.existence * float((coeffs.alpha[i] * coeffs.c[i]) @ t.class_probs)
        est_cost += t.existence * float((coeffs.beta[i] * t.est_costs) @ t.class_probs)
    card_cost = coeffs.gamma * (evaluation.card_mean_unconditioned - evaluation.card_mean)
    return DecisionSet(
        decisions=evaluation.decisions,
        total_cost=cls_cost + est_cost + card_cost,
        classification_cost=cls_cost,
        estimation_cost=est_cost,
        cardinality_cost=card_cost,
    )


def select_decision(
    evaluations: Sequence[CandidateEvaluation], coeffs: RiskCoefficients
) -> DecisionSet:
    """Minimum-risk decision set among the candidates.

    Ties break lexicographically on the per-track class indices so selection
    is deterministic.
    """
    if not evaluations:
        raise ValueError("no candidate decision sets to select from")
    best: DecisionSet | None = None
    best_key: tuple | None = None
    for evaluation in evaluations:
        ds = evaluate_candidate(evaluation, coeffs)
        key = (ds.total_cost, tuple(dec for _, dec in ds.decisions))
        if best_key is None or key < best_key:
            best, best_key = ds, key
    assert best is not None
    return best


def advise_gamma(coeffs: RiskCoefficients, max_eps_x: float, p_bar: float) -> float:
    """Cardinality weight making the miss-detection cost dominate.

    Balances the maximum classification-plus-estimation cost against the
    existence probability p_bar that an undetected target would retain:
    gamma ~= (alpha + beta * max_eps_x) / (1 - p_bar).
    """
    if not 0.0 <= p_bar < 1.0:
        raise ValueError(f"p_bar must lie in [0, 1), got {p_bar}")
    return (coeffs.alpha_scalar() * 1.0 + coeffs.beta_scalar() * max_eps_x) / (1.0 - p_bar)

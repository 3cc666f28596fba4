import math

import numpy as np
import pytest

from jdtclab.rfs import AssociationMap, HypothesisWeight, Label
from jdtclab.risk import (
    CandidateEvaluation,
    RiskCoefficients,
    TrackDecisionStats,
    advise_gamma,
    cardinality_cost,
    decision_region_membership,
    evaluate_candidate,
    intermediate_costs,
    region_decision,
    select_decision,
    state_estimation_cost,
)


def sym_coeffs(alpha=1.0, beta=0.0, gamma=0.0):
    return RiskCoefficients.uniform(alpha, beta, gamma, n_classes=2)


def gaussian(x, mean, var):
    return math.exp(-0.5 * (x - mean) ** 2 / var) / math.sqrt(2 * math.pi * var)


class TestCoefficients:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            RiskCoefficients(-np.ones((2, 2)), np.ones((2, 2)), 1.0, 1 - np.eye(2))

    def test_rejects_nonzero_diagonal(self):
        with pytest.raises(ValueError):
            RiskCoefficients(np.ones((2, 2)), np.ones((2, 2)), 1.0, np.ones((2, 2)))

    def test_uniform_shape(self):
        coeffs = RiskCoefficients.uniform(20.0, 1.0, 100.0, 3)
        assert coeffs.alpha.shape == (3, 3)
        np.testing.assert_allclose(np.diag(coeffs.c), 0.0)


class TestDecisionRegion:
    def test_symmetric_costs_reduce_to_likelihood_comparison(self):
        coeffs = sym_coeffs()
        eps = np.zeros((2, 2))
        priors = np.array([0.5, 0.5])
        assert decision_region_membership(np.array([0.9, 0.4]), priors, eps, 1, coeffs)
        assert decision_region_membership(np.array([0.1, 0.4]), priors, eps, 2, coeffs)

    def test_dominant_likelihood_limit(self):
        coeffs = RiskCoefficients.uniform(3.0, 0.5, 0.0, 2)
        eps = np.full((2, 2), 7.0)
        # L1 / L2 -> infinity puts z in region 1 for any finite coefficients.
        assert decision_region_membership(np.array([1e12, 1e-12]), np.array([0.5, 0.5]), eps, 1, coeffs)

    def test_gaussian_boundary_at_midpoint(self):
        # N(0,1) vs N(2,1), symmetric costs, equal priors: boundary at z = 1.
        coeffs = sym_coeffs()
        eps = np.zeros((2, 2))
        priors = np.array([0.5, 0.5])
        for z in np.linspace(-2.0, 0.99, 25):
            likes = np.array([gaussian(z, 0.0, 1.0), gaussian(z, 2.0, 1.0)])
            assert region_decision(likes, priors, eps, coeffs) == 1
        for z in np.linspace(1.01, 4.0, 25):
            likes = np.array([gaussian(z, 0.0, 1.0), gaussian(z, 2.0, 1.0)])
            assert region_decision(likes, priors, eps, coeffs) == 2

    def test_tie_breaks_to_lower_class(self):
        coeffs = sym_coeffs()
        likes = np.array([0.5, 0.5])
        assert region_decision(likes, np.array([0.5, 0.5]), np.zeros((2, 2)), coeffs) == 1

    def test_partition_property(self, rng):
        # Every measurement belongs to exactly one region.
        coeffs = RiskCoefficients.uniform(20.0, 1.0, 100.0, 2)
        for _ in range(200):
            likes = rng.random(2) * 5
            priors = rng.dirichlet(np.ones(2))
            eps = rng.random((2, 2)) * 10
            memberships = [
                decision_region_membership(likes, priors, eps, dec, coeffs) for dec in (1, 2)
            ]
            assert sum(memberships) == 1

    def test_matches_likelihood_ratio_form(self, rng):
        # Acceptance-style check in miniature: cost comparison equals the
        # cross-multiplied likelihood-ratio threshold test.
        for _ in range(500):
            alpha = rng.random((2, 2)) * 10
            beta = rng.random((2, 2)) * 2
            c = np.array([[0.0, rng.random() * 5], [rng.random() * 5, 0.0]])
            coeffs = RiskCoefficients(alpha, beta, rng.random(), c)
            eps = rng.random((2, 2)) * 10
            likes = rng.random(2) * 4
            priors = rng.dirichlet(np.ones(2))
            g = alpha * c + beta * eps
            lhs = (g[0, 0] - g[1, 0]) * likes[0] * priors[0]
            rhs = (g[1, 1] - g[0, 1]) * likes[1] * priors[1]
            if math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=1e-15):
                continue  # exact ties excluded
            want = 1 if lhs < rhs else 2
            assert region_decision(likes, priors, eps, coeffs) == want


class TestStateEstimationCost:
    def test_trace_only_when_estimates_match(self):
        cov = np.diag([1.0, 2.0, 3.0])
        mean = np.array([1.0, 1.0, 1.0])
        assert state_estimation_cost(cov, mean, mean) == pytest.approx(6.0)

    def test_scalar_plug_in(self):
        assert state_estimation_cost(np.array([[0.5]]), np.array([1.0]), np.array([0.5])) == pytest.approx(0.75)

    def test_zero_case(self):
        assert state_estimation_cost(np.zeros((2, 2)), np.ones(2), np.ones(2)) == 0.0

    def test_nonnegative(self, rng):
        for _ in range(50):
            A = rng.normal(size=(3, 3))
            cov = A @ A.T
            assert state_estimation_cost(cov, rng.normal(size=3), rng.normal(size=3)) >= 0.0


def hyp(labels, weight):
    label_set = frozenset(Label(0, i) for i in labels)
    assoc = AssociationMap(tuple((Label(0, i), (None, None)) for i in labels))
    return HypothesisWeight(label_set=label_set, assoc=assoc, weight=weight)


class TestCardinalityCost:
    def test_identical_tables_zero(self):
        table = [hyp([0], 0.6), hyp([0, 1], 0.4)]
        assert cardinality_cost(table, table) == pytest.approx(0.0)

    def test_mean_difference(self):
        # Unconditioned mean 2.0, decided mean 1.6.
        uncond = [hyp([0, 1], 1.0)]
        decided = [hyp([0, 1], 0.6), hyp([0], 0.4)]
        assert cardinality_cost(uncond, decided) == pytest.approx(0.4)

    def test_all_empty(self):
        uncond = [hyp([], 1.0)]
        decided = [hyp([], 1.0)]
        assert cardinality_cost(uncond, decided) == pytest.approx(0.0)


def stats(label, dec, r, probs, eps):
    return TrackDecisionStats(
        label=label,
        decision=dec,
        existence=r,
        class_probs=np.asarray(probs, float),
        est_costs=np.asarray(eps, float),
    )


class TestSelectDecision:
    def test_single_class_returns_pure_costs(self):
        coeffs = RiskCoefficients.uniform(20.0, 1.0, 100.0, 1)
        ev = CandidateEvaluation(
            tracks=(stats(Label(0, 0), 1, 1.0, [1.0], [5.0]),),
            card_mean=0.9,
            card_mean_unconditioned=1.0,
        )
        ds = select_decision([ev], coeffs)
        assert ds.classification_cost == pytest.approx(0.0)
        assert ds.estimation_cost == pytest.approx(5.0)
        assert ds.cardinality_cost == pytest.approx(10.0)
        assert ds.total_cost == pytest.approx(15.0)

    def test_dominance_on_classification_cost(self):
        coeffs = RiskCoefficients.uniform(1.0, 0.0, 0.0, 2)
        common = dict(r=1.0, probs=[1.0, 0.0], eps=[0.0, 0.0])
        ev1 = CandidateEvaluation(
            tracks=(stats(Label(0, 0), 1, common["r"], common["probs"], common["eps"]),),
            card_mean=1.0,
            card_mean_unconditioned=1.0,
        )
        ev2 = CandidateEvaluation(
            tracks=(stats(Label(0, 0), 2, common["r"], common["probs"], common["eps"]),),
            card_mean=1.0,
            card_mean_unconditioned=1.0,
        )
        ds = select_decision([ev2, ev1], coeffs)
        assert ds.decisions == ((Label(0, 0), 1),)

    def test_hand_built_cost_oracle(self):
        # Independent arithmetic for one track, two candidate decisions.
        alpha, beta, gamma = 2.0, 0.5, 3.0
        coeffs = RiskCoefficients.uniform(alpha, beta, gamma, 2)
        probs = [0.3, 0.7]
        eps = [4.0, 1.0]
        r = 0.8
        for dec in (1, 2):
            ev = CandidateEvaluation(
                tracks=(stats(Label(0, 0), dec, r, probs, eps),),
                card_mean=1.4,
                card_mean_unconditioned=1.5,
            )
            ds = evaluate_candidate(ev, coeffs)
            c_row = [0.0, 1.0] if dec == 1 else [1.0, 0.0]
            want_cls = r * alpha * sum(c * p for c, p in zip(c_row, probs))
            want_est = r * beta * sum(e * p for e, p in zip(eps, probs))
            want_card = gamma * 0.1
            assert ds.classification_cost == pytest.approx(want_cls, abs=1e-10)
            assert ds.estimation_cost == pytest.approx(want_est, abs=1e-10)
            assert ds.cardinality_cost == pytest.approx(want_card, abs=1e-10)
            assert ds.total_cost == pytest.approx(want_cls + want_est + want_card, abs=1e-10)

    def test_argmin_property(self, rng):
        coeffs = RiskCoefficients.uniform(20.0, 1.0, 100.0, 2)
        evs = []
        for dec in (1, 2):
            evs.append(
                CandidateEvaluation(
                    tracks=(
                        stats(Label(0, 0), dec, rng.random(), rng.dirichlet(np.ones(2)), rng.random(2) * 10),
                    ),
                    card_mean=float(rng.random()),
                    card_mean_unconditioned=1.0,
                )
            )
        ds = select_decision(evs, coeffs)
        costs = [evaluate_candidate(ev, coeffs).total_cost for ev in evs]
        assert ds.total_cost == pytest.approx(min(costs))

    def test_scaling_invariance(self, rng):
        base = RiskCoefficients.uniform(20.0, 1.0, 100.0, 2)
        scaled = RiskCoefficients.uniform(20.0 * 7.5, 1.0 * 7.5, 100.0 * 7.5, 2)
        evs = []
        for dec in ((1, 1), (1, 2), (2, 1), (2, 2)):
            evs.append(
                CandidateEvaluation(
                    tracks=tuple(
                        stats(Label(0, i), d, rng.random(), rng.dirichlet(np.ones(2)), rng.random(2) * 10)
                        for i, d in enumerate(dec)
                    ),
                    card_mean=float(rng.random() * 2),
                    card_mean_unconditioned=2.0,
                )
            )
        assert select_decision(evs, base).decisions == select_decision(evs, scaled).decisions

    def test_breakdown_sums_to_total(self, rng):
        coeffs = RiskCoefficients.uniform(20.0, 1.0, 100.0, 2)
        ev = CandidateEvaluation(
            tracks=(stats(Label(0, 0), 2, 0.9, [0.4, 0.6], [3.0, 7.0]),),
            card_mean=0.8,
            card_mean_unconditioned=0.95,
        )
        ds = evaluate_candidate(ev, coeffs)
        assert ds.total_cost == pytest.approx(
            ds.classification_cost + ds.estimation_cost + ds.cardinality_cost, abs=1e-9
        )

    def test_no_candidates_rejected(self):
        with pytest.raises(ValueError):
            select_decision([], RiskCoefficients.uniform(1, 1, 1, 2))


class TestAdviseGamma:
    def test_paper_scale_value(self):
        coeffs = RiskCoefficients.uniform(20.0, 1.0, 0.0, 2)
        assert advise_gamma(coeffs, 60.0, 0.2) == pytest.approx(100.0)

    def test_zero_coefficients(self):
        coeffs = RiskCoefficients.uniform(0.0, 0.0, 0.0, 2)
        assert advise_gamma(coeffs, 123.0, 0.5) == 0.0

    def test_zero_pbar(self):
        coeffs = RiskCoefficients.uniform(2.0, 1.0, 0.0, 2)
        assert advise_gamma(coeffs, 5.0, 0.0) == pytest.approx(7.0)

    def test_invalid_pbar(self):
        coeffs = RiskCoefficients.uniform(1.0, 1.0, 1.0, 2)
        with pytest.raises(ValueError):
            advise_gamma(coeffs, 1.0, 1.0)


def test_intermediate_costs_scale_invariance(rng):
    coeffs = RiskCoefficients.uniform(20.0, 1.0, 100.0, 2)
    likes = rng.random(2)
    priors = rng.dirichlet(np.ones(2))
    eps = rng.random((2, 2))
    base = intermediate_costs(likes, priors, eps, coeffs)
    scaled = intermediate_costs(likes * 3.7, priors, eps, coeffs)
    np.testing.assert_allclose(scaled, base * 3.7)

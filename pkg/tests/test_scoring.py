"""Scoring: quadratic score, totals, and the accuracy identity."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from forecast_arena import oracle, scoring


class TestQuadraticScore:
    def test_identity_case(self):
        assert scoring.quadratic_score(1.0, 1) == 1.0

    def test_maximal_error_case(self):
        assert scoring.quadratic_score(0.0, 1) == 0.0

    def test_halfway(self):
        assert scoring.quadratic_score(0.5, 1) == 0.75

    def test_rejects_out_of_range_report(self):
        with pytest.raises(ValueError):
            scoring.quadratic_score(1.2, 1)
        with pytest.raises(ValueError):
            scoring.quadratic_score(-0.1, 0)

    def test_rejects_non_binary_outcome(self):
        with pytest.raises(ValueError):
            scoring.quadratic_score(0.5, 2)

    @given(
        st.floats(0, 1), st.floats(0, 1), st.integers(0, 1)
    )
    def test_two_lipschitz_in_report(self, r1, r2, y):
        lhs = abs(scoring.quadratic_score(r1, y) - scoring.quadratic_score(r2, y))
        assert lhs <= 2.0 * abs(r1 - r2) + 1e-12

    @given(st.floats(0, 1), st.integers(0, 1))
    def test_range(self, r, y):
        assert 0.0 <= scoring.quadratic_score(r, y) <= 1.0


class TestScoreTotals:
    def test_perfect_reports(self):
        q = scoring.score_totals(np.array([[1.0, 1.0]]), np.array([1, 1]))
        assert q.tolist() == [2.0]

    def test_hedged_reports_any_outcome(self):
        reports = np.full((2, 2), 0.5)
        for y in ([0, 0], [0, 1], [1, 0], [1, 1]):
            q = scoring.score_totals(reports, np.array(y))
            assert q.tolist() == [1.5, 1.5]

    def test_matches_elementwise_recomputation(self):
        rng = np.random.default_rng(3)
        reports = rng.uniform(0, 1, size=(3, 5))
        y = rng.integers(0, 2, size=5)
        q = scoring.score_totals(reports, y)
        for i in range(3):
            manual = sum(
                scoring.quadratic_score(float(reports[i, t]), int(y[t])) for t in range(5)
            )
            assert q[i] == pytest.approx(manual, abs=1e-12)

    def test_permutation_equivariant(self):
        rng = np.random.default_rng(4)
        reports = rng.uniform(0, 1, size=(4, 6))
        y = rng.integers(0, 2, size=6)
        perm = [2, 0, 3, 1]
        q = scoring.score_totals(reports, y)
        q_perm = scoring.score_totals(reports[perm], y)
        assert np.allclose(q_perm, q[perm], atol=0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            scoring.score_totals(np.zeros((2, 3)), np.zeros(4))


class TestAccuracyProfile:
    def test_zero_error(self):
        prof = scoring.accuracy_profile(np.array([[0.5, 0.5]]), np.array([0.5, 0.5]))
        assert prof.accuracy.tolist() == [1.0]
        assert prof.c_theta == 0.25

    def test_maximal_error(self):
        prof = scoring.accuracy_profile(np.array([[0.0, 1.0]]), np.array([1.0, 0.0]))
        assert prof.accuracy.tolist() == [0.0]

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            scoring.accuracy_profile(np.array([[1.5, 0.0]]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            scoring.accuracy_profile(np.array([[0.5]]), np.array([0.5, 0.5]))

    def test_accuracy_equals_expected_score_plus_constant(self, zoo):
        """The exact identity a_i = E[total score]/m + c_theta, checked
        against full enumeration on a mixture fixture."""
        name, dist = next(z for z in zoo if z[0] == "random-bias-m4")
        beliefs = np.array([[0.5, 0.5, 0.5, 0.5], [0.25, 0.75, 0.25, 0.75]])
        prof = scoring.accuracy_profile(beliefs, dist.marginals())
        res = oracle.exact_accuracy_and_scores(beliefs, beliefs, dist)
        for i in range(2):
            rhs = float(res.q_star[i]) / dist.m + float(res.c_theta)
            assert prof.accuracy[i] == pytest.approx(rhs, abs=1e-12)

    def test_report_accuracy_is_same_formula(self):
        rng = np.random.default_rng(5)
        reports = rng.uniform(0, 1, size=(2, 4))
        theta = rng.uniform(0, 1, size=4)
        np.testing.assert_allclose(
            scoring.report_accuracy(reports, theta),
            scoring.accuracy_profile(reports, theta).accuracy,
            atol=0,
        )

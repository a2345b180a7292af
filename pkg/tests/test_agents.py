"""Strategic agents: best responses, bands, iteration, adversaries."""

import warnings

import numpy as np
import pytest

from forecast_arena import agents as A
from forecast_arena import distributions as D
from forecast_arena import oracle
from forecast_arena.errors import NonConcaveObjectiveError


class TestGoldenSection:
    def test_quadratic_max(self):
        got = A.golden_section_max(lambda r: -(r - 0.37) ** 2, tol=1e-10)
        assert got == pytest.approx(0.37, abs=1e-7)

    def test_boundary_max(self):
        assert A.golden_section_max(lambda r: r, tol=1e-10) == pytest.approx(1.0, abs=1e-9)


class TestBestResponseEvent:
    def test_symmetric_interior_point(self):
        belief = D.independent([0.5])
        br = A.best_response_event(belief, 0, [0.5], [[0.5]], {}, eta=0.05)
        assert br.report == pytest.approx(0.5, abs=1e-6)
        assert br.conditional_belief_mean == 0.5
        assert not br.degenerate

    def test_band_for_skewed_belief(self):
        belief = D.independent([0.8])
        br = A.best_response_event(belief, 0, [0.8], [[0.5]], {}, eta=0.05)
        assert abs(br.report - 0.8) <= 4 * 1 * 0.05  # b=1, c=0

    def test_degenerate_single_forecaster(self):
        belief = D.independent([0.3])
        br = A.best_response_event(belief, 0, [0.3], [], {}, eta=0.05)
        assert br.degenerate
        assert br.report == 0.3

    def test_conditioning_keys_must_cover_outside(self):
        belief = D.hidden_coin_groups(4, 2, 0.1)
        with pytest.raises(ValueError, match="conditioning"):
            A.best_response_event(belief, 0, [0.5] * 4, [[0.5] * 4], {2: 1}, eta=0.01)

    def test_matches_oracle_objective_on_grid(self):
        """The event objective (block-conditional expectation) marginalized
        exactly must equal the oracle's flat expected-utility sum."""
        belief = D.independent([0.7, 0.3])
        own = [0.6, 0.4]
        opp = [[0.5, 0.5], [0.2, 0.9]]
        ys, ps = belief.support_arrays()
        objective = A._EventObjective(ys, ps, 0, own, opp, eta=0.1)
        for r in np.linspace(0, 1, 101):
            want = oracle.exact_expected_utility(0, [float(r), 0.4], opp, belief, 0.1)
            assert objective(float(r)) == pytest.approx(want, abs=1e-12)

    def test_conditional_band_holds(self):
        """|r* - conditional mean| <= beta*eta*b + (beta*eta*b)^2 for every
        realizable conditioning outcome."""
        rng = np.random.default_rng(21)
        beliefs = [
            D.hidden_coin_groups(4, 2, 0.1),
            D.random_bias(3, [0.3, 0.7]),
            D.independent([0.25, 0.6, 0.85]),
        ]
        eta, beta = 0.02, 3.0
        for belief in beliefs:
            b = belief.blocks.b
            band = A.conditional_report_band(eta, b, beta)
            reports = rng.uniform(0, 1, size=(3, belief.m))
            for t in range(belief.m):
                outside = belief.blocks.complement(t)
                seen = set()
                for y, _ in belief.support():
                    key = tuple(y[j] for j in outside)
                    if key in seen:
                        continue
                    seen.add(key)
                    br = A.best_response_event(
                        belief, t, reports[0], reports[1:], dict(zip(outside, key)), eta
                    )
                    assert abs(br.report - br.conditional_belief_mean) <= band + 1e-8

    def test_monotone_in_conditional_belief(self):
        responses = []
        for p in (0.2, 0.4, 0.6, 0.8):
            belief = D.independent([p])
            br = A.best_response_event(belief, 0, [p], [[0.5]], {}, eta=0.05)
            responses.append(br.report)
        assert all(b >= a - 1e-9 for a, b in zip(responses, responses[1:]))

    def test_nonconcavity_detected_far_outside_regime(self):
        belief = D.independent([0.5])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(NonConcaveObjectiveError):
                A.best_response_event(
                    belief, 0, [0.5], [[0.05], [0.97]], {}, eta=10.0
                )

    def test_warns_outside_regime(self):
        belief = D.independent([0.5])
        with pytest.warns(UserWarning, match="regime"):
            A.best_response_event(belief, 0, [0.5], [[0.4]], {}, eta=0.45)


class TestDominationDirection:
    def test_moving_to_band_edge_improves_utility(self):
        """Any report strictly outside the band is beaten by the projection
        onto the band edge, measured by exact expected utility."""
        belief = D.independent([0.7, 0.4])
        eta, b, c = 0.02, 1, 0.0
        gamma = A.truthfulness_band(eta, b, c)
        opp = [[0.5, 0.5]]
        p0 = 0.7
        for low in (0.0, p0 - 3 * gamma):
            bad = oracle.exact_expected_utility(0, [low, 0.4], opp, belief, eta)
            edge = oracle.exact_expected_utility(0, [p0 - gamma, 0.4], opp, belief, eta)
            assert edge > bad
        for high in (1.0, p0 + 3 * gamma):
            bad = oracle.exact_expected_utility(0, [high, 0.4], opp, belief, eta)
            edge = oracle.exact_expected_utility(0, [p0 + gamma, 0.4], opp, belief, eta)
            assert edge > bad


class TestTruthfulnessGap:
    def test_truthful_reports_pass(self):
        p = np.array([[0.2, 0.8], [0.5, 0.5]])
        rep = A.truthfulness_gap(p, p, b=1, c=0.0, eta=0.01)
        assert rep.gap == 0.0
        assert rep.passed

    def test_bounds_fields(self):
        p = np.zeros((1, 2))
        rep = A.truthfulness_gap(p, p, b=2, c=0.05, eta=0.01)
        assert rep.bound == pytest.approx((3 * 2 + 1) * 0.01 + 0.05)
        assert rep.mw_bound == pytest.approx(4 * 2 * 0.01 + 0.05)

    def test_offset_by_twice_band_fails(self):
        p = np.full((2, 3), 0.5)
        gamma = A.mw_truthfulness_band(0.01, 1, 0.0)
        rep = A.truthfulness_gap(p + 2 * gamma, p, b=1, c=0.0, eta=0.01)
        assert not rep.passed


class TestBandAdversary:
    def test_reports_sit_at_band_edges(self):
        p = np.array([[0.5, 0.5], [0.7, 0.2]])
        theta = np.array([0.5, 0.5])
        out = A.band_adversary_reports(p, theta, gamma=0.1, best_index=0)
        # best forecaster pushed away from theta, rival pulled toward it
        np.testing.assert_allclose(out[0], [0.6, 0.6])
        np.testing.assert_allclose(out[1], [0.6, 0.3])

    def test_clipping(self):
        p = np.array([[0.98, 0.01]])
        out = A.band_adversary_reports(p, np.array([0.5, 0.5]), 0.1, best_index=0)
        assert out[0, 0] == 1.0 and out[0, 1] == 0.0


class TestIteratedBestResponse:
    def test_symmetric_fixed_point_in_one_sweep(self):
        belief = D.independent([0.7, 0.3])
        fs = [A.Forecaster(belief, "best-response") for _ in range(2)]
        res = A.iterated_best_response(fs, eta=0.02, sweeps=5, tol=1e-6)
        assert res.converged and res.sweeps_used == 1
        np.testing.assert_allclose(res.reports, [[0.7, 0.3]] * 2, atol=1e-5)

    def test_distinct_beliefs_stay_in_band(self):
        fs = [
            A.Forecaster(D.independent([0.7, 0.3]), "best-response"),
            A.Forecaster(D.independent([0.4, 0.6]), "best-response"),
            A.Forecaster(D.random_bias(2, [0.3, 0.7]), "best-response"),
        ]
        res = A.iterated_best_response(fs, eta=0.02, sweeps=20, tol=1e-9)
        assert res.gap_report.passed

    def test_band_adversary_bypasses_iteration(self):
        beliefs = [D.independent([0.6, 0.4]), D.independent([0.5, 0.5])]
        fs = [
            A.Forecaster(beliefs[0], "band-adversary"),
            A.Forecaster(beliefs[1], "band-adversary"),
        ]
        theta = np.array([0.5, 0.5])
        res = A.iterated_best_response(fs, eta=0.02, sweeps=3, theta=theta)
        b, c = A.shared_block_params(beliefs)
        gamma = A.truthfulness_band(0.02, b, c)
        marg = np.array([d.marginals() for d in beliefs])
        np.testing.assert_allclose(
            np.abs(res.reports - marg), np.minimum(gamma, np.abs(res.reports - marg)), atol=1e-12
        )
        assert res.gap_report.passed

    def test_band_adversary_requires_theta(self):
        fs = [A.Forecaster(D.independent([0.5]), "band-adversary")]
        with pytest.raises(ValueError, match="theta"):
            A.iterated_best_response(fs, eta=0.01)

    def test_nonconvergence_is_reported_not_fatal(self):
        fs = [
            A.Forecaster(D.independent([0.7, 0.3]), "best-response"),
            A.Forecaster(D.independent([0.4, 0.6]), "best-response"),
        ]
        res = A.iterated_best_response(fs, eta=0.02, sweeps=1, tol=0.0)
        assert not res.converged
        assert res.sweeps_used == 1

    def test_panel_mode_for_large_m(self):
        """Beliefs too large to enumerate go through the sampled panel."""
        belief = D.hidden_coin_groups(20, 2, 0.1)
        fs = [A.Forecaster(belief, "best-response"), A.Forecaster(belief, "truthful")]
        rng = np.random.default_rng(17)
        res = A.iterated_best_response(fs, eta=0.01, sweeps=1, panel=16, rng=rng)
        assert res.gap_report.passed

    def test_strategy_validation(self):
        with pytest.raises(ValueError):
            A.Forecaster(D.independent([0.5]), "bluff")

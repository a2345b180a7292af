"""Strategic forecaster models and truthfulness measurement.

The central primitive is the exact per-event best response: with everything
fixed except one report entry and the outcomes of that event's block, the
expected win probability is strictly concave in the report (for learning
rates inside the regime), so the unique maximizer is found by golden-section
search over [0, 1]. Band bounds relate that maximizer to the forecaster's
conditional and marginal beliefs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .distributions import ENUMERATION_CAP, EventDistribution
from .errors import NonConcaveObjectiveError
from .mechanism import LOG_SUM_EXP

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0


def golden_section_max(f, lo: float = 0.0, hi: float = 1.0, tol: float = 1e-10) -> float:
    """Argmax of a unimodal ``f`` on [lo, hi] to absolute tolerance ``tol``."""
    a, b = lo, hi
    h = b - a
    if h <= tol:
        return 0.5 * (a + b)
    steps = int(math.ceil(math.log(tol / h) / math.log(_INV_PHI)))
    c = a + _INV_PHI_SQ * h
    d = a + _INV_PHI * h
    yc = f(c)
    yd = f(d)
    for _ in range(steps):
        if yc > yd:
            b, d, yd = d, c, yc
            h *= _INV_PHI
            c = a + _INV_PHI_SQ * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h *= _INV_PHI
            d = a + _INV_PHI * h
            yd = f(d)
    return 0.5 * (a + b)


def conditional_report_band(eta: float, b: int, beta: float) -> float:
    """Distance bound between a best response and the conditional belief mean."""
    x = beta * eta * b
    return x + x * x


def truthfulness_band(eta: float, b: int, c: float, beta: float = 3.0) -> float:
    """General bound on |best response - belief marginal|: (beta*b + 1)*eta + c."""
    return (beta * b + 1.0) * eta + c


def mw_truthfulness_band(eta: float, b: int, c: float) -> float:
    """Multiplicative Weights bound 4*b*eta + c (valid for eta < 1/(4b))."""
    return 4.0 * b * eta + c


@dataclass(frozen=True)
class Forecaster:
    """A competitor: a belief distribution plus a strategy tag."""

    belief: EventDistribution
    strategy: str = "truthful"  # truthful | best-response | band-adversary

    def __post_init__(self):
        if self.strategy not in ("truthful", "best-response", "band-adversary"):
            raise ValueError(f"unknown strategy {self.strategy!r}")


@dataclass(frozen=True)
class BestResponse:
    report: float
    conditional_belief_mean: float
    degenerate: bool = False


class _EventObjective:
    """Expected win probability for one report entry, all else fixed.

    Built from a list of weighted full outcomes: the conditional block
    outcomes spliced into the conditioning assignment, or the entire belief
    support when marginalizing exactly.
    """

    def __init__(self, outcomes, weights, t, own_reports, opponent_reports, eta):
        n_other = len(opponent_reports)
        k = len(outcomes)
        y = np.asarray(outcomes, dtype=float)  # (k, m)
        self.weights = np.asarray(weights, dtype=float)
        self.y_t = y[:, t]
        own = np.asarray(own_reports, dtype=float)
        d = own[np.newaxis, :] - y
        d[:, t] = 0.0
        self.own_base = np.sum(1.0 - d * d, axis=1) - 1.0  # strip event t's slot
        self.opp_exp = np.zeros(k)
        if n_other:
            opp = np.asarray(opponent_reports, dtype=float)
            dq = opp[np.newaxis, :, :] - y[:, np.newaxis, :]
            opp_q = np.sum(1.0 - dq * dq, axis=2)  # (k, n_other)
            self.opp_exp = np.exp(eta * opp_q).sum(axis=1)
        self.eta = eta
        self.n_other = n_other

    def __call__(self, r: float) -> float:
        if self.n_other == 0:
            return 1.0
        dt = r - self.y_t
        q_i = self.own_base + 1.0 - dt * dt
        win = 1.0 / (1.0 + self.opp_exp * np.exp(-self.eta * q_i))
        return float(np.dot(self.weights, win))


def _check_concavity_witness(objective, grid_points: int = 101, tol: float = 1e-12):
    rs = np.linspace(0.0, 1.0, grid_points)
    vals = np.array([objective(r) for r in rs])
    mid_gap = vals[1:-1] - 0.5 * (vals[:-2] + vals[2:])
    worst = float(np.min(mid_gap))
    if worst < -tol:
        k = int(np.argmin(mid_gap)) + 1
        raise NonConcaveObjectiveError(
            f"objective fails midpoint concavity at r={rs[k]:.3f} by {-worst:.3e}"
        )


def _warn_if_outside_regime(eta, b, conjugate):
    limit = min(conjugate.alpha / 2.0, 1.0 / (conjugate.beta * b))
    if eta >= limit:
        warnings.warn(
            f"eta={eta} outside the best-response regime (needs < {limit} for b={b})",
            stacklevel=3,
        )


def best_response_event(
    belief: EventDistribution,
    t: int,
    own_reports,
    opponent_reports,
    conditioning,
    eta: float,
    conjugate=LOG_SUM_EXP,
    check_concavity: bool = True,
) -> BestResponse:
    """Exact best response for event ``t`` given outside-block outcomes.

    ``conditioning`` assigns 0/1 to every event outside ``t``'s block in the
    forecaster's belief; the expectation over the block outcomes is exact.
    With no opponents the win probability is constant, so the belief marginal
    is returned and flagged as degenerate.
    """
    block = sorted(belief.blocks.blocks[t])
    outside = belief.blocks.complement(t)
    if set(conditioning) != set(outside):
        raise ValueError("conditioning must cover exactly the non-block events")
    _warn_if_outside_regime(eta, belief.blocks.b, conjugate)

    patterns = belief.conditional_block(t, dict(conditioning))
    p_ibt = float(sum(p * z[block.index(t)] for z, p in patterns))
    if len(opponent_reports) == 0:
        return BestResponse(
            report=float(belief.marginals()[t]),
            conditional_belief_mean=p_ibt,
            degenerate=True,
        )

    outcomes = []
    weights = []
    for z, p in patterns:
        y = [0] * belief.m
        for j, v in conditioning.items():
            y[j] = v
        for j, v in zip(block, z):
            y[j] = v
        outcomes.append(y)
        weights.append(float(p))
    objective = _EventObjective(outcomes, weights, t, own_reports, opponent_reports, eta)
    if check_concavity:
        _check_concavity_witness(objective)
    r_star = golden_section_max(objective, tol=1e-10)
    return BestResponse(report=r_star, conditional_belief_mean=p_ibt)


def expected_win_probability(
    i: int, reports, belief: EventDistribution, eta: float
) -> float:
    """Forecaster ``i``'s expected win probability over their full belief."""
    rows = np.asarray(reports, dtype=float)
    ys, ps = belief.support_arrays()
    d = rows[np.newaxis, :, :] - ys[:, np.newaxis, :]
    q = np.sum(1.0 - d * d, axis=2)  # (k, n)
    z = eta * q
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    win = e[:, i] / e.sum(axis=1)
    return float(np.dot(ps, win))


@dataclass(frozen=True)
class TruthfulnessReport:
    """Sup-norm gap between reports and beliefs against the proved bands."""

    gap: float
    bound: float  # (beta*b + 1)*eta + c
    mw_bound: float  # 4*b*eta + c
    passed: bool


def truthfulness_gap(
    reports,
    belief_marginals,
    b: int,
    c: float,
    eta: float,
    beta: float = 3.0,
    mw: bool = True,
    tol: float = 1e-9,
) -> TruthfulnessReport:
    """Measure max_t |r_it - p_it| and compare to the applicable band."""
    r = np.asarray(reports, dtype=float)
    p = np.asarray(belief_marginals, dtype=float)
    if r.shape != p.shape:
        raise ValueError("reports and belief marginals must share a shape")
    gap = float(np.max(np.abs(r - p)))
    bound = truthfulness_band(eta, b, c, beta)
    mwb = mw_truthfulness_band(eta, b, c)
    applicable = mwb if mw else bound
    return TruthfulnessReport(gap=gap, bound=bound, mw_bound=mwb, passed=gap <= applicable + tol)


def band_adversary_reports(
    belief_marginals, theta, gamma: float, best_index: int
) -> np.ndarray:
    """Edge-of-band reports chosen to penalize the most accurate forecaster.

    Every rival shifts its reports by the full band width toward the true
    marginals (raising its expected score); the best forecaster shifts away
    from them. All reports stay in [0, 1].
    """
    p = np.asarray(belief_marginals, dtype=float)
    th = np.asarray(theta, dtype=float)
    sign = np.where(p >= th, 1.0, -1.0)
    out = p - gamma * sign  # toward theta
    out[best_index] = p[best_index] + gamma * sign[best_index]  # away
    return np.clip(out, 0.0, 1.0)


@dataclass
class IterationResult:
    reports: np.ndarray
    converged: bool
    sweeps_used: int
    max_change: float
    gap_report: TruthfulnessReport


def shared_block_params(beliefs) -> tuple[int, float]:
    """Common (b, c) under which every belief is block correlated."""
    return (
        max(d.blocks.b for d in beliefs),
        max(d.blocks.c for d in beliefs),
    )


def iterated_best_response(
    forecasters,
    eta: float,
    sweeps: int = 10,
    tol: float = 1e-8,
    theta=None,
    panel: int | None = None,
    rng: np.random.Generator | None = None,
    conjugate=LOG_SUM_EXP,
) -> IterationResult:
    """Coordinate-wise best responses until reports stop moving.

    Each sweep replaces every (forecaster, event) report with its best
    response against a frozen snapshot of the matrix, marginalizing the
    conditioning outcomes exactly over the belief. Beliefs too large to
    enumerate are handled through a sampled panel of conditioning outcomes
    (``panel`` per event, default 64), averaging the per-outcome best
    responses; each of those individually obeys the band, so the average
    does too. Band-adversary forecasters bypass iteration and report at
    the edge of the truthfulness band; ``theta`` is required for them.
    Non-convergence within ``sweeps`` is reported, not raised.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    beliefs = [f.belief for f in forecasters]
    n = len(forecasters)
    m = beliefs[0].m
    if any(d.m != m for d in beliefs):
        raise ValueError("all beliefs must cover the same events")
    if panel is None and any(d.m > ENUMERATION_CAP for d in beliefs):
        panel = 64
    b, c = shared_block_params(beliefs)
    _warn_if_outside_regime(eta, b, conjugate)

    marginals = np.array([d.marginals() for d in beliefs])
    reports = marginals.copy()
    gamma = truthfulness_band(eta, b, c, conjugate.beta)
    adversaries = [i for i, f in enumerate(forecasters) if f.strategy == "band-adversary"]
    if adversaries:
        if theta is None:
            raise ValueError("band-adversary forecasters need theta")
        best = int(np.argmax(accuracy_order(marginals, theta)))
        adv = band_adversary_reports(marginals, theta, gamma, best)
        for i in adversaries:
            reports[i] = adv[i]
    active = [i for i, f in enumerate(forecasters) if f.strategy != "band-adversary"]

    max_change = 0.0
    converged = False
    sweeps_used = 0
    for sweep in range(sweeps):
        sweeps_used = sweep + 1
        snapshot = reports.copy()
        max_change = 0.0
        for i in active:
            if forecasters[i].strategy == "truthful":
                continue
            for t in range(m):
                new_r = _event_best_response_marginal(
                    beliefs[i], i, t, snapshot, eta, panel, rng, conjugate
                )
                max_change = max(max_change, abs(new_r - reports[i, t]))
                reports[i, t] = new_r
        if max_change <= tol:
            converged = True
            break

    gap = truthfulness_gap(
        reports, marginals, b, c, eta, beta=conjugate.beta, mw=False, tol=1e-8
    )
    if not gap.passed:
        raise RuntimeError(
            f"best responses left the truthfulness band: gap={gap.gap}, "
            f"bound={gap.bound}"
        )
    return IterationResult(
        reports=reports,
        converged=converged,
        sweeps_used=sweeps_used,
        max_change=max_change,
        gap_report=gap,
    )


def accuracy_order(belief_marginals, theta) -> np.ndarray:
    """Per-forecaster accuracy of belief marginals against ``theta``."""
    p = np.asarray(belief_marginals, dtype=float)
    th = np.asarray(theta, dtype=float)
    return 1.0 - np.mean((p - th[np.newaxis, :]) ** 2, axis=1)


def _event_best_response_marginal(belief, i, t, snapshot, eta, panel, rng, conjugate):
    """Best response for (i, t), marginalizing conditioning outcomes."""
    own = snapshot[i]
    opp = np.delete(snapshot, i, axis=0)
    if panel is None:
        ys, ps = belief.support_arrays()
        objective = _EventObjective(ys, ps, t, own, opp, eta)
        _check_concavity_witness(objective)
        return golden_section_max(objective, tol=1e-10)
    if rng is None:
        raise ValueError("panel marginalization needs an rng")
    outside = belief.blocks.complement(t)
    total = 0.0
    for _ in range(panel):
        y = belief.sample(rng)
        conditioning = {j: int(y[j]) for j in outside}
        br = best_response_event(
            belief, t, own, opp, conditioning, eta, conjugate, check_concavity=False
        )
        total += br.report
    return total / panel

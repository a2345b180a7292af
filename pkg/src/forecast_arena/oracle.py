"""Brute-force reference implementations for small instances.

Everything here is computed by enumerating the full outcome support with
plain Python arithmetic (exact fractions where the distribution parameters
are exact). No code is shared with the fast paths it validates, and nothing
here falls back to sampling: exceeding the size caps is an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .distributions import ConditionalQuery, EventDistribution
from .errors import EnumerationCapError

# Hard caps; oracle paths never silently degrade past them.
MAX_EVENTS = 16
MAX_FORECASTERS = 8


def _check_caps(m: int, n: int | None = None) -> None:
    if m > MAX_EVENTS:
        raise EnumerationCapError(f"oracle handles m <= {MAX_EVENTS}, got {m}")
    if n is not None and n > MAX_FORECASTERS:
        raise EnumerationCapError(f"oracle handles n <= {MAX_FORECASTERS}, got {n}")


def _score(report, outcome):
    d = report - outcome
    return 1 - d * d


def _row_total(row, y):
    total = 0
    for r, v in zip(row, y):
        total = total + _score(r, v)
    return total


def _mw_probability(q: list, eta: float) -> list[float]:
    mx = max(float(v) for v in q)
    ws = [math.exp(eta * (float(v) - mx)) for v in q]
    z = sum(ws)
    return [w / z for w in ws]


def exact_winner_distribution(reports, dist: EventDistribution, eta: float) -> list[float]:
    """Selection probabilities averaged over the full outcome support."""
    rows = [list(row) for row in reports]
    _check_caps(dist.m, len(rows))
    out = [0.0] * len(rows)
    for y, p in dist.support(MAX_EVENTS):
        q = [_row_total(row, y) for row in rows]
        pi = _mw_probability(q, eta)
        pf = float(p)
        for i, v in enumerate(pi):
            out[i] += pf * v
    return out


def exact_expected_utility(
    i: int, candidate_row, opponent_rows, belief: EventDistribution, eta: float
) -> float:
    """Forecaster ``i``'s expected win probability under their own belief.

    ``opponent_rows`` holds the other forecasters' reports in order; the
    candidate row is inserted at position ``i``.
    """
    rows = [list(r) for r in opponent_rows]
    rows.insert(i, list(candidate_row))
    _check_caps(belief.m, len(rows))
    total = 0.0
    for y, p in belief.support(MAX_EVENTS):
        q = [_row_total(row, y) for row in rows]
        total += float(p) * _mw_probability(q, eta)[i]
    return total


def exact_conditional_mean(dist: EventDistribution, query: ConditionalQuery):
    """``E[Y_target | assignment]`` by direct summation over the support."""
    _check_caps(dist.m)
    num = 0
    den = 0
    for y, p in dist.support(MAX_EVENTS):
        if all(y[j] == v for j, v in query.assignment.items()):
            den = den + p
            if y[query.target]:
                num = num + p
    if den == 0:
        from .errors import ZeroProbabilityConditionError

        raise ZeroProbabilityConditionError("assignment has probability 0")
    return num / den


@dataclass(frozen=True)
class OracleAccuracy:
    """Exact accuracies and expected scores from full enumeration.

    ``q_star[i]`` is the expected total score of forecaster ``i``'s belief
    marginals; ``expected_q[i]`` that of their reports. The identity
    ``accuracy[i] == q_star[i]/m + c_theta`` is checked at construction.
    """

    accuracy: list
    c_theta: object
    q_star: list
    expected_q: list


def exact_accuracy_and_scores(
    belief_marginals, reports, dist: EventDistribution
) -> OracleAccuracy:
    """Accuracies plus expected belief/report scores, all by enumeration."""
    p_rows = [list(r) for r in belief_marginals]
    r_rows = [list(r) for r in reports]
    if len(p_rows) != len(r_rows):
        raise ValueError("belief and report row counts differ")
    _check_caps(dist.m, len(p_rows))
    support = dist.support(MAX_EVENTS)
    m = dist.m

    theta = [sum(p for y, p in support if y[t]) for t in range(m)]
    c_theta = sum(th * (1 - th) for th in theta) / m

    accuracy = []
    for row in p_rows:
        sq = sum((pv - th) * (pv - th) for pv, th in zip(row, theta))
        accuracy.append(1 - sq / m)

    q_star = []
    for row in p_rows:
        q_star.append(sum(p * _row_total(row, y) for y, p in support))
    expected_q = []
    for row in r_rows:
        expected_q.append(sum(p * _row_total(row, y) for y, p in support))

    for a, qs in zip(accuracy, q_star):
        if abs(float(a) - (float(qs) / m + float(c_theta))) > 1e-12:
            raise RuntimeError(
                "accuracy/expected-score identity violated; enumeration is broken"
            )
    return OracleAccuracy(
        accuracy=accuracy, c_theta=c_theta, q_star=q_star, expected_q=expected_q
    )

"""Quadratic (Brier) scoring and forecaster accuracy.

Scores are ``S(r, y) = 1 - (r - y)^2`` for a probability report ``r`` and a
binary outcome ``y``; a forecaster's total over m events lands in ``[0, m]``.
Accuracy compares belief marginals against the true event marginals and is
tied to expected score by an exact identity (see ``accuracy_profile``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def quadratic_score(report: float, outcome: int) -> float:
    """Score a single probability report against a binary outcome.

    Returns ``1 - (report - outcome)^2``, in ``[0, 1]``; 1 is a perfect
    report, 0 a maximally wrong one.
    """
    if not 0.0 <= report <= 1.0:
        raise ValueError(f"report must be in [0, 1], got {report!r}")
    if outcome not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {outcome!r}")
    d = report - outcome
    return 1.0 - d * d


def score_totals(reports: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
    """Total quadratic score per forecaster.

    ``reports`` is the n x m matrix of submitted probabilities, ``outcomes``
    a length-m 0/1 vector. Returns the length-n vector with entries
    ``q_i = sum_t S(reports[i, t], outcomes[t])``.
    """
    r = np.asarray(reports, dtype=float)
    y = np.asarray(outcomes, dtype=float)
    if r.ndim != 2:
        raise ValueError(f"reports must be 2-D (n x m), got shape {r.shape}")
    if y.shape != (r.shape[1],):
        raise ValueError(
            f"outcomes length {y.shape} does not match report columns {r.shape[1]}"
        )
    if np.any((r < 0.0) | (r > 1.0)):
        raise ValueError("reports must lie in [0, 1]")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("outcomes must be 0/1")
    d = r - y[np.newaxis, :]
    return np.sum(1.0 - d * d, axis=1)


@dataclass(frozen=True)
class AccuracyProfile:
    """Per-forecaster accuracy plus the marginal-variance constant.

    ``accuracy[i] = 1 - (1/m) * sum_t (p_it - theta_t)^2`` and
    ``c_theta = (1/m) * sum_t theta_t * (1 - theta_t)``. With all inputs in
    [0, 1] each accuracy lies in [0, 1] and ``c_theta`` in [0, 1/4].
    """

    accuracy: np.ndarray
    c_theta: float


def accuracy_profile(belief_marginals: np.ndarray, theta: np.ndarray) -> AccuracyProfile:
    """Accuracy of each forecaster's belief marginals against ``theta``.

    The identity ``a_i = (1/m) E[sum_t S(p_it, Y_t)] + c_theta`` holds
    exactly for any joint outcome distribution with marginals ``theta``;
    the exact-enumeration oracle recomputes the right-hand side to verify.
    """
    p = np.asarray(belief_marginals, dtype=float)
    th = np.asarray(theta, dtype=float)
    if p.ndim != 2:
        raise ValueError(f"belief marginals must be 2-D (n x m), got shape {p.shape}")
    if th.shape != (p.shape[1],):
        raise ValueError(
            f"theta length {th.shape} does not match belief columns {p.shape[1]}"
        )
    if np.any((p < 0.0) | (p > 1.0)) or np.any((th < 0.0) | (th > 1.0)):
        raise ValueError("belief marginals and theta must lie in [0, 1]")
    m = p.shape[1]
    acc = 1.0 - np.sum((p - th[np.newaxis, :]) ** 2, axis=1) / m
    c_theta = float(np.sum(th * (1.0 - th)) / m)
    return AccuracyProfile(accuracy=acc, c_theta=c_theta)


def report_accuracy(reports: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Diagnostic only: the accuracy formula applied to reports.

    Accuracy proper is defined on belief marginals; this helper exists so
    experiment summaries can show how far strategic reports drift.
    """
    return accuracy_profile(reports, theta).accuracy

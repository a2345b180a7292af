"""Winner-selection mechanisms for forecasting competitions.

The core selection rule maps total quadratic scores ``q`` to a probability
vector over forecasters via the gradient of a smooth convex conjugate,
``pi = grad C(eta * q)``. With the log-sum-exp conjugate this is exactly the
Multiplicative Weights rule ``pi_i = exp(eta q_i) / sum_j exp(eta q_j)``,
computed here with max-subtraction for overflow safety.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .distributions import EventDistribution
from .scoring import score_totals


class ConjugateDomainError(ValueError):
    """Raised when a conjugate's gradient leaves the probability simplex."""


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - np.max(z)
    e = np.exp(z)
    return e / np.sum(e)


class LogSumExpConjugate:
    """``C(x) = log sum_i exp(x_i)``; its gradient is the softmax."""

    name = "log-sum-exp"
    # regularity constants used for truthfulness-regime checks and bounds
    alpha = 2.0
    beta = 3.0

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        mx = float(np.max(x))
        return mx + math.log(float(np.sum(np.exp(x - mx))))

    def grad(self, x: np.ndarray) -> np.ndarray:
        return _softmax(np.asarray(x, dtype=float))

    def d2_diag(self, x: np.ndarray) -> np.ndarray:
        s = self.grad(x)
        return s * (1.0 - s)

    def d3_diag(self, x: np.ndarray) -> np.ndarray:
        s = self.grad(x)
        return s * (1.0 - s) * (1.0 - 2.0 * s)


LOG_SUM_EXP = LogSumExpConjugate()

_SIMPLEX_TOL = 1e-9


def _check_simplex(pi: np.ndarray, where: str) -> np.ndarray:
    if np.any(pi < -_SIMPLEX_TOL) or abs(float(np.sum(pi)) - 1.0) > _SIMPLEX_TOL:
        raise ConjugateDomainError(
            f"{where}: gradient left the simplex (sum={float(np.sum(pi))!r}, "
            f"min={float(np.min(pi))!r})"
        )
    return pi


@dataclass(frozen=True)
class MechanismConfig:
    """Learning rate plus the regularizer conjugate driving selection."""

    eta: float
    conjugate: object = LOG_SUM_EXP

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        # probe the gradient once so misconfigured conjugates fail fast
        for n in (1, 3):
            probe = np.linspace(-1.0, 1.0, n)
            pi = np.asarray(self.conjugate.grad(probe), dtype=float)
            _check_simplex(pi, f"conjugate {getattr(self.conjugate, 'name', '?')}")

    def regime_limit(self, b: int) -> float:
        """Largest eta for which the truthfulness analysis applies."""
        return min(self.conjugate.alpha / 2.0, 1.0 / (self.conjugate.beta * b))

    def warn_if_outside_regime(self, b: int) -> bool:
        """Warn (and return True) when eta exceeds the truthfulness regime."""
        limit = self.regime_limit(b)
        if self.eta >= limit:
            warnings.warn(
                f"eta={self.eta} is outside the truthfulness regime "
                f"(needs eta < {limit} for b={b})",
                stacklevel=2,
            )
            return True
        return False


def mw_select_from_scores(q: np.ndarray, eta: float) -> np.ndarray:
    """Multiplicative Weights selection from precomputed score totals."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    return _softmax(eta * np.asarray(q, dtype=float))


def mw_select(reports: np.ndarray, outcomes: np.ndarray, eta: float) -> np.ndarray:
    """Multiplicative Weights selection probabilities.

    ``pi_i`` is proportional to ``exp(eta * q_i)`` where ``q`` are total
    quadratic scores of ``reports`` on ``outcomes``.
    """
    return mw_select_from_scores(score_totals(reports, outcomes), eta)


def ftrl_select(
    reports: np.ndarray, outcomes: np.ndarray, config: MechanismConfig
) -> np.ndarray:
    """Selection probabilities ``grad C(eta * q)`` for the configured conjugate."""
    q = score_totals(reports, outcomes)
    pi = np.asarray(config.conjugate.grad(config.eta * q), dtype=float)
    return _check_simplex(pi, "ftrl_select")


def sample_winner(pi: np.ndarray, rng: np.random.Generator) -> int:
    """Draw a forecaster index from ``pi`` by inverse CDF."""
    pi = np.asarray(pi, dtype=float)
    if np.any(pi < -1e-12) or abs(float(np.sum(pi)) - 1.0) > 1e-9:
        raise ValueError("pi is not a probability vector")
    cum = np.cumsum(pi)
    k = int(np.searchsorted(cum, rng.random(), side="right"))
    return min(k, len(pi) - 1)


@dataclass(frozen=True)
class ExpectedSelection:
    """Expected selection probabilities, with standard errors when sampled."""

    pi: np.ndarray
    stderr: np.ndarray | None
    method: str
    trials: int


def expected_selection(
    reports: np.ndarray,
    dist: EventDistribution,
    config: MechanismConfig,
    method: str = "exact",
    trials: int = 10_000,
    rng: np.random.Generator | None = None,
) -> ExpectedSelection:
    """Average selection probabilities over outcomes drawn from ``dist``.

    ``method='exact'`` sums over the enumerated support (small m only);
    ``method='monte-carlo'`` averages over ``trials`` sampled outcomes and
    reports the per-entry standard error of the mean.
    """
    reports = np.asarray(reports, dtype=float)
    n = reports.shape[0]
    if method == "exact":
        ys, ps = dist.support_arrays()
        total = np.zeros(n)
        for y, p in zip(ys, ps):
            total += p * ftrl_select(reports, y, config)
        return ExpectedSelection(pi=total, stderr=None, method="exact", trials=0)
    if method == "monte-carlo":
        if rng is None:
            raise ValueError("monte-carlo method needs an rng")
        if trials < 1:
            raise ValueError("trials must be >= 1")
        acc = np.zeros(n)
        acc2 = np.zeros(n)
        for _ in range(trials):
            pi = ftrl_select(reports, dist.sample(rng), config)
            acc += pi
            acc2 += pi * pi
        mean = acc / trials
        var = np.maximum(acc2 / trials - mean * mean, 0.0)
        stderr = np.sqrt(var / trials)
        return ExpectedSelection(pi=mean, stderr=stderr, method="monte-carlo", trials=trials)
    raise ValueError(f"unknown method {method!r}")


def near_max_gap(n: int, delta: float, eta: float) -> float:
    """Score slack within which the sampled winner lands w.p. >= 1 - delta/2."""
    if n < 1 or not 0 < delta <= 1 or not eta > 0:
        raise ValueError("need n >= 1, 0 < delta <= 1, eta > 0")
    return math.log(2 * n / delta) / eta


# ---------------------------------------------------------------------------
# conjugate regularity report


@dataclass(frozen=True)
class ConditionCheck:
    ok: bool
    worst_margin: float
    witness: tuple | None


@dataclass(frozen=True)
class ConditionReport:
    """Numeric verification of the conjugate regularity conditions.

    Over the probe set: (i) the diagonal curvature dominates the diagonal
    third derivative, ``d2_i(x) >= alpha * |d3_i(x)|``; (ii) ``log d2_i`` is
    ``beta``-Lipschitz in the sup norm across probe pairs; (iii) ``d2_i > 0``
    everywhere. Analytic partials are cross-checked against central finite
    differences.
    """

    alpha: float
    beta: float
    probes: int
    curvature: ConditionCheck
    log_lipschitz: ConditionCheck
    positivity: ConditionCheck
    fd_max_error: float
    fd_ok: bool

    @property
    def passed(self) -> bool:
        return (
            self.curvature.ok
            and self.log_lipschitz.ok
            and self.positivity.ok
            and self.fd_ok
        )


def check_conjugate_conditions(
    conjugate,
    probes: np.ndarray,
    alpha: float,
    beta: float,
    fd_step: float = 1e-5,
    fd_samples: int = 32,
    fd_tol: float = 1e-4,
) -> ConditionReport:
    """Check the regularity conditions on a probe set; report worst margins.

    Never raises on failure: the result is a report with per-condition
    outcomes and witnesses, so callers can log or assert as they prefer.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    k, n = probes.shape

    worst_curv = math.inf
    curv_witness = None
    worst_pos = math.inf
    pos_witness = None
    d2_all = np.empty((k, n))
    for idx in range(k):
        x = probes[idx]
        d2 = np.asarray(conjugate.d2_diag(x), dtype=float)
        d3 = np.asarray(conjugate.d3_diag(x), dtype=float)
        d2_all[idx] = d2
        margins = d2 - alpha * np.abs(d3)
        i = int(np.argmin(margins))
        if margins[i] < worst_curv:
            worst_curv = float(margins[i])
            curv_witness = (tuple(x), i)
        j = int(np.argmin(d2))
        if d2[j] < worst_pos:
            worst_pos = float(d2[j])
            pos_witness = (tuple(x), j)

    worst_lip = math.inf
    lip_witness = None
    if worst_pos > 0.0:
        logs = np.log(d2_all)
        for idx in range(k - 1):
            dx = float(np.max(np.abs(probes[idx + 1] - probes[idx])))
            if dx == 0.0:
                continue
            dlog = np.abs(logs[idx + 1] - logs[idx])
            i = int(np.argmax(dlog))
            margin = beta * dx - float(dlog[i])
            if margin < worst_lip:
                worst_lip = margin
                lip_witness = (tuple(probes[idx]), tuple(probes[idx + 1]), i)

    fd_max = 0.0
    h = fd_step
    for idx in range(min(k, fd_samples)):
        x = probes[idx]
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            fd_grad = (conjugate.value(x + e) - conjugate.value(x - e)) / (2 * h)
            fd_d2 = (
                np.asarray(conjugate.grad(x + e), dtype=float)[i]
                - np.asarray(conjugate.grad(x - e), dtype=float)[i]
            ) / (2 * h)
            fd_d3 = (
                np.asarray(conjugate.d2_diag(x + e), dtype=float)[i]
                - np.asarray(conjugate.d2_diag(x - e), dtype=float)[i]
            ) / (2 * h)
            g = np.asarray(conjugate.grad(x), dtype=float)[i]
            d2 = np.asarray(conjugate.d2_diag(x), dtype=float)[i]
            d3 = np.asarray(conjugate.d3_diag(x), dtype=float)[i]
            fd_max = max(fd_max, abs(fd_grad - g), abs(fd_d2 - d2), abs(fd_d3 - d3))

    return ConditionReport(
        alpha=alpha,
        beta=beta,
        probes=k,
        curvature=ConditionCheck(worst_curv >= -1e-12, worst_curv, curv_witness),
        log_lipschitz=ConditionCheck(
            worst_lip >= -1e-12 if worst_lip < math.inf else worst_pos > 0.0,
            worst_lip,
            lip_witness,
        ),
        positivity=ConditionCheck(worst_pos > 0.0, worst_pos, pos_witness),
        fd_max_error=fd_max,
        fd_ok=fd_max <= fd_tol,
    )

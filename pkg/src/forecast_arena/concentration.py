"""Tail bounds for sums of block-correlated 0/1 variables.

Closed-form thresholds: the Azuma-style bound for c-supermartingales with
b-bounded increments, the dependent-sum bound obtained from the chain
construction below, and its per-forecaster score variant. The chain itself
replaces each peeled variable's remaining influencers with conditionally
resampled copies, producing mega-variables ``X`` whose partial sums form a
c-supermartingale and correction terms ``E`` forming a martingale; both are
realized here path by path so every property can be checked numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import BlockStructure, EventDistribution
from .errors import EnumerationCapError
from .streams import spawn_rng

# ---------------------------------------------------------------------------
# closed-form thresholds


def _check_params(m: int, b: int, c: float, delta: float) -> None:
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if b < 1:
        raise ValueError(f"b must be >= 1, got {b}")
    if c < 0:
        raise ValueError(f"c must be >= 0, got {c}")
    if not 0 < delta <= 1:
        raise ValueError(f"delta must be in (0, 1], got {delta}")


def azuma_threshold(m: int, b: int, c: float, delta: float) -> float:
    """Deviation beyond which a c-supermartingale with b-bounded increments
    lands with probability at most delta: ``m*c + b*sqrt(2*m*ln(1/delta))``."""
    _check_params(m, b, c, delta)
    return m * c + b * math.sqrt(2.0 * m * math.log(1.0 / delta))


def block_tail_threshold(m: int, b: int, c: float, delta: float) -> float:
    """Two-sided deviation bound for a sum of m block-correlated [0,1]
    variables: ``m*c + 2*b*sqrt(2*m*ln(4/delta))``.

    ``b`` counts an event plus its influencers (each event may have up to
    b - 1 influencers besides itself).
    """
    _check_params(m, b, c, delta)
    return m * c + 2.0 * b * math.sqrt(2.0 * m * math.log(4.0 / delta))


def score_tail_threshold(m: int, b: int, c: float, delta: float, n: int) -> float:
    """Per-forecaster score deviation bound ``m*c + 2*b*sqrt(2*m*ln(8*n/delta))``,
    sized so a union bound over n forecasters leaves failure mass delta/2."""
    _check_params(m, b, c, delta)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return m * c + 2.0 * b * math.sqrt(2.0 * m * math.log(8.0 * n / delta))


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054):
    """Wilson score interval for a binomial proportion (default 95%)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


# ---------------------------------------------------------------------------
# empirical tails


@dataclass(frozen=True)
class TailEstimate:
    """Empirical exceedance frequency with its Wilson 95% interval."""

    threshold: float
    exact_mean: float
    trials: int
    exceed_count: int
    frequency: float
    wilson_low: float
    wilson_high: float


def empirical_tail(
    dist: EventDistribution,
    threshold: float,
    trials: int,
    rng: np.random.Generator,
    report_row=None,
) -> TailEstimate:
    """Estimate ``Pr[|statistic - E[statistic]| >= threshold]`` by sampling.

    The statistic is the sum of outcomes, or, when ``report_row`` is given,
    the total quadratic score of that report row. The exact mean comes from
    the distribution's marginals, never from sampling.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    theta = dist.marginals()
    if report_row is None:
        mean = float(np.sum(theta))
    else:
        r = np.asarray(report_row, dtype=float)
        if r.shape != (dist.m,):
            raise ValueError("report row length must match event count")
        mean = float(np.sum(1.0 - r * r - theta + 2.0 * r * theta))
    exceed = 0
    for _ in range(trials):
        y = dist.sample(rng)
        if report_row is None:
            stat = float(np.sum(y))
        else:
            d = np.asarray(report_row, dtype=float) - y
            stat = float(np.sum(1.0 - d * d))
        if abs(stat - mean) >= threshold:
            exceed += 1
    low, high = wilson_interval(exceed, trials)
    return TailEstimate(
        threshold=threshold,
        exact_mean=mean,
        trials=trials,
        exceed_count=exceed,
        frequency=exceed / trials,
        wilson_low=low,
        wilson_high=high,
    )


# ---------------------------------------------------------------------------
# the decoupling chain


def influencer_sets(blocks: BlockStructure) -> tuple[frozenset, ...]:
    """Strict influencer sets (self index dropped) from a block structure.

    Block structures bound ``|B_t| <= b`` with ``t`` inside its own block;
    the tail machinery wants the other members only, of size ``<= b - 1``.
    """
    return tuple(frozenset(bt - {t}) for t, bt in enumerate(blocks.blocks))


@dataclass(frozen=True)
class HajekChain:
    """One realized path of the chain construction.

    Level ``l`` (m down to 0) holds the variable list over events
    ``0..l-1``; ``x[k]`` and ``e[k]`` are the mega-variable and correction
    created when event ``k`` was peeled (``x[m] = e[m] = 0``), and
    ``s_hat[l]`` is the level's proxy sum. ``s`` is the realized original
    sum. By construction ``s_hat[0] - s == sum(e)``.
    """

    s: float
    x: np.ndarray
    e: np.ndarray
    s_hat: np.ndarray
    states: list[tuple[int, ...]]
    gamma_bars: list[tuple[int, ...]]

    def p1_residuals(self) -> np.ndarray:
        """Exact telescoping identity per level: proxy minus its expansion."""
        m = len(self.x) - 1
        out = np.empty(m + 1)
        for lvl in range(m + 1):
            out[lvl] = self.s_hat[lvl] - (
                sum(self.states[lvl]) + float(np.sum(self.x[lvl:]))
            )
        return out


class HajekChainBuilder:
    """Precomputes the conditional resampling tables for one distribution.

    ``influencers[k]`` must exclude ``k`` itself; by default they derive
    from the distribution's declared blocks. Building many paths amortizes
    the table construction. ``centered=False`` deliberately omits the
    conditional-mean subtraction from the mega-variables; it exists so
    verification can prove the drift check has teeth.
    """

    def __init__(
        self,
        dist: EventDistribution,
        influencers=None,
        centered: bool = True,
        cap: int | None = None,
    ):
        self.dist = dist
        self.centered = centered
        m = dist.m
        if influencers is None:
            influencers = influencer_sets(dist.blocks)
        influencers = tuple(frozenset(s) for s in influencers)
        if len(influencers) != m:
            raise ValueError("need one influencer set per event")
        for k, s in enumerate(influencers):
            if k in s:
                raise ValueError(f"event {k} may not be its own influencer here")
        self.influencers = influencers
        self.b = 1 + max((len(s) for s in influencers), default=0)

        support = dist.support(cap)
        # marginal law over the first k events, for each k = m .. 1
        marginals: dict[int, dict[tuple, float]] = {}
        cur: dict[tuple, float] = {}
        for y, p in support:
            cur[tuple(y)] = cur.get(tuple(y), 0.0) + float(p)
        marginals[m] = cur
        for k in range(m - 1, 0, -1):
            nxt: dict[tuple, float] = {}
            for state, p in marginals[k + 1].items():
                key = state[:k]
                nxt[key] = nxt.get(key, 0.0) + p
            marginals[k] = nxt

        # per peeled event k: C (earlier influencers), Cbar, and the
        # conditional law of the C coordinates given the Cbar coordinates
        # under the marginal law of events 0..k-1
        self.c_idx: list[tuple[int, ...]] = []
        self.cbar_idx: list[tuple[int, ...]] = []
        self.tables: list[dict] = []
        for k in range(m):
            c = tuple(sorted(j for j in influencers[k] if j < k))
            cbar = tuple(j for j in range(k) if j not in c)
            self.c_idx.append(c)
            self.cbar_idx.append(cbar)
            table: dict[tuple, dict] = {}
            if k >= 1 and c:
                groups: dict[tuple, dict[tuple, float]] = {}
                for state, p in marginals[k].items():
                    key = tuple(state[j] for j in cbar)
                    pat = tuple(state[j] for j in c)
                    g = groups.setdefault(key, {})
                    g[pat] = g.get(pat, 0.0) + p
                for key, pats in groups.items():
                    items = sorted(pats.items())
                    total = sum(p for _, p in items)
                    probs = np.array([p / total for _, p in items])
                    pattern_rows = [pat for pat, _ in items]
                    means = probs @ np.array(pattern_rows, dtype=float)
                    table[key] = {
                        "patterns": pattern_rows,
                        "cum": np.cumsum(probs),
                        "means": means,
                    }
            self.tables.append(table)

    def build(self, rng: np.random.Generator) -> HajekChain:
        m = self.dist.m
        y = self.dist.sample(rng)
        state = tuple(int(v) for v in y)
        s = float(sum(state))
        x = np.zeros(m + 1)
        e = np.zeros(m + 1)
        s_hat = np.zeros(m + 1)
        s_hat[m] = s
        states: list[tuple[int, ...]] = [()] * (m + 1)
        gamma_bars: list[tuple[int, ...]] = [()] * (m + 1)
        states[m] = state
        for k in range(m - 1, -1, -1):
            c = self.c_idx[k]
            cbar = self.cbar_idx[k]
            gamma = tuple(state[j] for j in cbar)
            gamma_bars[k + 1] = gamma
            if c:
                entry = self.tables[k].get(gamma)
                assert entry is not None, "conditioning outcome has zero probability"
                u = rng.random()
                pick = min(
                    int(np.searchsorted(entry["cum"], u, side="right")),
                    len(entry["patterns"]) - 1,
                )
                resampled = entry["patterns"][pick]
                means = entry["means"]
                offset = 0.0 if not self.centered else float(np.sum(means))
                x[k] = state[k] + sum(state[j] for j in c) - offset
                e[k] = sum(resampled) - float(np.sum(means))
                new = list(state[:k])
                for j, v in zip(c, resampled):
                    new[j] = v
                state = tuple(new)
            else:
                x[k] = state[k]
                e[k] = 0.0
                state = state[:k]
            s_hat[k] = s_hat[k + 1] + e[k]
            states[k] = state
        return HajekChain(s=s, x=x, e=e, s_hat=s_hat, states=states, gamma_bars=gamma_bars)

    # -- exact law propagation (small m) ---------------------------------

    def level_laws(self) -> list[dict[tuple, float]]:
        """Exact distribution of each level's variable list, by propagating
        the resampling kernel over all randomness."""
        m = self.dist.m
        cur: dict[tuple, float] = {}
        for y, p in self.dist.support():
            cur[tuple(y)] = cur.get(tuple(y), 0.0) + float(p)
        laws = [dict(cur)]
        for k in range(m - 1, -1, -1):
            c = self.c_idx[k]
            cbar = self.cbar_idx[k]
            nxt: dict[tuple, float] = {}
            for state, p in cur.items():
                prefix = state[:k]
                if not c:
                    nxt[prefix] = nxt.get(prefix, 0.0) + p
                    continue
                entry = self.tables[k][tuple(state[j] for j in cbar)]
                probs = np.diff(entry["cum"], prepend=0.0)
                for pat, q in zip(entry["patterns"], probs):
                    new = list(prefix)
                    for j, v in zip(c, pat):
                        new[j] = v
                    key = tuple(new)
                    nxt[key] = nxt.get(key, 0.0) + p * float(q)
            cur = nxt
            laws.append(dict(cur))
        return laws  # index l: law at level m - l

    def level_law_tv(self) -> list[float]:
        """Total-variation distance between each level's law and the
        matching marginal of the original distribution (level m first)."""
        m = self.dist.m
        marg: dict[tuple, float] = {}
        for y, p in self.dist.support():
            marg[tuple(y)] = marg.get(tuple(y), 0.0) + float(p)
        out = []
        for step, law in enumerate(self.level_laws()):
            k = m - step
            want: dict[tuple, float] = {}
            for state, p in marg.items():
                key = state[:k]
                want[key] = want.get(key, 0.0) + p
            keys = set(law) | set(want)
            out.append(0.5 * sum(abs(law.get(s, 0.0) - want.get(s, 0.0)) for s in keys))
        return out

    def enumerate_atoms(self, cap: int = 1_000_000):
        """Exact joint law of the whole chain, as (prob, x, e, s) atoms.

        Enumerates every combination of initial outcome and resampling
        choice, merging equal trajectories. Returns ``None`` when the atom
        count would exceed ``cap``; small fixtures stay tiny because each
        level branches over at most ``2^(b-1)`` patterns.
        """
        m = self.dist.m
        atoms: dict[tuple, float] = {}
        for y, p in self.dist.support():
            state = tuple(int(v) for v in y)
            key = (state, (), (), sum(state))
            atoms[key] = atoms.get(key, 0.0) + float(p)
        for k in range(m - 1, -1, -1):
            c = self.c_idx[k]
            cbar = self.cbar_idx[k]
            nxt: dict[tuple, float] = {}
            for (state, xs, es, s), p in atoms.items():
                if not c:
                    key = (state[:k], xs + (float(state[k]),), es + (0.0,), s)
                    nxt[key] = nxt.get(key, 0.0) + p
                    continue
                entry = self.tables[k][tuple(state[j] for j in cbar)]
                means_total = float(np.sum(entry["means"]))
                offset = means_total if self.centered else 0.0
                x_k = state[k] + sum(state[j] for j in c) - offset
                probs = np.diff(entry["cum"], prepend=0.0)
                for pat, q in zip(entry["patterns"], probs):
                    if q == 0.0:
                        continue
                    e_k = float(sum(pat)) - means_total
                    new = list(state[:k])
                    for j, v in zip(c, pat):
                        new[j] = v
                    key = (tuple(new), xs + (x_k,), es + (e_k,), s)
                    nxt[key] = nxt.get(key, 0.0) + p * float(q)
                if len(nxt) > cap:
                    return None
            atoms = nxt
        out = []
        for (_, xs, es, s), p in atoms.items():
            x = np.append(np.array(xs[::-1]), 0.0)  # x[k] for k = 0..m
            e = np.append(np.array(es[::-1]), 0.0)
            out.append((p, x, e, float(s)))
        return out


def build_hajek_chain(
    dist: EventDistribution,
    rng: np.random.Generator,
    influencers=None,
    centered: bool = True,
) -> HajekChain:
    """Realize one chain path; see ``HajekChainBuilder`` for the mechanics."""
    return HajekChainBuilder(dist, influencers=influencers, centered=centered).build(rng)


# ---------------------------------------------------------------------------
# chain verification


@dataclass(frozen=True)
class ChainCheck:
    check: str
    detail: str
    statistic: float
    threshold: float
    passed: bool


@dataclass(frozen=True)
class ChainReport:
    fixture: str
    paths: int
    checks: list[ChainCheck]

    @property
    def passed(self) -> bool:
        return all(ch.passed for ch in self.checks)

    def failures(self) -> list[ChainCheck]:
        return [ch for ch in self.checks if not ch.passed]


def _bucket_key(values, digits: int = 9) -> tuple:
    return tuple(round(float(v), digits) for v in values)


def verify_chain(
    dist: EventDistribution,
    paths: int,
    master_seed: int,
    delta: float = 0.05,
    influencers=None,
    centered: bool = True,
    bucket_min: int = 100,
    fixture_name: str = "",
    exact_law_max_m: int = 6,
    atom_cap: int = 1_000_000,
) -> ChainReport:
    """Run the chain ``paths`` times and check every construction property.

    Per sampled path, the telescoping identity must hold exactly and the
    mega-variables and corrections must stay in [1-b, b] and [-b, b]. The
    conditional-expectation properties (mega-variable means match the
    peeled events, history conditioning moves them by at most the slack c,
    corrections are mean-zero given the later ones) and the two proxy tail
    bounds are checked exactly against the enumerated joint law of all
    chain randomness whenever that enumeration fits in ``atom_cap``;
    otherwise they fall back to sampled estimates with 3-standard-error
    bands (which can flag occasional near-threshold buckets on unlucky
    seeds). The exact route also checks that every level's variable law
    equals the matching marginal of the original distribution.

    All randomness derives from ``master_seed`` through per-path stream
    splitting, so reports are reproducible at any level of concurrency.
    """
    if paths < 1:
        raise ValueError("paths must be >= 1")
    builder = HajekChainBuilder(dist, influencers=influencers, centered=centered)
    m = dist.m
    b = builder.b
    c = dist.blocks.c
    theta = dist.marginals()
    mean_s = float(np.sum(theta))
    thr_mean = m * c + b * math.sqrt(2.0 * m * math.log(4.0 / delta))
    thr_sum = b * math.sqrt(2.0 * m * math.log(4.0 / delta))

    p1_worst = 0.0
    x_lo, x_hi = math.inf, -math.inf
    e_lo, e_hi = math.inf, -math.inf
    x_sum = np.zeros(m)
    x_sumsq = np.zeros(m)
    hist_buckets: dict[tuple, list] = {}
    future_buckets: dict[tuple, list] = {}
    tail_mean = 0
    tail_sum = 0
    for idx in range(paths):
        chain = builder.build(spawn_rng(master_seed, idx))
        p1_worst = max(p1_worst, float(np.max(np.abs(chain.p1_residuals()))))
        x_lo = min(x_lo, float(np.min(chain.x)))
        x_hi = max(x_hi, float(np.max(chain.x)))
        e_lo = min(e_lo, float(np.min(chain.e)))
        e_hi = max(e_hi, float(np.max(chain.e)))
        xs = chain.x[:m]
        x_sum += xs
        x_sumsq += xs * xs
        for k in range(1, m):
            key = (k, _bucket_key(chain.x[:k]))
            acc = hist_buckets.setdefault(key, [0, 0.0, 0.0])
            acc[0] += 1
            acc[1] += float(chain.x[k])
            acc[2] += float(chain.x[k]) ** 2
        for k in range(m):
            key = (k, _bucket_key(chain.e[k + 1 :]))
            acc = future_buckets.setdefault(key, [0, 0.0, 0.0])
            acc[0] += 1
            acc[1] += float(chain.e[k])
            acc[2] += float(chain.e[k]) ** 2
        if abs(chain.s_hat[0] - mean_s) >= thr_mean:
            tail_mean += 1
        if abs(chain.s_hat[0] - chain.s) >= thr_sum:
            tail_sum += 1

    checks: list[ChainCheck] = []
    checks.append(
        ChainCheck("telescope_identity", "max |residual|", p1_worst, 1e-12, p1_worst <= 1e-12)
    )
    checks.append(
        ChainCheck(
            "x_range",
            f"x in [{1 - b}, {b}]",
            max(x_hi - b, (1 - b) - x_lo),
            1e-12,
            x_lo >= 1 - b - 1e-12 and x_hi <= b + 1e-12,
        )
    )
    checks.append(
        ChainCheck(
            "e_range",
            f"e in [{-b}, {b}]",
            max(e_hi - b, -b - e_lo),
            1e-12,
            e_lo >= -b - 1e-12 and e_hi <= b + 1e-12,
        )
    )

    atoms = builder.enumerate_atoms(cap=atom_cap)
    if atoms is not None:
        checks.extend(_exact_property_checks(atoms, m, c, theta, mean_s, thr_mean, thr_sum, delta))
    else:
        checks.extend(
            _sampled_property_checks(
                paths, m, c, theta, x_sum, x_sumsq, hist_buckets, future_buckets,
                tail_mean, tail_sum, thr_mean, thr_sum, delta, bucket_min,
            )
        )
    if m <= exact_law_max_m:
        worst_tv = max(builder.level_law_tv())
        checks.append(
            ChainCheck("level_law_preserved", "max TV", worst_tv, 1e-9, worst_tv <= 1e-9)
        )
    return ChainReport(fixture=fixture_name or dist.kind, paths=paths, checks=checks)


_EXACT_TOL = 1e-9


def _exact_property_checks(atoms, m, c, theta, mean_s, thr_mean, thr_sum, delta):
    """Conditional-mean and tail checks from the exact joint law."""
    checks = []
    total_x = np.zeros(m + 1)
    for p, x, _, _ in atoms:
        total_x += p * x
    for k in range(m):
        dev = abs(float(total_x[k]) - float(theta[k]))
        checks.append(
            ChainCheck("x_mean_matches_event", f"k={k} exact", dev, _EXACT_TOL, dev <= _EXACT_TOL)
        )

    for k in range(1, m):
        buckets: dict[tuple, list] = {}
        for p, x, _, _ in atoms:
            acc = buckets.setdefault(_bucket_key(x[:k]), [0.0, 0.0])
            acc[0] += p
            acc[1] += p * float(x[k])
        worst = 0.0
        for mass, weighted in buckets.values():
            worst = max(worst, abs(weighted / mass - float(theta[k])))
        band = c + _EXACT_TOL
        checks.append(
            ChainCheck(
                "x_drift_within_slack",
                f"k={k} exact over {len(buckets)} histories",
                worst,
                band,
                worst <= band,
            )
        )

    for k in range(m):
        buckets = {}
        for p, _, e, _ in atoms:
            acc = buckets.setdefault(_bucket_key(e[k + 1 :]), [0.0, 0.0])
            acc[0] += p
            acc[1] += p * float(e[k])
        worst = max(abs(w / mass) for mass, w in buckets.values())
        checks.append(
            ChainCheck(
                "e_martingale_mean_zero",
                f"k={k} exact over {len(buckets)} futures",
                worst,
                _EXACT_TOL,
                worst <= _EXACT_TOL,
            )
        )

    prob_mean = 0.0
    prob_sum = 0.0
    for p, _, e, s in atoms:
        s_hat0 = s + float(np.sum(e))
        if abs(s_hat0 - mean_s) >= thr_mean:
            prob_mean += p
        if abs(s_hat0 - s) >= thr_sum:
            prob_sum += p
    checks.append(
        ChainCheck(
            "proxy_tail_vs_mean", f"thr={thr_mean:.6g} exact", prob_mean, delta / 2,
            prob_mean <= delta / 2,
        )
    )
    checks.append(
        ChainCheck(
            "proxy_tail_vs_sum", f"thr={thr_sum:.6g} exact", prob_sum, delta / 2,
            prob_sum <= delta / 2,
        )
    )
    return checks


def _sampled_property_checks(
    paths, m, c, theta, x_sum, x_sumsq, hist_buckets, future_buckets,
    tail_mean, tail_sum, thr_mean, thr_sum, delta, bucket_min,
):
    """Monte Carlo fallback with 3-standard-error bands."""
    checks = []
    x_mean = x_sum / paths
    x_var = np.maximum(x_sumsq / paths - x_mean * x_mean, 0.0)
    x_se = np.sqrt(x_var / paths)
    for k in range(m):
        dev = abs(float(x_mean[k]) - float(theta[k]))
        band = 3.0 * float(x_se[k]) + 1e-12
        checks.append(ChainCheck("x_mean_matches_event", f"k={k}", dev, band, dev <= band))
    for (k, _), (count, total, sq) in sorted(hist_buckets.items()):
        if count < bucket_min:
            continue
        bucket_mean = total / count
        var = max(sq / count - bucket_mean * bucket_mean, 0.0)
        se = math.sqrt(var / count)
        dev = abs(bucket_mean - float(theta[k]))
        band = c + 3.0 * se + 1e-12
        checks.append(
            ChainCheck("x_drift_within_slack", f"k={k} bucket", dev, band, dev <= band)
        )
    for (k, _), (count, total, sq) in sorted(future_buckets.items()):
        if count < bucket_min:
            continue
        bucket_mean = total / count
        var = max(sq / count - bucket_mean * bucket_mean, 0.0)
        se = math.sqrt(var / count)
        band = 3.0 * se + 1e-12
        dev = abs(bucket_mean)
        checks.append(
            ChainCheck("e_martingale_mean_zero", f"k={k} bucket", dev, band, dev <= band)
        )
    freq_mean = tail_mean / paths
    freq_sum = tail_sum / paths
    checks.append(
        ChainCheck(
            "proxy_tail_vs_mean", f"thr={thr_mean:.6g}", freq_mean, delta / 2,
            freq_mean <= delta / 2,
        )
    )
    checks.append(
        ChainCheck(
            "proxy_tail_vs_sum", f"thr={thr_sum:.6g}", freq_sum, delta / 2,
            freq_sum <= delta / 2,
        )
    )
    return checks

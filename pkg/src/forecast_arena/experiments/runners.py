"""Experiment runners: seeded, parallelizable, summary-producing.

Each runner consumes a validated ``ExperimentConfig`` and returns a
``RunResult`` holding summary rows (one CSV), optional per-trial rows, and
plot series. Monte Carlo work is split into fixed-size chunks of trials;
every trial derives its own random stream from the master seed and trial
index, and aggregation only ever sums or concatenates in index order, so
results are identical at any worker count.
"""

from __future__ import annotations

import hashlib
import math
import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from .. import agents, concentration, scoring
from ..distributions import EventDistribution, hidden_coin_groups, independent
from ..mechanism import mw_select_from_scores, near_max_gap, sample_winner
from ..streams import spawn_rng
from .config import (
    ConfigError,
    ExperimentConfig,
    auto_learning_rate,
    build_distribution,
    event_complexity,
    fixture_name,
)

_CHUNK = 1024


@dataclass
class RunResult:
    experiment: str
    columns: list[str]
    rows: list[dict]
    trial_columns: list[str] = field(default_factory=list)
    trial_rows: list[dict] = field(default_factory=list)
    plotdata: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(row.get("passed", True) for row in self.rows)


def outcome_digest(y) -> str:
    bits = np.packbits(np.asarray(y, dtype=np.uint8))
    return hashlib.sha256(bits.tobytes()).hexdigest()[:12]


def _invoke(fn, args, lo, hi):
    return fn(args, lo, hi)


def _map_trials(total: int, fn, args, workers: int) -> list:
    """Run ``fn(args, lo, hi)`` over fixed chunks; concatenate in order."""
    chunks = [(lo, min(lo + _CHUNK, total)) for lo in range(0, total, _CHUNK)]
    if workers <= 1 or len(chunks) <= 1:
        parts = [fn(args, lo, hi) for lo, hi in chunks]
    else:
        with multiprocessing.Pool(workers) as pool:
            parts = pool.starmap(_invoke, [(fn, args, lo, hi) for lo, hi in chunks])
    return [item for part in parts for item in part]


def _binomial_se(freq: float, trials: int) -> float:
    return math.sqrt(max(freq * (1.0 - freq), 0.0) / trials)


def _histogram_series(values, bins: int = 50):
    counts, edges = np.histogram(values, bins=bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return list(centers), [int(v) for v in counts]


# ---------------------------------------------------------------------------
# selection: the winner's score is near the max


def _selection_trials(args, lo, hi):
    dist, reports, eta, gap, seed = args
    out = []
    for idx in range(lo, hi):
        rng = spawn_rng(seed, idx)
        y = dist.sample(rng)
        q = scoring.score_totals(reports, y)
        pi = mw_select_from_scores(q, eta)
        w = sample_winner(pi, rng)
        shortfall = float(np.max(q) - q[w])
        out.append((idx, outcome_digest(y), q, w, shortfall <= gap))
    return out


def selection_reports(n: int, m: int, theta: float, seed: int) -> np.ndarray:
    """The fixed report matrix for the selection experiment.

    Row 0 reports the true marginal everywhere; the remaining rows are
    extreme 0/1 reports drawn from a pinned stream, giving a real score
    spread between the best row and the rest.
    """
    rng = spawn_rng(seed, 900_001)
    reports = np.empty((n, m))
    reports[0] = theta
    reports[1:] = (rng.random((n - 1, m)) < 0.5).astype(float)
    return reports


def run_selection(cfg: ExperimentConfig) -> RunResult:
    dist = build_distribution(cfg.distribution)
    n, m = cfg.n, dist.m
    eta = cfg.resolved_eta()
    delta = cfg.delta
    gap = near_max_gap(n, delta, eta)
    theta = float(dist.marginals()[0])
    reports = selection_reports(n, m, theta, cfg.seed)

    records = _map_trials(
        cfg.trials, _selection_trials, (dist, reports, eta, gap, cfg.seed), cfg.workers
    )
    hits = sum(1 for rec in records if rec[4])
    freq = hits / cfg.trials
    se = _binomial_se(freq, cfg.trials)
    low, high = concentration.wilson_interval(hits, cfg.trials)
    target = 1.0 - delta / 2.0 - 3.0 * se
    row = {
        "n": n,
        "m": m,
        "eta": eta,
        "delta": delta,
        "near_max_gap": gap,
        "trials": cfg.trials,
        "hits": hits,
        "frequency": freq,
        "wilson_low": low,
        "wilson_high": high,
        "required_frequency": target,
        "passed": freq >= target,
    }
    shortfalls = [float(np.max(rec[2]) - rec[2][rec[3]]) for rec in records]
    trial_columns = ["trial", "y_digest"] + [f"q_{i}" for i in range(n)] + [
        "winner",
        "near_max_ok",
    ]
    trial_rows = [
        {
            "trial": rec[0],
            "y_digest": rec[1],
            **{f"q_{i}": float(rec[2][i]) for i in range(n)},
            "winner": rec[3],
            "near_max_ok": rec[4],
        }
        for rec in records
    ]
    return RunResult(
        experiment="selection",
        columns=list(row.keys()),
        rows=[row],
        trial_columns=trial_columns,
        trial_rows=trial_rows,
        plotdata={"winner_shortfall_hist": _histogram_series(shortfalls)},
        meta={"near_max_gap": gap, "title": f"winner score shortfall (n={n}, m={m}, eta={eta})"},
    )


# ---------------------------------------------------------------------------
# concentration: dependent-sum tails under the closed-form threshold


def _tail_trials(args, lo, hi):
    dist, mean, threshold, seed, fixture_idx = args
    out = []
    for idx in range(lo, hi):
        rng = spawn_rng(seed, fixture_idx, idx)
        dev = abs(float(np.sum(dist.sample(rng))) - mean)
        out.append((idx, dev, dev >= threshold))
    return out


def run_concentration(cfg: ExperimentConfig) -> RunResult:
    rows = []
    trial_rows = []
    plotdata = {}
    thresholds = {}
    for fixture_idx, spec in enumerate(cfg.fixtures):
        dist = build_distribution(spec)
        name = fixture_name(spec)
        b = dist.blocks.b
        c = dist.blocks.c
        threshold = concentration.block_tail_threshold(dist.m, b, c, cfg.delta)
        mean = float(np.sum(dist.marginals()))
        records = _map_trials(
            cfg.trials,
            _tail_trials,
            (dist, mean, threshold, cfg.seed, fixture_idx),
            cfg.workers,
        )
        exceed = sum(1 for rec in records if rec[2])
        low, high = concentration.wilson_interval(exceed, cfg.trials)
        rows.append(
            {
                "fixture": name,
                "m": dist.m,
                "b": b,
                "c": c,
                "delta": cfg.delta,
                "threshold": threshold,
                "exact_mean": mean,
                "trials": cfg.trials,
                "exceed_count": exceed,
                "frequency": exceed / cfg.trials,
                "wilson_low": low,
                "wilson_high": high,
                "passed": high <= cfg.delta,
            }
        )
        devs = [rec[1] for rec in records]
        plotdata[f"deviation_hist__{name}"] = _histogram_series(devs)
        thresholds[name] = threshold
        trial_rows.extend(
            {"fixture": name, "trial": rec[0], "abs_deviation": rec[1], "exceeded": rec[2]}
            for rec in records
        )
    return RunResult(
        experiment="concentration",
        columns=list(rows[0].keys()),
        rows=rows,
        trial_columns=["fixture", "trial", "abs_deviation", "exceeded"],
        trial_rows=trial_rows,
        plotdata=plotdata,
        meta={"thresholds": thresholds, "delta": cfg.delta},
    )


# ---------------------------------------------------------------------------
# complexity: probability of an epsilon-optimal winner at guarantee scale


def _complexity_trials(args, lo, hi):
    dist, reports, eta, optimal_mask, seed, sweep_idx = args
    out = []
    for idx in range(lo, hi):
        rng = spawn_rng(seed, sweep_idx, idx)
        y = dist.sample(rng)
        q = scoring.score_totals(reports, y)
        pi = mw_select_from_scores(q, eta)
        w = sample_winner(pi, rng)
        out.append((idx, outcome_digest(y), q, w, bool(optimal_mask[w])))
    return out


def complexity_setting(cfg: ExperimentConfig, m: int):
    """True distribution, beliefs, reports and the epsilon-optimal set."""
    if m % cfg.b != 0:
        m += cfg.b - (m % cfg.b)
    dist = hidden_coin_groups(m, cfg.b, cfg.c)
    theta = dist.marginals()
    beliefs = np.clip(
        0.5 + np.asarray(cfg.belief_offsets, dtype=float)[:, np.newaxis], 0.0, 1.0
    ) * np.ones((1, m))
    profile = scoring.accuracy_profile(beliefs, theta)
    acc = profile.accuracy
    optimal_mask = acc + cfg.epsilon >= float(np.max(acc))
    eta = cfg.resolved_eta()
    gamma = agents.mw_truthfulness_band(eta, cfg.b, cfg.c)
    if cfg.strategy == "truthful":
        reports = beliefs.copy()
    else:
        best = int(np.argmax(acc))
        reports = agents.band_adversary_reports(beliefs, theta, gamma, best)
    return dist, beliefs, reports, optimal_mask, acc, eta, gamma


def run_complexity(cfg: ExperimentConfig) -> RunResult:
    m_star = event_complexity(cfg.n, cfg.b, cfg.epsilon, cfg.delta)
    rows = []
    trial_rows = []
    xs, ys, lows, highs = [], [], [], []
    for sweep_idx, m in enumerate(cfg.m_list):
        dist, beliefs, reports, optimal_mask, acc, eta, gamma = complexity_setting(cfg, m)
        records = _map_trials(
            cfg.trials,
            _complexity_trials,
            (dist, reports, eta, optimal_mask, cfg.seed, sweep_idx),
            cfg.workers,
        )
        good = sum(1 for rec in records if rec[4])
        freq = good / cfg.trials
        low, high = concentration.wilson_interval(good, cfg.trials)
        rows.append(
            {
                "m": dist.m,
                "m_star": m_star,
                "at_guarantee_scale": dist.m >= m_star,
                "n": cfg.n,
                "b": cfg.b,
                "c": cfg.c,
                "epsilon": cfg.epsilon,
                "delta": cfg.delta,
                "eta": eta,
                "gamma": gamma,
                "strategy": cfg.strategy,
                "trials": cfg.trials,
                "optimal_count": good,
                "frequency": freq,
                "wilson_low": low,
                "wilson_high": high,
                "required_probability": 1.0 - cfg.delta,
                "passed": low >= 1.0 - cfg.delta,
            }
        )
        xs.append(dist.m)
        ys.append(freq)
        lows.append(low)
        highs.append(high)
        trial_rows.extend(
            {
                "m": dist.m,
                "trial": rec[0],
                "y_digest": rec[1],
                **{f"q_{i}": float(rec[2][i]) for i in range(cfg.n)},
                "winner": rec[3],
                "winner_eps_optimal": rec[4],
            }
            for rec in records
        )
    trial_columns = ["m", "trial", "y_digest"] + [f"q_{i}" for i in range(cfg.n)] + [
        "winner",
        "winner_eps_optimal",
    ]
    return RunResult(
        experiment="complexity",
        columns=list(rows[0].keys()),
        rows=rows,
        trial_columns=trial_columns,
        trial_rows=trial_rows,
        plotdata={
            "eps_optimal_frequency": (xs, ys),
            "eps_optimal_wilson_low": (xs, lows),
            "eps_optimal_wilson_high": (xs, highs),
        },
        meta={"m_star": m_star, "required": 1.0 - cfg.delta, "strategy": cfg.strategy},
    )


# ---------------------------------------------------------------------------
# truthfulness: best-response bands over a fixture grid


def truthfulness_fixtures(cfg: ExperimentConfig):
    """Built-in grid cases: (name, n, [beliefs], opponent draws)."""
    rng = spawn_rng(cfg.seed, 700_001)
    cases = []
    wanted = set(cfg.fixtures) if cfg.fixtures else None

    def include(name):
        return wanted is None or name in wanted

    for n in cfg.n_list:
        if include("independent-m3"):
            beliefs = [
                independent(np.round(rng.uniform(0.15, 0.85, size=3), 3)) for _ in range(n)
            ]
            cases.append(("independent-m3", n, beliefs, cfg.opponent_draws))
        if include("random-bias-m3"):
            pairs = [(0.3, 0.7), (0.2, 0.8), (0.35, 0.65)]
            beliefs = [
                build_distribution(
                    {"family": "random-bias", "m": 3, "biases": list(pairs[i % 3])}
                )
                for i in range(n)
            ]
            cases.append(("random-bias-m3", n, beliefs, cfg.opponent_draws))
        if include("hidden-coin-m4-b2"):
            beliefs = [
                build_distribution({"family": "hidden-coin-groups", "m": 4, "b": 2, "c": 0.1})
                for _ in range(n)
            ]
            cases.append(("hidden-coin-m4-b2", n, beliefs, cfg.opponent_draws))
        if include("disjoint-m4-b2"):
            beliefs = [
                build_distribution(
                    {
                        "family": "disjoint-blocks",
                        "partition": [[0, 1], [2, 3]],
                        "marginals": list(np.round(rng.uniform(0.2, 0.8, size=2), 3)),
                    }
                )
                for _ in range(n)
            ]
            cases.append(("disjoint-m4-b2", n, beliefs, cfg.opponent_draws))
        if include("election-m5"):
            beliefs = [
                build_distribution(
                    {
                        "family": "election",
                        "state_sizes": [2, 3],
                        "base_marginals": list(np.round(rng.uniform(0.35, 0.65, size=5), 3)),
                        "national_shift": 0.05,
                        "state_swing": 0.1,
                    }
                )
                for _ in range(n)
            ]
            cases.append(("election-m5", n, beliefs, cfg.opponent_draws))
    if include("independent-m8"):
        beliefs = [
            independent(np.round(rng.uniform(0.2, 0.8, size=8), 3)) for _ in range(2)
        ]
        cases.append(("independent-m8", 2, beliefs, 1))
    return cases


def _realizable_conditionings(belief: EventDistribution, t: int):
    outside = belief.blocks.complement(t)
    seen = []
    got = set()
    for y, _ in belief.support():
        key = tuple(y[j] for j in outside)
        if key not in got:
            got.add(key)
            seen.append(dict(zip(outside, key)))
    return seen


def run_truthfulness(cfg: ExperimentConfig) -> RunResult:
    rows = []
    case_rows = []
    plot_x: dict[str, list] = {}
    plot_y: dict[str, list] = {}
    for case_idx, (name, n, beliefs, draws) in enumerate(truthfulness_fixtures(cfg)):
        b, c = agents.shared_block_params(beliefs)
        marginals = [d.marginals() for d in beliefs]
        m = beliefs[0].m
        for eta in cfg.etas:
            if eta >= 1.0 / (4.0 * b):
                raise ConfigError(f"eta={eta} outside the band regime for b={b}")
            mw_bound = agents.mw_truthfulness_band(eta, b, c)
            general_bound = agents.truthfulness_band(eta, b, c)
            cond_bound = agents.conditional_report_band(eta, b, beta=3.0)
            max_marg = 0.0
            max_cond = 0.0
            cases = 0
            for draw in range(draws):
                rng = spawn_rng(cfg.seed, 700_100, case_idx, draw)
                reports = rng.uniform(0.0, 1.0, size=(n, m))
                for i in range(n):
                    opp = np.delete(reports, i, axis=0)
                    for t in range(m):
                        for conditioning in _realizable_conditionings(beliefs[i], t):
                            br = agents.best_response_event(
                                beliefs[i], t, reports[i], opp, conditioning, eta
                            )
                            gap_m = abs(br.report - float(marginals[i][t]))
                            gap_c = abs(br.report - br.conditional_belief_mean)
                            max_marg = max(max_marg, gap_m)
                            max_cond = max(max_cond, gap_c)
                            cases += 1
                            case_rows.append(
                                {
                                    "fixture": name,
                                    "n": n,
                                    "eta": eta,
                                    "forecaster": i,
                                    "event": t,
                                    "conditioning": "".join(
                                        str(v) for v in conditioning.values()
                                    ),
                                    "best_response": br.report,
                                    "conditional_mean": br.conditional_belief_mean,
                                    "belief_marginal": float(marginals[i][t]),
                                    "gap_marginal": gap_m,
                                    "gap_conditional": gap_c,
                                }
                            )
            rows.append(
                {
                    "fixture": name,
                    "n": n,
                    "m": m,
                    "b": b,
                    "c": c,
                    "eta": eta,
                    "cases": cases,
                    "max_gap_marginal": max_marg,
                    "mw_bound": mw_bound,
                    "general_bound": general_bound,
                    "max_gap_conditional": max_cond,
                    "conditional_bound": cond_bound,
                    "passed": max_marg <= mw_bound + 1e-8
                    and max_cond <= cond_bound + 1e-8,
                }
            )
            key = f"{name}-n{n}"
            plot_x.setdefault(key, []).append(eta)
            plot_y.setdefault(key, []).append(max_marg)
    plotdata = {f"max_gap__{k}": (plot_x[k], plot_y[k]) for k in plot_x}
    return RunResult(
        experiment="truthfulness",
        columns=list(rows[0].keys()),
        rows=rows,
        trial_columns=list(case_rows[0].keys()) if case_rows else [],
        trial_rows=case_rows,
        plotdata=plotdata,
        meta={"etas": cfg.etas},
    )


# ---------------------------------------------------------------------------
# tightness: how the centered tail quantile actually scales with b


def _tightness_trials(args, lo, hi):
    dist, mean, seed, b_idx = args
    out = []
    for idx in range(lo, hi):
        rng = spawn_rng(seed, b_idx, idx)
        out.append((idx, abs(float(np.sum(dist.sample(rng))) - mean)))
    return out


def _quantile_rank_ci(sorted_values: np.ndarray, p: float):
    n = len(sorted_values)
    low_p, high_p = concentration.wilson_interval(int(round(p * n)), n)
    k_lo = min(max(int(math.floor(low_p * (n - 1))), 0), n - 1)
    k_hi = min(max(int(math.ceil(high_p * (n - 1))), 0), n - 1)
    return float(sorted_values[k_lo]), float(sorted_values[k_hi])


def run_tightness(cfg: ExperimentConfig) -> RunResult:
    m, c, delta = cfg.m, cfg.c, cfg.delta
    rows = []
    trial_rows = []
    excesses = []
    thr_excesses = []
    ci = []
    for b_idx, b in enumerate(cfg.b_list):
        dist = hidden_coin_groups(m, b, c)
        mean = float(np.sum(dist.marginals()))
        records = _map_trials(
            cfg.trials, _tightness_trials, (dist, mean, cfg.seed, b_idx), cfg.workers
        )
        devs = np.sort(np.array([rec[1] for rec in records]))
        q = float(np.quantile(devs, 1.0 - delta)) - m * c
        q_lo, q_hi = _quantile_rank_ci(devs, 1.0 - delta)
        thr = concentration.block_tail_threshold(m, b, c, delta) - m * c
        excesses.append(q)
        thr_excesses.append(thr)
        ci.append((q_lo - m * c, q_hi - m * c))
        trial_rows.extend(
            {"b": b, "trial": rec[0], "abs_deviation": rec[1]} for rec in records
        )
    log_b = np.log(np.asarray(cfg.b_list, dtype=float))
    emp_slope = float(np.polyfit(log_b, np.log(np.asarray(excesses)), 1)[0])
    thr_slope = float(np.polyfit(log_b, np.log(np.asarray(thr_excesses)), 1)[0])
    passed = 0.35 <= emp_slope <= 0.65 and 0.9 <= thr_slope <= 1.1
    for b, q, thr, (lo, hi) in zip(cfg.b_list, excesses, thr_excesses, ci):
        rows.append(
            {
                "b": b,
                "m": m,
                "c": c,
                "delta": delta,
                "trials": cfg.trials,
                "quantile_excess": q,
                "quantile_ci_low": lo,
                "quantile_ci_high": hi,
                "threshold_excess": thr,
                "empirical_slope": emp_slope,
                "threshold_slope": thr_slope,
                "passed": passed,
            }
        )
    return RunResult(
        experiment="tightness",
        columns=list(rows[0].keys()),
        rows=rows,
        trial_columns=["b", "trial", "abs_deviation"],
        trial_rows=trial_rows,
        plotdata={
            "quantile_excess": (list(cfg.b_list), excesses),
            "threshold_excess": (list(cfg.b_list), thr_excesses),
        },
        meta={"empirical_slope": emp_slope, "threshold_slope": thr_slope},
    )


# ---------------------------------------------------------------------------
# chain-check: construction properties of the decoupling chain


def run_chain_check(cfg: ExperimentConfig) -> RunResult:
    dist = build_distribution(cfg.distribution)
    name = fixture_name(cfg.distribution)
    report = concentration.verify_chain(
        dist,
        paths=cfg.trials,
        master_seed=cfg.seed,
        delta=cfg.delta,
        centered=not cfg.mutated,
        fixture_name=name,
    )
    rows = [
        {
            "fixture": name,
            "check": ch.check,
            "detail": ch.detail,
            "statistic": ch.statistic,
            "threshold": ch.threshold,
            "passed": ch.passed,
        }
        for ch in report.checks
    ]
    margins = [
        (ch.threshold - ch.statistic) for ch in report.checks if ch.threshold > 0
    ]
    return RunResult(
        experiment="chain-check",
        columns=list(rows[0].keys()),
        rows=rows,
        plotdata={"check_margin": (list(range(len(margins))), margins)},
        meta={"fixture": name, "paths": cfg.trials, "mutated": cfg.mutated},
    )


RUNNERS = {
    "truthfulness": run_truthfulness,
    "selection": run_selection,
    "concentration": run_concentration,
    "complexity": run_complexity,
    "tightness": run_tightness,
    "chain-check": run_chain_check,
}


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    return RUNNERS[cfg.experiment](cfg)

"""Figure rendering for experiment reports.

Each experiment gets one PNG next to its summary CSV. Figures are built
from the already-aggregated result data, never from re-running anything,
so they cannot perturb the CSV bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def render_figure(result, out_path) -> Path:
    png = Path(out_path).with_suffix(".png")
    png.parent.mkdir(parents=True, exist_ok=True)
    fig = _BUILDERS.get(result.experiment, _generic)(result)
    fig.savefig(png, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return png


def _generic(result):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, (xs, ys) in result.plotdata.items():
        ax.plot(xs, ys, marker="o", label=name)
    if result.plotdata:
        ax.legend(fontsize=8)
    ax.set_title(result.experiment)
    return fig


def _truthfulness(result):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, (xs, ys) in sorted(result.plotdata.items()):
        ax.plot(xs, ys, marker="o", lw=1, label=name.removeprefix("max_gap__"))
    bounds = {}
    for row in result.rows:
        bounds.setdefault(row["eta"], set()).add(row["mw_bound"])
    xs = sorted(bounds)
    ys = [max(bounds[x]) for x in xs]
    ax.plot(xs, ys, "k--", lw=2, label="band 4*b*eta + c (loosest fixture)")
    ax.set_xlabel("learning rate eta")
    ax.set_ylabel("max |best response - belief marginal|")
    ax.set_title("approximate truthfulness: gaps vs band")
    ax.legend(fontsize=7)
    return fig


def _selection(result):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    xs, ys = result.plotdata["winner_shortfall_hist"]
    width = (xs[1] - xs[0]) if len(xs) > 1 else 1.0
    ax.bar(xs, ys, width=width * 0.95, color="#4878af")
    ax.axvline(result.meta["near_max_gap"], color="crimson", ls="--", label="allowed gap")
    ax.set_yscale("log")
    ax.set_xlabel("max_i q_i - q_winner")
    ax.set_ylabel("trials")
    ax.set_title(result.meta.get("title", "winner score shortfall"))
    ax.legend()
    return fig


def _concentration(result):
    names = [k for k in result.plotdata if k.startswith("deviation_hist__")]
    fig, axes = plt.subplots(1, max(len(names), 1), figsize=(4.2 * max(len(names), 1), 3.6))
    if len(names) <= 1:
        axes = [axes]
    for ax, key in zip(axes, names):
        xs, ys = result.plotdata[key]
        width = (xs[1] - xs[0]) if len(xs) > 1 else 1.0
        ax.bar(xs, ys, width=width * 0.95, color="#4878af")
        name = key.removeprefix("deviation_hist__")
        thr = result.meta["thresholds"][name]
        ax.axvline(thr, color="crimson", ls="--", label=f"threshold {thr:.1f}")
        ax.set_title(name, fontsize=9)
        ax.set_xlabel("|S - E[S]|")
        ax.legend(fontsize=7)
    fig.suptitle(f"tail deviations vs threshold (delta={result.meta['delta']})")
    return fig


def _complexity(result):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    xs, ys = result.plotdata["eps_optimal_frequency"]
    _, lows = result.plotdata["eps_optimal_wilson_low"]
    _, highs = result.plotdata["eps_optimal_wilson_high"]
    yerr = [
        [y - lo for y, lo in zip(ys, lows)],
        [hi - y for y, hi in zip(ys, highs)],
    ]
    ax.errorbar(xs, ys, yerr=yerr, marker="o", capsize=4, label="eps-optimal frequency")
    ax.axhline(result.meta["required"], color="crimson", ls="--", label="1 - delta")
    ax.axvline(result.meta["m_star"], color="gray", ls=":", label="m*")
    ax.set_xlabel("events m")
    ax.set_ylabel("frequency of eps-optimal winner")
    ax.set_ylim(min(result.meta["required"] - 0.05, min(ys) - 0.02), 1.005)
    ax.set_title(f"event complexity ({result.meta['strategy']} reports)")
    ax.legend()
    return fig


def _tightness(result):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name in ("quantile_excess", "threshold_excess"):
        xs, ys = result.plotdata[name]
        ax.plot(xs, ys, marker="o", label=name)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("group size b")
    ax.set_ylabel("centered 1-delta quantile of |S - E[S]|")
    ax.set_title(
        "tail growth vs b: empirical slope "
        f"{result.meta['empirical_slope']:.2f}, threshold slope "
        f"{result.meta['threshold_slope']:.2f}"
    )
    ax.legend()
    return fig


def _chain_check(result):
    fig, ax = plt.subplots(figsize=(8, 0.35 * len(result.rows) + 1.5))
    labels = [f"{row['check']}[{row['detail']}]" for row in result.rows]
    ok = [row["passed"] for row in result.rows]
    colors = ["#2e7d32" if p else "#c62828" for p in ok]
    ax.barh(range(len(labels)), [1] * len(labels), color=colors)
    ax.set_yticks(range(len(labels)))
    ax.set_yticklabels(labels, fontsize=6)
    ax.set_xticks([])
    ax.set_title(
        f"chain checks on {result.meta['fixture']} ({result.meta['paths']} paths)"
        + (" [mutated]" if result.meta.get("mutated") else "")
    )
    return fig


_BUILDERS = {
    "truthfulness": _truthfulness,
    "selection": _selection,
    "concentration": _concentration,
    "complexity": _complexity,
    "tightness": _tightness,
    "chain-check": _chain_check,
}

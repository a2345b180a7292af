"""Experiment configuration: strict JSON parsing and fixture construction.

Configs are flat JSON objects. Unknown keys are errors, not warnings, so a
typo never silently runs a different experiment than intended.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .. import distributions as dist_mod


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class InfeasibleScaleError(RuntimeError):
    """Config demands more work than allowed without --force (exit code 3)."""


EXPERIMENTS = (
    "truthfulness",
    "selection",
    "concentration",
    "complexity",
    "tightness",
    "chain-check",
)

_COMMON_KEYS = {"experiment", "seed", "trials", "out", "workers"}

_ALLOWED_KEYS = {
    "truthfulness": _COMMON_KEYS | {"etas", "n_list", "fixtures", "opponent_draws"},
    "selection": _COMMON_KEYS | {"n", "m", "eta", "delta", "distribution"},
    "concentration": _COMMON_KEYS | {"fixtures", "delta"},
    "complexity": _COMMON_KEYS
    | {"n", "m", "m_list", "b", "c", "eta", "epsilon", "delta", "strategy", "belief_offsets"},
    "tightness": _COMMON_KEYS | {"m", "c", "b_list", "delta"},
    "chain-check": _COMMON_KEYS | {"distribution", "delta", "mutated"},
}

_DEFAULT_TRIALS = {
    "truthfulness": 0,  # deterministic grid; draws controlled by opponent_draws
    "selection": 100_000,
    "concentration": 100_000,
    "complexity": 1000,
    "tightness": 100_000,
    "chain-check": 100_000,
}

# hard scale cap: event-samples per run beyond this need --force
MAX_EVENT_SAMPLES = 500_000_000


def event_complexity(n: int, b: int, epsilon: float, delta: float) -> int:
    """Events sufficient for (epsilon, delta)-accurate selection:
    ``ceil(400 * b^2 * ln(8n/delta) / epsilon^2)``."""
    if n < 1 or b < 1 or not 0 < epsilon or not 0 < delta <= 1:
        raise ConfigError("need n >= 1, b >= 1, epsilon > 0, 0 < delta <= 1")
    return math.ceil(400.0 * b * b * math.log(8.0 * n / delta) / (epsilon * epsilon))


def auto_learning_rate(epsilon: float, b: int) -> float:
    """The learning rate the accuracy guarantee is proved at: epsilon/(80 b)."""
    return epsilon / (80.0 * b)


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    trials: int = 0
    out: str | None = None
    workers: int = 1
    # selection / complexity
    n: int | None = None
    m: int | None = None
    m_list: list[int] = field(default_factory=list)
    eta: float | str | None = None
    epsilon: float | None = None
    delta: float | None = None
    b: int | None = None
    c: float | None = None
    strategy: str = "truthful"
    belief_offsets: list[float] = field(default_factory=list)
    # truthfulness
    etas: list[float] = field(default_factory=list)
    n_list: list[int] = field(default_factory=list)
    fixtures: list = field(default_factory=list)
    opponent_draws: int = 2
    # concentration / chain-check
    distribution: dict | None = None
    mutated: bool = False
    # tightness
    b_list: list[int] = field(default_factory=list)

    def resolved_eta(self) -> float:
        if self.eta == "auto":
            if self.epsilon is None or self.b is None:
                raise ConfigError("eta='auto' needs epsilon and b")
            return auto_learning_rate(self.epsilon, self.b)
        if self.eta is None:
            raise ConfigError("eta is required")
        return float(self.eta)


def parse_config(data: dict, experiment: str | None = None) -> ExperimentConfig:
    """Validate a raw config mapping. Unknown keys are errors."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    exp = data.get("experiment", experiment)
    if exp is None:
        raise ConfigError("experiment id missing")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; choose from {EXPERIMENTS}")
    if experiment is not None and exp != experiment:
        raise ConfigError(
            f"config is for experiment {exp!r} but {experiment!r} was requested"
        )
    allowed = _ALLOWED_KEYS[exp]
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(
            f"unknown config keys for {exp}: {sorted(unknown)}; allowed: {sorted(allowed)}"
        )

    cfg = ExperimentConfig(experiment=exp)
    for key, value in data.items():
        if key == "experiment":
            continue
        setattr(cfg, key, value)
    if "trials" not in data:
        cfg.trials = _DEFAULT_TRIALS[exp]
    _apply_defaults(cfg)
    _validate(cfg)
    return cfg


def load_config_file(path, experiment: str | None = None) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(data, experiment)


def default_config(experiment: str) -> ExperimentConfig:
    return parse_config({"experiment": experiment})


def _apply_defaults(cfg: ExperimentConfig) -> None:
    exp = cfg.experiment
    if exp == "truthfulness":
        cfg.etas = cfg.etas or [0.005, 0.01, 0.02]
        cfg.n_list = cfg.n_list or [2, 3]
    elif exp == "selection":
        cfg.n = cfg.n or 5
        cfg.m = cfg.m or 400
        cfg.eta = cfg.eta if cfg.eta is not None else 0.1
        cfg.delta = cfg.delta if cfg.delta is not None else 0.1
        if cfg.distribution is None:
            cfg.distribution = {"family": "independent", "m": cfg.m, "theta": 0.5}
    elif exp == "concentration":
        cfg.delta = cfg.delta if cfg.delta is not None else 0.05
        if not cfg.fixtures:
            cfg.fixtures = [
                {"family": "independent", "m": 100, "theta": 0.5},
                {"family": "hidden-coin-groups", "m": 120, "b": 6, "c": 0.1},
                {"family": "random-bias", "m": 12, "biases": [0.25, 0.75]},
            ]
    elif exp == "complexity":
        cfg.n = cfg.n or 4
        cfg.b = cfg.b or 1
        cfg.epsilon = cfg.epsilon if cfg.epsilon is not None else 0.2
        cfg.delta = cfg.delta if cfg.delta is not None else 0.2
        cfg.eta = cfg.eta if cfg.eta is not None else "auto"
        cfg.c = cfg.c if cfg.c is not None else cfg.epsilon / 20.0
        cfg.belief_offsets = cfg.belief_offsets or [0.0, 0.25, 0.35, 0.5]
        if not cfg.m_list:
            m = cfg.m or event_complexity(cfg.n, cfg.b, cfg.epsilon, cfg.delta)
            cfg.m_list = [m]
    elif exp == "tightness":
        cfg.m = cfg.m or 120
        cfg.c = cfg.c if cfg.c is not None else 0.1
        cfg.delta = cfg.delta if cfg.delta is not None else 0.05
        cfg.b_list = cfg.b_list or [1, 2, 4, 8]
    elif exp == "chain-check":
        cfg.delta = cfg.delta if cfg.delta is not None else 0.05
        if cfg.distribution is None:
            cfg.distribution = {"family": "hidden-coin-groups", "m": 6, "b": 2, "c": 0.1}


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.seed < 0:
        raise ConfigError("seed must be >= 0")
    if cfg.trials < 0:
        raise ConfigError("trials must be >= 0")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.experiment == "complexity":
        if cfg.strategy not in ("truthful", "band-adversary"):
            raise ConfigError(
                "complexity supports strategy 'truthful' or 'band-adversary'"
            )
        if len(cfg.belief_offsets) != cfg.n:
            raise ConfigError("belief_offsets must have one entry per forecaster")
    if cfg.experiment == "tightness":
        for b in cfg.b_list:
            if cfg.m % b != 0:
                raise ConfigError(f"every b in b_list must divide m={cfg.m}; {b} does not")
    if cfg.experiment == "truthfulness":
        for eta in cfg.etas:
            if not 0 < eta:
                raise ConfigError("etas must be positive")


def check_scale(cfg: ExperimentConfig, force: bool) -> None:
    """Refuse configs whose sampling volume exceeds the cap, unless forced."""
    volume = 0
    if cfg.experiment == "selection":
        volume = cfg.trials * (cfg.m or 0)
    elif cfg.experiment == "concentration":
        volume = cfg.trials * max((f.get("m", 0) for f in cfg.fixtures), default=0)
    elif cfg.experiment == "complexity":
        volume = cfg.trials * max(cfg.m_list, default=0)
    elif cfg.experiment == "tightness":
        volume = cfg.trials * cfg.m * len(cfg.b_list)
    elif cfg.experiment == "chain-check":
        volume = cfg.trials * (cfg.distribution or {}).get("m", 0) * 4
    if volume > MAX_EVENT_SAMPLES and not force:
        raise InfeasibleScaleError(
            f"{cfg.experiment} would draw ~{volume:.3g} event samples "
            f"(cap {MAX_EVENT_SAMPLES:.3g}); pass --force to run anyway"
        )


# ---------------------------------------------------------------------------
# distribution fixture construction

_FAMILY_KEYS = {
    "independent": {"family", "m", "theta"},
    "disjoint-blocks": {"family", "partition", "marginals"},
    "random-bias": {"family", "m", "biases", "weights"},
    "hidden-coin-groups": {"family", "m", "b", "c"},
    "election": {"family", "state_sizes", "base_marginals", "national_shift", "state_swing"},
    "explicit-table": {"family", "path"},
}


def build_distribution(spec: dict) -> dist_mod.EventDistribution:
    """Build an event distribution from its JSON description."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"distribution spec needs a 'family': {spec!r}")
    family = spec["family"]
    if family not in _FAMILY_KEYS:
        raise ConfigError(
            f"unknown family {family!r}; choose from {sorted(_FAMILY_KEYS)}"
        )
    unknown = set(spec) - _FAMILY_KEYS[family]
    if unknown:
        raise ConfigError(f"unknown keys for family {family}: {sorted(unknown)}")
    try:
        if family == "independent":
            theta = spec["theta"]
            if isinstance(theta, (int, float)):
                theta = [float(theta)] * int(spec["m"])
            return dist_mod.independent(theta)
        if family == "disjoint-blocks":
            return dist_mod.disjoint_blocks(spec["partition"], spec["marginals"])
        if family == "random-bias":
            return dist_mod.random_bias(
                int(spec["m"]), spec["biases"], spec.get("weights")
            )
        if family == "hidden-coin-groups":
            return dist_mod.hidden_coin_groups(
                int(spec["m"]), int(spec["b"]), float(spec["c"])
            )
        if family == "election":
            base = spec["base_marginals"]
            if isinstance(base, (int, float)):
                base = [float(base)] * sum(spec["state_sizes"])
            return dist_mod.election(
                spec["state_sizes"], base, spec["national_shift"], spec["state_swing"]
            )
        return dist_mod.load_explicit_table(spec["path"])
    except KeyError as exc:
        raise ConfigError(f"family {family} misses required key {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"bad {family} parameters: {exc}") from exc


def fixture_name(spec: dict) -> str:
    parts = [str(spec.get("family", "?"))]
    for key in ("m", "b", "c"):
        if key in spec:
            parts.append(f"{key}{spec[key]}")
    return "-".join(parts)

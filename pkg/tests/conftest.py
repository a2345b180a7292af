"""Shared fixtures: a zoo of small enumerable distributions with belief rows."""

from __future__ import annotations

import numpy as np
import pytest

from forecast_arena import distributions as dist_mod


def enumerable_zoo():
    """(name, distribution) pairs covering every family at enumerable sizes."""
    rng = np.random.default_rng(20240817)
    zoo = [
        ("independent-m2-half", dist_mod.independent([0.5, 0.5])),
        ("independent-m3", dist_mod.independent([0.2, 0.5, 0.9])),
        ("independent-m4", dist_mod.independent(np.round(rng.uniform(0.1, 0.9, 4), 3))),
        ("independent-m6", dist_mod.independent(np.round(rng.uniform(0.1, 0.9, 6), 3))),
        ("independent-m8", dist_mod.independent(np.round(rng.uniform(0.1, 0.9, 8), 3))),
        ("disjoint-pair", dist_mod.disjoint_blocks([[0, 1]], [0.5])),
        ("disjoint-m4", dist_mod.disjoint_blocks([[0, 1], [2, 3]], [0.3, 0.7])),
        ("disjoint-m6", dist_mod.disjoint_blocks([[0, 1, 2], [3], [4, 5]], [0.4, 0.5, 0.8])),
        ("random-bias-m3", dist_mod.random_bias(3, [0.25, 0.75])),
        ("random-bias-m4", dist_mod.random_bias(4, [0.25, 0.75])),
        ("random-bias-m5-w", dist_mod.random_bias(5, [0.2, 0.5, 0.9], [0.25, 0.5, 0.25])),
        ("hidden-coin-m4-b2", dist_mod.hidden_coin_groups(4, 2, 0.1)),
        ("hidden-coin-m6-b2", dist_mod.hidden_coin_groups(6, 2, 0.1)),
        ("hidden-coin-m6-b3", dist_mod.hidden_coin_groups(6, 3, 0.2)),
        ("election-m5", dist_mod.election([2, 3], [0.5, 0.45, 0.55, 0.6, 0.4], 0.05, 0.1)),
        ("election-m4", dist_mod.election([2, 2], [0.5, 0.5, 0.5, 0.5], 0.1, 0.15)),
        (
            "explicit-m3",
            dist_mod.explicit_table(
                [
                    ((0, 0, 0), 0.15),
                    ((0, 0, 1), 0.10),
                    ((0, 1, 0), 0.10),
                    ((0, 1, 1), 0.15),
                    ((1, 0, 0), 0.10),
                    ((1, 0, 1), 0.15),
                    ((1, 1, 0), 0.15),
                    ((1, 1, 1), 0.10),
                ]
            ),
        ),
    ]
    return zoo


def belief_rows(m: int, n: int, key: int) -> np.ndarray:
    rng = np.random.default_rng(777_000 + 13 * key + m + 97 * n)
    return np.round(rng.uniform(0.05, 0.95, size=(n, m)), 4)


@pytest.fixture(scope="session")
def zoo():
    return enumerable_zoo()

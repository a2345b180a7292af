"""Joint distributions over m binary events with block-correlation structure.

Each family exposes sampling, exact marginals, exact conditional means and,
for small m, exact enumeration of its support. A distribution declares a
block structure: per-event influencer sets ``B_t`` (always containing ``t``),
a size bound ``b`` and a slack ``c`` bounding how far conditioning on all
non-influencers can move an event's mean. ``certify_block_correlation``
checks the declared ``(b, c)`` against the enumerated truth.

Arithmetic follows the parameter types: constructing a family from
``fractions.Fraction`` parameters makes enumeration and conditional means
exact; float parameters give ordinary double precision.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import EnumerationCapError, ZeroProbabilityConditionError

# Default cap on exact enumeration: 2^16 outcomes.
ENUMERATION_CAP = 16

_HALF = Fraction(1, 2)


def _as_float(x) -> float:
    return float(x)


@dataclass(frozen=True)
class BlockStructure:
    """Declared influencer sets with their size bound and slack.

    ``blocks[t]`` is the influencer set of event ``t`` (0-indexed, must
    contain ``t``), ``b`` bounds every ``|blocks[t]|`` and ``c`` in
    ``[0, 0.5)`` bounds the conditional-mean shift from outside the block.
    """

    blocks: tuple[frozenset[int], ...]
    b: int
    c: float

    def __post_init__(self):
        m = len(self.blocks)
        if self.b < 1:
            raise ValueError(f"block bound b must be >= 1, got {self.b}")
        if not 0.0 <= self.c < 0.5:
            raise ValueError(f"slack c must be in [0, 0.5), got {self.c}")
        for t, bt in enumerate(self.blocks):
            if t not in bt:
                raise ValueError(f"event {t} missing from its own block {set(bt)}")
            if len(bt) > self.b:
                raise ValueError(
                    f"block of event {t} has size {len(bt)} > declared bound {self.b}"
                )
            if any(j < 0 or j >= m for j in bt):
                raise ValueError(f"block of event {t} has out-of-range index")

    @property
    def m(self) -> int:
        return len(self.blocks)

    def complement(self, t: int) -> tuple[int, ...]:
        """Indices outside the block of event ``t``, sorted."""
        return tuple(j for j in range(self.m) if j not in self.blocks[t])


@dataclass(frozen=True)
class ConditionalQuery:
    """A conditional-mean query: target event plus a partial 0/1 assignment."""

    target: int
    assignment: Mapping[int, int]

    def __post_init__(self):
        if self.target in self.assignment:
            raise ValueError("target event may not appear in the assignment")
        for j, v in self.assignment.items():
            if v not in (0, 1):
                raise ValueError(f"assignment values must be 0/1, got {v!r} at {j}")


class EventDistribution:
    """Base class for joint distributions over ``{0,1}^m``."""

    kind: str = "abstract"

    def __init__(self, m: int, blocks: BlockStructure):
        if m < 1:
            raise ValueError("need at least one event")
        if blocks.m != m:
            raise ValueError("block structure size does not match event count")
        self.m = m
        self.blocks = blocks
        self._support_cache: list[tuple[tuple[int, ...], object]] | None = None
        self._support_arrays_cache = None

    # -- family-specific primitives -------------------------------------

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """Draw one outcome vector as a length-m uint8 array."""
        raise NotImplementedError

    def marginal_values(self) -> list:
        """Per-event means, exact in the parameter arithmetic."""
        raise NotImplementedError

    def conditional_mean(self, query: ConditionalQuery):
        """``E[Y_target | assignment]``, exact in the parameter arithmetic.

        Raises ``ZeroProbabilityConditionError`` if the assignment has
        probability zero.
        """
        raise NotImplementedError

    def conditional_block(
        self, t: int, assignment: Mapping[int, int]
    ) -> list[tuple[tuple[int, ...], object]]:
        """Joint conditional law of event ``t``'s block given ``assignment``.

        The assignment must not touch the block. Returns positive-probability
        (pattern, probability) pairs, patterns ordered like
        ``sorted(blocks[t])``. The default enumerates the support; families
        with closed forms override it so large m stays tractable.
        """
        block = sorted(self.blocks.blocks[t])
        if any(j in self.blocks.blocks[t] for j in assignment):
            raise ValueError("assignment may not include indices of the block itself")
        groups: dict[tuple, object] = {}
        total = 0
        for y, p in self.support():
            if all(y[j] == v for j, v in assignment.items()):
                key = tuple(y[j] for j in block)
                groups[key] = groups.get(key, 0) + p
                total = total + p
        if total == 0:
            raise ZeroProbabilityConditionError("assignment has probability 0")
        return [(z, p / total) for z, p in sorted(groups.items())]

    def _enumerate(self) -> list[tuple[tuple[int, ...], object]]:
        raise NotImplementedError

    # -- shared API ------------------------------------------------------

    def marginals(self) -> np.ndarray:
        """Per-event means as a float vector."""
        return np.array([_as_float(v) for v in self.marginal_values()], dtype=float)

    def support(self, cap: int | None = None) -> list[tuple[tuple[int, ...], object]]:
        """Full support as (outcome tuple, probability) pairs.

        Probabilities are exact when the family parameters are exact. The
        result is cached; callers must not mutate it.
        """
        cap = ENUMERATION_CAP if cap is None else cap
        if self.m > cap:
            raise EnumerationCapError(
                f"enumeration needs m <= {cap}, distribution has m = {self.m}"
            )
        if self._support_cache is None:
            pts = [(y, p) for y, p in self._enumerate() if p != 0]
            pts.sort(key=lambda item: item[0])
            self._support_cache = pts
        return self._support_cache

    def support_arrays(self, cap: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Support as float arrays ``(outcomes[K, m], probs[K])``."""
        if self._support_arrays_cache is None:
            pts = self.support(cap)
            ys = np.array([y for y, _ in pts], dtype=float)
            ps = np.array([_as_float(p) for _, p in pts], dtype=float)
            self._support_arrays_cache = (ys, ps)
        return self._support_arrays_cache

    def __repr__(self):
        return f"<{type(self).__name__} m={self.m} b={self.blocks.b} c={self.blocks.c}>"


# ---------------------------------------------------------------------------
# families


class Independent(EventDistribution):
    """Independent events with given means."""

    kind = "independent"

    def __init__(self, theta: Sequence):
        theta = list(theta)
        m = len(theta)
        for v in theta:
            if not 0 <= v <= 1:
                raise ValueError(f"marginal out of [0, 1]: {v!r}")
        blocks = BlockStructure(
            blocks=tuple(frozenset({t}) for t in range(m)), b=1, c=0.0
        )
        super().__init__(m, blocks)
        self.theta = theta
        self._theta_f = np.array([_as_float(v) for v in theta])

    def sample(self, rng):
        return (rng.random(self.m) < self._theta_f).astype(np.uint8)

    def marginal_values(self):
        return list(self.theta)

    def conditional_mean(self, query: ConditionalQuery):
        for j, v in query.assignment.items():
            pj = self.theta[j]
            if (v == 1 and pj == 0) or (v == 0 and pj == 1):
                raise ZeroProbabilityConditionError(
                    f"assignment fixes event {j} to {v}, which has probability 0"
                )
        return self.theta[query.target]

    def conditional_block(self, t, assignment):
        self.conditional_mean(ConditionalQuery(t, dict(assignment)))  # validates
        th = self.theta[t]
        return [(z, th if z[0] else (1 - th)) for z in ((0,), (1,)) if (th if z[0] else (1 - th)) != 0]

    def _enumerate(self):
        out = []
        for y in itertools.product((0, 1), repeat=self.m):
            p = 1
            for v, th in zip(y, self.theta):
                p = p * (th if v else (1 - th))
            out.append((y, p))
        return out


class DisjointBlocks(EventDistribution):
    """Disjoint groups of perfectly correlated events.

    Each group is driven by one coin: all its events are 1 together with the
    group marginal, else all 0. Groups are mutually independent.
    """

    kind = "disjoint-blocks"

    def __init__(self, partition: Sequence[Sequence[int]], marginals: Sequence):
        groups = [tuple(sorted(g)) for g in partition]
        flat = sorted(j for g in groups for j in g)
        m = len(flat)
        if flat != list(range(m)):
            raise ValueError("partition must cover 0..m-1 exactly once")
        if len(marginals) != len(groups):
            raise ValueError("need one marginal per group")
        for v in marginals:
            if not 0 <= v <= 1:
                raise ValueError(f"marginal out of [0, 1]: {v!r}")
        group_of = {}
        for gi, g in enumerate(groups):
            for j in g:
                group_of[j] = gi
        blocks = BlockStructure(
            blocks=tuple(frozenset(groups[group_of[t]]) for t in range(m)),
            b=max(len(g) for g in groups),
            c=0.0,
        )
        super().__init__(m, blocks)
        self.groups = groups
        self.group_marginals = list(marginals)
        self._group_of = group_of
        self._mu_f = [_as_float(v) for v in marginals]

    def sample(self, rng):
        y = np.zeros(self.m, dtype=np.uint8)
        for g, mu in zip(self.groups, self._mu_f):
            if rng.random() < mu:
                y[list(g)] = 1
        return y

    def marginal_values(self):
        return [self.group_marginals[self._group_of[t]] for t in range(self.m)]

    def conditional_mean(self, query: ConditionalQuery):
        gi = self._group_of[query.target]
        seen = {}
        for j, v in query.assignment.items():
            gj = self._group_of[j]
            if gj in seen and seen[gj] != v:
                raise ZeroProbabilityConditionError(
                    f"assignment splits perfectly correlated group {self.groups[gj]}"
                )
            seen[gj] = v
            mu = self.group_marginals[gj]
            if (v == 1 and mu == 0) or (v == 0 and mu == 1):
                raise ZeroProbabilityConditionError(
                    f"group {self.groups[gj]} cannot realize value {v}"
                )
        if gi in seen:
            return seen[gi]
        return self.group_marginals[gi]

    def conditional_block(self, t, assignment):
        if any(j in self.blocks.blocks[t] for j in assignment):
            raise ValueError("assignment may not include indices of the block itself")
        self.conditional_mean(ConditionalQuery(t, dict(assignment)))  # validates
        g = self.groups[self._group_of[t]]
        mu = self.group_marginals[self._group_of[t]]
        out = []
        if mu != 1:
            out.append((tuple(0 for _ in g), 1 - mu))
        if mu != 0:
            out.append((tuple(1 for _ in g), mu))
        return out

    def _enumerate(self):
        out = []
        for values in itertools.product((0, 1), repeat=len(self.groups)):
            p = 1
            y = [0] * self.m
            for g, mu, v in zip(self.groups, self.group_marginals, values):
                p = p * (mu if v else (1 - mu))
                for j in g:
                    y[j] = v
            out.append((tuple(y), p))
        return out


class RandomBias(EventDistribution):
    """Conditionally iid events whose common bias is drawn from a finite set."""

    kind = "random-bias"

    def __init__(self, m: int, biases: Sequence, weights: Sequence | None = None):
        biases = list(biases)
        if not biases:
            raise ValueError("need at least one bias value")
        for p in biases:
            if not 0 <= p <= 1:
                raise ValueError(f"bias out of [0, 1]: {p!r}")
        if weights is None:
            weights = [Fraction(1, len(biases))] * len(biases)
        weights = list(weights)
        if len(weights) != len(biases) or any(w < 0 for w in weights):
            raise ValueError("weights must be nonnegative, one per bias")
        total = sum(weights)
        if abs(_as_float(total) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        theta = sum(w * p for w, p in zip(weights, biases))
        slack = max(theta - min(biases), max(biases) - theta)
        blocks_c = slack  # analytic bound; tightened by certification below
        blocks = BlockStructure(
            blocks=tuple(frozenset({t}) for t in range(m)), b=1, c=_as_float(blocks_c)
        )
        super().__init__(m, blocks)
        self.biases = biases
        self.weights = weights
        self._theta = theta
        self._biases_f = [_as_float(p) for p in biases]
        self._weights_f = np.array([_as_float(w) for w in weights])
        if m <= ENUMERATION_CAP:
            cert = certify_block_correlation(self)
            self.blocks = BlockStructure(self.blocks.blocks, 1, cert.c)

    def sample(self, rng):
        k = int(rng.choice(len(self.biases), p=self._weights_f))
        return (rng.random(self.m) < self._biases_f[k]).astype(np.uint8)

    def marginal_values(self):
        return [self._theta] * self.m

    def conditional_mean(self, query: ConditionalQuery):
        ones = sum(query.assignment.values())
        zeros = len(query.assignment) - ones
        num = 0
        den = 0
        for w, p in zip(self.weights, self.biases):
            like = w * p**ones * (1 - p) ** zeros
            den = den + like
            num = num + like * p
        if den == 0:
            raise ZeroProbabilityConditionError("assignment has probability 0")
        return num / den

    def conditional_block(self, t, assignment):
        if t in assignment:
            raise ValueError("assignment may not include indices of the block itself")
        mu = self.conditional_mean(ConditionalQuery(t, dict(assignment)))
        out = []
        if mu != 1:
            out.append(((0,), 1 - mu))
        if mu != 0:
            out.append(((1,), mu))
        return out

    def _enumerate(self):
        out = []
        for y in itertools.product((0, 1), repeat=self.m):
            ones = sum(y)
            p = 0
            for w, bias in zip(self.weights, self.biases):
                p = p + w * bias**ones * (1 - bias) ** (self.m - ones)
            out.append((y, p))
        return out


class HiddenCoinGroups(EventDistribution):
    """Groups of perfectly correlated events biased by a hidden fair coin.

    A fair coin shifts every event's conditional mean to ``1/2 + c`` or
    ``1/2 - c``; the m/b groups are conditionally independent given the coin
    and perfectly correlated within. Marginals are exactly 1/2. Conditioning
    on everything outside a group reveals at most the coin, so the declared
    slack ``c`` is a valid bound (certification tightens it for small m).
    """

    kind = "hidden-coin-groups"

    def __init__(self, m: int, b: int, c):
        if b < 1 or m % b != 0:
            raise ValueError("group size b must be >= 1 and divide m")
        if not 0 <= c < _HALF:
            raise ValueError(f"coin shift c must be in [0, 0.5), got {c!r}")
        groups = [tuple(range(g * b, (g + 1) * b)) for g in range(m // b)]
        blocks = BlockStructure(
            blocks=tuple(frozenset(groups[t // b]) for t in range(m)),
            b=b,
            c=_as_float(c),
        )
        super().__init__(m, blocks)
        self.b = b
        self.c = c
        self.groups = groups
        self._c_f = _as_float(c)
        if m <= ENUMERATION_CAP:
            cert = certify_block_correlation(self)
            self.blocks = BlockStructure(self.blocks.blocks, b, cert.c)

    def _coin_prob(self, side: int):
        return _HALF + side * self.c if isinstance(self.c, Fraction) else 0.5 + side * self.c

    def sample(self, rng):
        side = 1 if rng.random() < 0.5 else -1
        p = 0.5 + side * self._c_f
        # groups are contiguous ranges of width b
        group_values = rng.random(len(self.groups)) < p
        return np.repeat(group_values, self.b).astype(np.uint8)

    def marginal_values(self):
        half = _HALF if isinstance(self.c, Fraction) else 0.5
        return [half] * self.m

    def conditional_mean(self, query: ConditionalQuery):
        group_value: dict[int, int] = {}
        for j, v in query.assignment.items():
            gj = j // self.b
            if gj in group_value and group_value[gj] != v:
                raise ZeroProbabilityConditionError(
                    f"assignment splits perfectly correlated group {self.groups[gj]}"
                )
            group_value[gj] = v
        gt = query.target // self.b
        if gt in group_value:
            return group_value[gt]
        weights = []
        for side in (1, -1):
            p = self._coin_prob(side)
            like = 1
            for v in group_value.values():
                like = like * (p if v else (1 - p))
            weights.append((like, p))
        den = weights[0][0] + weights[1][0]
        if den == 0:
            raise ZeroProbabilityConditionError("assignment has probability 0")
        num = weights[0][0] * weights[0][1] + weights[1][0] * weights[1][1]
        return num / den

    def conditional_block(self, t, assignment):
        if any(j in self.blocks.blocks[t] for j in assignment):
            raise ValueError("assignment may not include indices of the block itself")
        mu = self.conditional_mean(ConditionalQuery(t, dict(assignment)))
        g = self.groups[t // self.b]
        out = []
        if mu != 1:
            out.append((tuple(0 for _ in g), 1 - mu))
        if mu != 0:
            out.append((tuple(1 for _ in g), mu))
        return out

    def _enumerate(self):
        half = _HALF if isinstance(self.c, Fraction) else 0.5
        acc: dict[tuple, object] = {}
        for side in (1, -1):
            p = self._coin_prob(side)
            for values in itertools.product((0, 1), repeat=len(self.groups)):
                like = half
                y = [0] * self.m
                for g, v in zip(self.groups, values):
                    like = like * (p if v else (1 - p))
                    for j in g:
                        y[j] = v
                key = tuple(y)
                acc[key] = acc.get(key, 0) + like
        return list(acc.items())


class Election(EventDistribution):
    """Races grouped by state, with a national shift and per-state swings.

    A hidden fair coin adds ``+shift`` or ``-shift`` to every race's base
    mean; each state independently adds a fair ``+swing``/``-swing`` common
    to its races. Races are conditionally independent given those latents.
    Parameters must keep every conditional mean inside [0, 1].
    """

    kind = "election"

    def __init__(
        self,
        state_sizes: Sequence[int],
        base_marginals: Sequence,
        national_shift,
        state_swing,
    ):
        sizes = [int(s) for s in state_sizes]
        if any(s < 1 for s in sizes):
            raise ValueError("state sizes must be positive")
        m = sum(sizes)
        base = list(base_marginals)
        if len(base) != m:
            raise ValueError("need one base marginal per race")
        swings = (
            list(state_swing)
            if isinstance(state_swing, (list, tuple))
            else [state_swing] * len(sizes)
        )
        if len(swings) != len(sizes):
            raise ValueError("need one swing per state")
        if national_shift < 0 or any(w < 0 for w in swings):
            raise ValueError("shift and swings must be nonnegative")
        groups = []
        start = 0
        for s in sizes:
            groups.append(tuple(range(start, start + s)))
            start += s
        group_of = {j: gi for gi, g in enumerate(groups) for j in g}
        for t in range(m):
            w = swings[group_of[t]]
            if base[t] + national_shift + w > 1 or base[t] - national_shift - w < 0:
                raise ValueError(
                    f"race {t}: mean {base[t]!r} with shift {national_shift!r} and "
                    f"swing {w!r} leaves [0, 1]"
                )
        blocks = BlockStructure(
            blocks=tuple(frozenset(groups[group_of[t]]) for t in range(m)),
            b=max(sizes),
            c=_as_float(national_shift),
        )
        super().__init__(m, blocks)
        self.groups = groups
        self.base = base
        self.shift = national_shift
        self.swings = swings
        self._group_of = group_of
        self._base_f = np.array([_as_float(v) for v in base])
        self._shift_f = _as_float(national_shift)
        self._swings_f = [_as_float(w) for w in swings]
        if m <= ENUMERATION_CAP and len(groups) + 1 <= ENUMERATION_CAP:
            cert = certify_block_correlation(self)
            self.blocks = BlockStructure(self.blocks.blocks, max(sizes), cert.c)

    def _race_mean(self, t: int, s_side: int, w_side: int):
        return (
            self.base[t]
            + s_side * self.shift
            + w_side * self.swings[self._group_of[t]]
        )

    def sample(self, rng):
        s_side = 1 if rng.random() < 0.5 else -1
        y = np.zeros(self.m, dtype=np.uint8)
        for gi, g in enumerate(self.groups):
            w_side = 1 if rng.random() < 0.5 else -1
            p = self._base_f[list(g)] + s_side * self._shift_f + w_side * self._swings_f[gi]
            y[list(g)] = rng.random(len(g)) < p
        return y

    def marginal_values(self):
        # the fair latents cancel: mean is the base marginal
        return list(self.base)

    def _group_likelihood(self, gi: int, pairs, s_side: int):
        """Likelihood of this state's assigned races, marginal over its swing."""
        total = 0
        for w_side in (1, -1):
            like = 1
            for j, v in pairs:
                p = self._race_mean(j, s_side, w_side)
                like = like * (p if v else (1 - p))
            total = total + like
        return total / 2 if isinstance(self.shift, Fraction) else total * 0.5

    def conditional_mean(self, query: ConditionalQuery):
        # the posterior factorizes over states given the national coin, so
        # cost stays linear in the number of assigned states
        by_group: dict[int, list[tuple[int, int]]] = {}
        for j, v in query.assignment.items():
            by_group.setdefault(self._group_of[j], []).append((j, v))
        gt = self._group_of[query.target]
        gt_pairs = by_group.pop(gt, [])
        half = _HALF if isinstance(self.shift, Fraction) else 0.5
        num = 0
        den = 0
        for s_side in (1, -1):
            outside = half
            for gi, pairs in by_group.items():
                outside = outside * self._group_likelihood(gi, pairs, s_side)
            own_num = 0
            own_den = 0
            for w_side in (1, -1):
                like = half
                for j, v in gt_pairs:
                    p = self._race_mean(j, s_side, w_side)
                    like = like * (p if v else (1 - p))
                own_den = own_den + like
                own_num = own_num + like * self._race_mean(query.target, s_side, w_side)
            num = num + outside * own_num
            den = den + outside * own_den
        if den == 0:
            raise ZeroProbabilityConditionError("assignment has probability 0")
        return num / den

    def conditional_block(self, t, assignment):
        if any(j in self.blocks.blocks[t] for j in assignment):
            raise ValueError("assignment may not include indices of the block itself")
        by_group: dict[int, list[tuple[int, int]]] = {}
        for j, v in assignment.items():
            by_group.setdefault(self._group_of[j], []).append((j, v))
        gt = self._group_of[t]
        block = sorted(self.groups[gt])
        half = _HALF if isinstance(self.shift, Fraction) else 0.5
        # posterior over the national coin from the assigned states
        post = []
        for s_side in (1, -1):
            w = half
            for gi, pairs in by_group.items():
                w = w * self._group_likelihood(gi, pairs, s_side)
            post.append(w)
        den = post[0] + post[1]
        if den == 0:
            raise ZeroProbabilityConditionError("assignment has probability 0")
        out = []
        for z in itertools.product((0, 1), repeat=len(block)):
            p = 0
            for s_side, w_s in zip((1, -1), post):
                for w_side in (1, -1):
                    like = half
                    for j, v in zip(block, z):
                        mu = self._race_mean(j, s_side, w_side)
                        like = like * (mu if v else (1 - mu))
                    p = p + w_s * like
            if p != 0:
                out.append((z, p / den))
        return out

    def _enumerate(self):
        half = _HALF if isinstance(self.shift, Fraction) else 0.5
        acc: dict[tuple, object] = {}
        n_groups = len(self.groups)
        for s_side in (1, -1):
            for w_sides in itertools.product((1, -1), repeat=n_groups):
                latent_p = half ** (n_groups + 1)
                means = [
                    self._race_mean(t, s_side, w_sides[self._group_of[t]])
                    for t in range(self.m)
                ]
                for y in itertools.product((0, 1), repeat=self.m):
                    p = latent_p
                    for v, mu in zip(y, means):
                        p = p * (mu if v else (1 - mu))
                    if p != 0:
                        acc[y] = acc.get(y, 0) + p
        return list(acc.items())


class ExplicitTable(EventDistribution):
    """A distribution given directly by its support table."""

    kind = "explicit-table"

    def __init__(
        self,
        points: Sequence[tuple[Sequence[int], object]],
        blocks: BlockStructure | None = None,
    ):
        if not points:
            raise ValueError("support table is empty")
        m = len(points[0][0])
        table: dict[tuple, object] = {}
        total = 0
        for y, p in points:
            y = tuple(int(v) for v in y)
            if len(y) != m or any(v not in (0, 1) for v in y):
                raise ValueError(f"bad outcome vector {y!r}")
            if p < 0:
                raise ValueError(f"negative probability {p!r}")
            table[y] = table.get(y, 0) + p
            total = total + p
        if abs(_as_float(total) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {_as_float(total)!r}, not 1")
        self._table = dict(sorted(table.items()))
        if blocks is None:
            blocks = BlockStructure(
                blocks=tuple(frozenset({t}) for t in range(m)), b=1, c=0.0
            )
            super().__init__(m, blocks)
            cert = certify_block_correlation(self)
            self.blocks = BlockStructure(blocks.blocks, 1, cert.c)
        else:
            super().__init__(m, blocks)
        pts = list(self._table.items())
        self._outcomes = np.array([y for y, _ in pts], dtype=np.uint8)
        self._cum = np.cumsum([_as_float(p) for _, p in pts])

    def sample(self, rng):
        u = rng.random()
        k = int(np.searchsorted(self._cum, u, side="right"))
        k = min(k, len(self._outcomes) - 1)
        return self._outcomes[k].copy()

    def marginal_values(self):
        out = []
        for t in range(self.m):
            out.append(sum(p for y, p in self._table.items() if y[t]))
        return out

    def conditional_mean(self, query: ConditionalQuery):
        num = 0
        den = 0
        for y, p in self._table.items():
            if all(y[j] == v for j, v in query.assignment.items()):
                den = den + p
                if y[query.target]:
                    num = num + p
        if den == 0:
            raise ZeroProbabilityConditionError("assignment has probability 0")
        return num / den

    def _enumerate(self):
        return list(self._table.items())


# ---------------------------------------------------------------------------
# constructors


def independent(theta: Sequence) -> Independent:
    """Independent events with means ``theta``."""
    return Independent(theta)


def disjoint_blocks(partition, marginals) -> DisjointBlocks:
    """Disjoint perfectly correlated groups with per-group marginals."""
    return DisjointBlocks(partition, marginals)


def random_bias(m: int, biases, weights=None) -> RandomBias:
    """Conditionally iid events with a hidden common bias."""
    return RandomBias(m, biases, weights)


def hidden_coin_groups(m: int, b: int, c) -> HiddenCoinGroups:
    """Perfectly correlated groups of size b over a hidden fair-coin shift c."""
    return HiddenCoinGroups(m, b, c)


def election(state_sizes, base_marginals, national_shift, state_swing) -> Election:
    """State-grouped races with a national shift and per-state swings."""
    return Election(state_sizes, base_marginals, national_shift, state_swing)


def explicit_table(points, blocks: BlockStructure | None = None) -> ExplicitTable:
    """A distribution given by (outcome vector, probability) pairs."""
    return ExplicitTable(points, blocks)


def load_explicit_table(path, blocks: BlockStructure | None = None) -> ExplicitTable:
    """Load an explicit table from a text file.

    Each non-blank, non-comment line holds ``bitstring probability``
    whitespace-separated, e.g. ``0110 0.125``. Probabilities must sum to 1
    within 1e-9.
    """
    points = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{ln}: expected 'bitstring probability'")
        bits, prob = parts
        if any(ch not in "01" for ch in bits):
            raise ValueError(f"{path}:{ln}: bad bitstring {bits!r}")
        points.append((tuple(int(ch) for ch in bits), float(prob)))
    return ExplicitTable(points, blocks)


# ---------------------------------------------------------------------------
# certification


@dataclass(frozen=True)
class CertificationResult:
    """Smallest valid slack per event and overall, from exact enumeration."""

    per_event: tuple[float, ...]
    c: float
    b: int


def certify_block_correlation(
    dist: EventDistribution,
    blocks: BlockStructure | None = None,
    cap: int | None = None,
) -> CertificationResult:
    """Measure the true block-correlation slack of ``dist`` under ``blocks``.

    For each event ``t``, enumerates every positive-probability assignment of
    the non-influencers and returns the largest shift
    ``|E[Y_t] - E[Y_t | Y_outside = y]|``; the overall ``c`` is the max over
    events. Callers asserting a declared ``(b, c)`` should check
    ``result.c <= declared c``.
    """
    blocks = dist.blocks if blocks is None else blocks
    if blocks.m != dist.m:
        raise ValueError("block structure size does not match distribution")
    pts = dist.support(cap)
    theta = dist.marginal_values()
    per_event = []
    for t in range(dist.m):
        outside = blocks.complement(t)
        groups: dict[tuple, list] = {}
        for y, p in pts:
            key = tuple(y[j] for j in outside)
            acc = groups.setdefault(key, [0, 0])
            acc[0] = acc[0] + p
            if y[t]:
                acc[1] = acc[1] + p
        worst = 0
        for total, ones in groups.values():
            dev = abs(ones / total - theta[t])
            if dev > worst:
                worst = dev
        per_event.append(_as_float(worst))
    return CertificationResult(per_event=tuple(per_event), c=max(per_event), b=blocks.b)

"""Probability models mapping head-to-body distances to ranking probabilities.

The pairwise model gives the chance that one item is ranked nearer the head
than another as a ratio of regularized squared distances; a full ranking's
weight is the product over its adjacent pairs, normalized exactly over all
permutations of the body. Distances are kept unsquared and squared at
evaluation time, so Gaussian-sampled (possibly negative) distances need no
clamping.

All functions here are pure Python reference implementations; the compiled
kernels used on hot paths are cross-checked against them in the test suite.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import ItemId
from .errors import CapacityError

# Body sizes above this would enumerate > 7! = 5040 permutations per query.
MAX_ENUMERABLE_BODY = 7


@dataclass(frozen=True)
class ModelParams:
    """Response-model parameters; ``mu`` regularizes the distance ratios."""

    mu: float = 0.5

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"mu must be a positive finite real, got {self.mu}")


@dataclass(frozen=True)
class QueryDistances:
    """Estimated distances from one head to each item of a query body."""

    head: ItemId
    dist: Mapping[ItemId, float]

    def __post_init__(self):
        if not self.dist:
            raise ValueError("dist must contain at least one body item")
        for item, d in self.dist.items():
            if not math.isfinite(d):
                raise ValueError(f"distance for item {item} is not finite: {d}")

    @property
    def body(self) -> tuple[ItemId, ...]:
        return tuple(self.dist)


def triplet_prob(d_ab1: float, d_ab2: float, params: ModelParams) -> float:
    """Probability that the item at distance ``d_ab1`` is ranked nearer the head.

    Equals (d_ab2^2 + mu) / (d_ab1^2 + d_ab2^2 + 2 mu); always in (0, 1),
    and complementary in its two distance arguments.
    """
    if not (math.isfinite(d_ab1) and math.isfinite(d_ab2)):
        raise ValueError(f"distances must be finite, got ({d_ab1}, {d_ab2})")
    sq1 = d_ab1 * d_ab1
    sq2 = d_ab2 * d_ab2
    return (sq2 + params.mu) / (sq1 + sq2 + 2.0 * params.mu)


def ranking_weight(
    ranking: Sequence[ItemId], dq: QueryDistances, params: ModelParams
) -> float:
    """Unnormalized probability weight of one body ranking.

    The product of ``triplet_prob`` over the ranking's adjacent pairs; for a
    triplet query this is ``triplet_prob`` itself.
    """
    ranking = tuple(ranking)
    if sorted(ranking) != sorted(dq.body):
        raise ValueError(f"ranking {ranking} is not a permutation of body {dq.body}")
    weight = 1.0
    for first, second in zip(ranking, ranking[1:]):
        weight *= triplet_prob(dq.dist[first], dq.dist[second], params)
    return weight


def ranking_pmf(
    dq: QueryDistances,
    params: ModelParams,
    max_enumerable: int = MAX_ENUMERABLE_BODY,
) -> dict[tuple[ItemId, ...], float]:
    """Exact ranking distribution over all permutations of the body.

    Normalizes ``ranking_weight`` by enumeration, which caps the body size
    at ``max_enumerable`` items.
    """
    body = dq.body
    if len(body) > max_enumerable:
        raise CapacityError(
            f"body of size {len(body)} exceeds the enumeration cap of "
            f"{max_enumerable} ({math.factorial(max_enumerable)} permutations)"
        )
    weights = {
        perm: ranking_weight(perm, dq, params)
        for perm in itertools.permutations(body)
    }
    total = sum(weights.values())
    return {perm: w / total for perm, w in weights.items()}

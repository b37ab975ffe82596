"""Monte Carlo scoring of candidate queries by mutual information.

A candidate body is scored by how much its (unknown) ranking response would
tell us about the embedding: the entropy of the sample-averaged ranking
distribution minus the average per-sample entropy, where samples draw each
head-to-body distance from a Gaussian centered on the current estimate with
a variance taken from the spread of all estimated distances.

Entropies are in nats. Per-item noise streams are seeded by (base seed,
item id), not list position, so scores are invariant to body order and
candidates sharing items within one selection round reuse the same draws
(common random numbers).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .core import ItemId
from .errors import CapacityError
from .models import MAX_ENUMERABLE_BODY, ModelParams, QueryDistances, ranking_pmf
from .seeding import rng_from


@dataclass(frozen=True)
class DistancePosterior:
    """Gaussian beliefs over the distances from one head to a candidate body."""

    means: QueryDistances
    sigma2: float
    n_samples: int

    def __post_init__(self):
        if not (math.isfinite(self.sigma2) and self.sigma2 >= 0):
            raise ValueError(f"sigma2 must be a nonnegative real, got {self.sigma2}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be at least 1, got {self.n_samples}")


@dataclass(frozen=True)
class CandidateScore:
    """A candidate body with its estimated mutual information in nats."""

    body: tuple[ItemId, ...]
    info: float


def embedding_variance(d_hat: np.ndarray) -> float:
    """Population variance over all entries of a distance matrix, zeros included."""
    return float(np.asarray(d_hat, dtype=np.float64).var())


@lru_cache(maxsize=None)
def _permutation_table(n_body: int) -> np.ndarray:
    perms = np.asarray(
        list(itertools.permutations(range(n_body))), dtype=np.int64
    ).reshape(-1, n_body)
    perms.setflags(write=False)
    return perms


def _check_enumerable(n_body: int, max_enumerable: int) -> None:
    if n_body > max_enumerable:
        raise CapacityError(
            f"body of size {n_body} exceeds the enumeration cap of "
            f"{max_enumerable} ({math.factorial(max_enumerable)} permutations)"
        )


@lru_cache(maxsize=8192)
def _unit_normal_column(rng_seed: int, item: int, n: int) -> np.ndarray:
    # Candidates within one selection round share (seed, item) streams, so
    # the same draws recur many times; caching skips generator construction.
    column = rng_from(rng_seed, item).standard_normal(n)
    column.setflags(write=False)
    return column


def _sample_matrix(post: DistancePosterior, rng_seed: int) -> np.ndarray:
    """(n_samples, n_body) distance draws; column streams keyed by item id."""
    sd = math.sqrt(post.sigma2)
    cols = [
        post.means.dist[item] + sd * _unit_normal_column(rng_seed, item, post.n_samples)
        for item in post.means.body
    ]
    return np.ascontiguousarray(np.column_stack(cols))


def sample_distances(post: DistancePosterior, rng_seed: int) -> list[QueryDistances]:
    """Draw ``post.n_samples`` independent distance sets for the body.

    Draws may be negative; downstream models only consume squared
    distances. Deterministic given the seed.
    """
    body = post.means.body
    head = post.means.head
    matrix = _sample_matrix(post, rng_seed)
    return [
        QueryDistances(head, dict(zip(body, (float(x) for x in row))))
        for row in matrix
    ]


def ranking_entropy(
    dq: QueryDistances,
    params: ModelParams,
    max_enumerable: int = MAX_ENUMERABLE_BODY,
) -> float:
    """Shannon entropy (nats) of the exact ranking distribution for ``dq``."""
    pmf = ranking_pmf(dq, params, max_enumerable)
    return -sum(p * math.log(p) for p in pmf.values())


def mutual_information(
    post: DistancePosterior,
    params: ModelParams,
    rng_seed: int,
    max_enumerable: int = MAX_ENUMERABLE_BODY,
) -> CandidateScore:
    """Estimate the information a ranking of this body would yield.

    Monte Carlo estimate: entropy of the sample-averaged ranking pmf minus
    the sample-averaged ranking entropy. Nonnegative up to float rounding
    and at most log((k-1)!). With a single sample, or with no posterior
    uncertainty, the two terms coincide on identical pmfs and the estimate
    is exactly zero, so the sampling is skipped.
    """
    body = post.means.body
    _check_enumerable(len(body), max_enumerable)
    if post.n_samples == 1 or post.sigma2 == 0.0:
        return CandidateScore(body, 0.0)
    samples = _sample_matrix(post, rng_seed)
    perms = _permutation_table(len(body))
    info = _kernels.mi_from_samples(samples, params.mu, perms)
    return CandidateScore(body, float(info))

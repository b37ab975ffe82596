"""Simulated ranking oracles over a planted ground-truth point cloud.

Three base behaviors: a deterministic distance sort, a Plackett-Luce
sampler whose item scores decay with squared planted distance, and a
Gaussian model that perturbs the planted coordinates before sorting. Any of
them can be wrapped with ranking inversion noise that reverses the whole
response with fixed probability.

Each query is answered from its own RNG stream keyed by query index, so
responses are reproducible and independent of call order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    SOURCE_SIMULATED,
    RankingResponse,
    TupleQuery,
)
from .seeding import TAG_ORACLE, rng_from

KIND_DETERMINISTIC = "deterministic"
KIND_PLACKETT_LUCE = "plackett_luce"
KIND_GAUSSIAN = "gaussian"
ORACLE_KINDS = (KIND_DETERMINISTIC, KIND_PLACKETT_LUCE, KIND_GAUSSIAN)

# Default coordinate-noise scale, as a fraction of the cloud's RMS pairwise
# distance; chosen to be visibly stochastic but still learnable.
GAUSSIAN_SIGMA_FRACTION = 0.15


@dataclass(frozen=True)
class GroundTruth:
    """Planted coordinates, one column per item."""

    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 2:
            raise ValueError(f"coords must be 2-D (dim x n_items), got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coords must be finite")
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    @property
    def n_items(self) -> int:
        return self.coords.shape[1]

    def distances(self, head: int, items) -> np.ndarray:
        diff = self.coords[:, list(items)] - self.coords[:, [head]]
        return np.sqrt((diff**2).sum(axis=0))

    def distance_matrix(self) -> np.ndarray:
        g = self.coords.T @ self.coords
        sq = np.diagonal(g)[:, None] + np.diagonal(g)[None, :] - 2.0 * g
        d = np.sqrt(np.clip(sq, 0.0, None))
        np.fill_diagonal(d, 0.0)
        return d

    def rms_pairwise_distance(self) -> float:
        d = self.distance_matrix()
        off = d[~np.eye(self.n_items, dtype=bool)]
        return float(math.sqrt(np.mean(off**2)))


@dataclass(frozen=True)
class OracleConfig:
    """Oracle behavior switchboard.

    ``invert_prob`` applies ranking-inversion noise on top of any base
    kind; ``gaussian_sigma=None`` resolves to a fraction of the planted
    cloud's RMS pairwise distance when the oracle is built.
    """

    kind: str = KIND_DETERMINISTIC
    pl_mu: float = 0.5
    gaussian_sigma: float | None = None
    invert_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ORACLE_KINDS:
            raise ValueError(f"unknown oracle kind {self.kind!r}; expected one of {ORACLE_KINDS}")
        if not self.pl_mu > 0:
            raise ValueError("pl_mu must be positive")
        if self.gaussian_sigma is not None and self.gaussian_sigma < 0:
            raise ValueError("gaussian_sigma must be nonnegative")
        if not 0.0 <= self.invert_prob <= 1.0:
            raise ValueError(f"invert_prob must be in [0, 1], got {self.invert_prob}")


def make_ground_truth(n_items: int, dim: int, seed: int) -> GroundTruth:
    """Planted point cloud with i.i.d. standard normal coordinates."""
    if dim < 1:
        raise ValueError(f"dim must be at least 1, got {dim}")
    return GroundTruth(rng_from(seed).standard_normal((dim, n_items)))


def _sort_by_distance(body, distances) -> tuple[int, ...]:
    # Ascending distance; equidistant items ordered by id.
    body = np.asarray(body, dtype=np.int64)
    order = np.lexsort((body, np.asarray(distances)))
    return tuple(int(b) for b in body[order])


def answer_deterministic(query: TupleQuery, gt: GroundTruth, timestamp: float = 0.0) -> RankingResponse:
    """Body sorted by true distance to the head, ties broken by item id."""
    ranking = _sort_by_distance(query.body, gt.distances(query.head, query.body))
    return RankingResponse(query, ranking, timestamp, SOURCE_SIMULATED)


def answer_plackett_luce(
    query: TupleQuery,
    gt: GroundTruth,
    cfg: OracleConfig,
    rng: np.random.Generator,
    timestamp: float = 0.0,
) -> RankingResponse:
    """Sequential sampling without replacement, scores exp(-d^2 / pl_mu).

    At each position the next item is drawn with probability proportional
    to its score among the items not yet ranked; ``pl_mu`` is the softmax
    temperature on squared distance, so mistakes concentrate on near-ties
    and large pl_mu approaches a uniform ranker.
    """
    d = gt.distances(query.head, query.body)
    sq = d**2
    # Shifting by the minimum cancels in every sampling step and avoids
    # underflow for far-away bodies.
    scores = np.exp(-(sq - sq.min()) / cfg.pl_mu)
    remaining = list(query.body)
    weights = list(scores)
    ranking: list[int] = []
    while remaining:
        probs = np.asarray(weights) / sum(weights)
        idx = int(rng.choice(len(remaining), p=probs))
        ranking.append(remaining.pop(idx))
        weights.pop(idx)
    return RankingResponse(query, tuple(ranking), timestamp, SOURCE_SIMULATED)


def answer_gaussian(
    query: TupleQuery,
    gt: GroundTruth,
    cfg: OracleConfig,
    rng: np.random.Generator,
    timestamp: float = 0.0,
) -> RankingResponse:
    """Deterministic sort after perturbing the involved points' coordinates.

    Fresh i.i.d. Gaussian noise of scale ``gaussian_sigma`` is applied to
    the head and every body item for each query.
    """
    sigma = cfg.gaussian_sigma
    if sigma is None:
        raise ValueError("gaussian_sigma must be resolved before answering")
    ids = [query.head, *query.body]
    noisy = gt.coords[:, ids] + sigma * rng.standard_normal((gt.dim, len(ids)))
    diff = noisy[:, 1:] - noisy[:, [0]]
    distances = np.sqrt((diff**2).sum(axis=0))
    ranking = _sort_by_distance(query.body, distances)
    return RankingResponse(query, ranking, timestamp, SOURCE_SIMULATED)


def wrap_inversion(
    response: RankingResponse, invert_prob: float, rng: np.random.Generator
) -> RankingResponse:
    """Reverse the full ranking with probability ``invert_prob``."""
    if not 0.0 <= invert_prob <= 1.0:
        raise ValueError(f"invert_prob must be in [0, 1], got {invert_prob}")
    if invert_prob > 0.0 and rng.random() < invert_prob:
        return RankingResponse(
            response.query,
            tuple(reversed(response.ranking)),
            response.timestamp,
            response.source,
        )
    return response


class Oracle:
    """A configured simulated oracle bound to a planted ground truth."""

    def __init__(self, gt: GroundTruth, cfg: OracleConfig):
        if cfg.kind == KIND_GAUSSIAN and cfg.gaussian_sigma is None:
            cfg = OracleConfig(
                kind=cfg.kind,
                pl_mu=cfg.pl_mu,
                gaussian_sigma=GAUSSIAN_SIGMA_FRACTION * gt.rms_pairwise_distance(),
                invert_prob=cfg.invert_prob,
                seed=cfg.seed,
            )
        self.gt = gt
        self.cfg = cfg

    def answer(self, query: TupleQuery, query_index: int) -> RankingResponse:
        """Rank the query body; deterministic given (config seed, query index)."""
        rng = rng_from(self.cfg.seed, TAG_ORACLE, query_index)
        timestamp = float(query_index)
        if self.cfg.kind == KIND_DETERMINISTIC:
            response = answer_deterministic(query, self.gt, timestamp)
        elif self.cfg.kind == KIND_PLACKETT_LUCE:
            response = answer_plackett_luce(query, self.gt, self.cfg, rng, timestamp)
        else:
            response = answer_gaussian(query, self.gt, self.cfg, rng, timestamp)
        return wrap_inversion(response, self.cfg.invert_prob, rng)

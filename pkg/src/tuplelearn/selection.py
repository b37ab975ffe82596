"""Query selection: the adaptive information-gain loop and the random baseline.

One experiment round recomputes distances and their spread from the current
fit, then poses one tuple per head: either the candidate body maximizing
estimated mutual information (strategy ``info_tuple``) or a uniformly drawn
body (strategy ``random``). Responses are appended and the embedding is
refit, warm-started from the previous round.

Everything is deterministic given the config seeds: candidate pools, Monte
Carlo draws and oracle streams all derive from (seed, round, head) so runs
are reproducible and heads could be scored in parallel without changing
results.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

import numpy as np

from .core import ItemCatalog, ItemId, RankingResponse, ResponseLog, TupleQuery
from .embedding import MdsConfig, distances_from_similarity, fit_mds, recover_coordinates
from .infogain import (
    CandidateScore,
    DistancePosterior,
    embedding_variance,
    mutual_information,
)
from .metrics import (
    MetricSample,
    coherence,
    holdout_accuracy,
    mean_tau_vs_truth,
    normalized_query_count,
)
from .models import MAX_ENUMERABLE_BODY, ModelParams, QueryDistances
from .seeding import (
    TAG_BURN_IN,
    TAG_CANDIDATES,
    TAG_MI,
    TAG_PICK,
    TAG_SELECT,
    derive_seed,
    rng_from,
)

STRATEGY_INFO_TUPLE = "info_tuple"
STRATEGY_RANDOM = "random"
STRATEGIES = (STRATEGY_INFO_TUPLE, STRATEGY_RANDOM)

# Candidate pools above ~this size are rejection-sampled instead of
# materializing every body.
_ENUMERATE_BODIES_LIMIT = 100_000


class OracleHandle(Protocol):
    def answer(self, query: TupleQuery, query_index: int) -> RankingResponse: ...


@dataclass(frozen=True)
class SelectionConfig:
    """Settings for one experiment run.

    ``candidates_per_head`` and ``n_f`` accept None and resolve against the
    catalog size: ceil(10 sqrt(N)) candidate bodies per head, and
    max(10, ceil(N / 10)) Monte Carlo samples.
    """

    tuple_size: int = 3
    burn_in: int = 5
    horizon: int = 20
    candidates_per_head: int | None = None
    n_f: int | None = None
    params: ModelParams = ModelParams()
    mds: MdsConfig = MdsConfig()
    strategy: str = STRATEGY_INFO_TUPLE
    seed: int = 0
    refit_max_iters: int = 200
    max_enumerable: int = MAX_ENUMERABLE_BODY

    def __post_init__(self):
        if self.tuple_size < 3:
            raise ValueError(f"tuple_size must be at least 3, got {self.tuple_size}")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if self.candidates_per_head is not None and self.candidates_per_head < 1:
            raise ValueError("candidates_per_head must be at least 1")
        if self.n_f is not None and self.n_f < 1:
            raise ValueError("n_f must be at least 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")

    def validate_for_items(self, n_items: int) -> None:
        if self.tuple_size - 1 > n_items - 1:
            raise ValueError(
                f"tuple_size {self.tuple_size} needs {self.tuple_size - 1} body items "
                f"but the catalog only offers {n_items - 1}"
            )

    def resolved_candidates_per_head(self, n_items: int) -> int:
        if self.candidates_per_head is not None:
            return self.candidates_per_head
        return math.ceil(10.0 * math.sqrt(n_items))

    def resolved_n_f(self, n_items: int) -> int:
        if self.n_f is not None:
            return self.n_f
        return max(10, math.ceil(n_items / 10))


@dataclass(frozen=True)
class EmbeddingState:
    """Per-round snapshot: fitted similarity, induced distances, their spread."""

    k_hat: np.ndarray
    d_hat: np.ndarray
    sigma2: float

    @classmethod
    def from_similarity(cls, k_hat: np.ndarray) -> "EmbeddingState":
        d_hat = distances_from_similarity(k_hat)
        return cls(k_hat, d_hat, embedding_variance(d_hat))

    @property
    def n_items(self) -> int:
        return self.k_hat.shape[0]

    def coordinates(self, dim: int) -> np.ndarray:
        return recover_coordinates(self.k_hat, dim)


@dataclass(frozen=True)
class SelectedQuery:
    query: TupleQuery
    score: CandidateScore
    seconds: float


@dataclass(frozen=True)
class RoundReport:
    """What one adaptive round chose and how long it took."""

    round_index: int
    selections: tuple[SelectedQuery, ...]
    refit_loss: float
    refit_seconds: float


@dataclass
class ExperimentResult:
    state: EmbeddingState
    log: ResponseLog
    round_reports: list[RoundReport] = field(default_factory=list)
    metric_samples: list[MetricSample] = field(default_factory=list)


def burn_in_queries(
    n_items: int, cfg: SelectionConfig, rng_seed: int
) -> list[TupleQuery]:
    """Random triplet queries, ``cfg.burn_in`` per head, before adaptation starts.

    Always triplets regardless of the configured tuple size; bodies are
    drawn uniformly without replacement from the other items.
    """
    if n_items < 3:
        raise ValueError(f"need at least 3 items for triplet queries, got {n_items}")
    rng = rng_from(rng_seed)
    queries: list[TupleQuery] = []
    for head in range(n_items):
        pool = np.delete(np.arange(n_items, dtype=np.int64), head)
        for _ in range(cfg.burn_in):
            body = rng.choice(pool, size=2, replace=False)
            queries.append(TupleQuery(head, tuple(sorted(int(b) for b in body))))
    return queries


def propose_candidates(
    head: ItemId, n_items: int, cfg: SelectionConfig, rng_seed: int
) -> list[tuple[ItemId, ...]]:
    """Uniformly downsampled distinct candidate bodies for one head.

    Bodies are unordered (stored sorted); if the requested pool exceeds the
    number of distinct bodies, all of them are returned. Output is sorted
    lexicographically.
    """
    body_size = cfg.tuple_size - 1
    pool = np.delete(np.arange(n_items, dtype=np.int64), head)
    total = math.comb(n_items - 1, body_size)
    m = min(cfg.resolved_candidates_per_head(n_items), total)
    rng = rng_from(rng_seed)
    if total <= min(4 * m, _ENUMERATE_BODIES_LIMIT):
        every = [
            tuple(int(x) for x in combo)
            for combo in itertools.combinations(pool, body_size)
        ]
        if m >= total:
            return sorted(every)
        picked = rng.choice(total, size=m, replace=False)
        return sorted(every[i] for i in picked)
    bodies: set[tuple[int, ...]] = set()
    while len(bodies) < m:
        draw = rng.choice(pool, size=body_size, replace=False)
        bodies.add(tuple(sorted(int(b) for b in draw)))
    return sorted(bodies)


def select_query(
    head: ItemId,
    state: EmbeddingState,
    cfg: SelectionConfig,
    rng_seed: int,
) -> tuple[TupleQuery, CandidateScore]:
    """Choose the next body for ``head`` under the configured strategy.

    ``info_tuple`` scores every candidate by Monte Carlo mutual information
    with one shared sample seed (common random numbers) and returns the
    argmax, ties going to the lexicographically least body. ``random``
    returns one uniform body with a zero score and never touches the
    Monte Carlo machinery.
    """
    n_items = state.n_items
    cfg.validate_for_items(n_items)
    if cfg.strategy == STRATEGY_RANDOM:
        one = replace(cfg, candidates_per_head=1)
        body = propose_candidates(head, n_items, one, derive_seed(rng_seed, TAG_PICK))[0]
        return TupleQuery(head, body), CandidateScore(body, 0.0)

    bodies = propose_candidates(
        head, n_items, cfg, derive_seed(rng_seed, TAG_CANDIDATES)
    )
    mi_seed = derive_seed(rng_seed, TAG_MI)
    n_f = cfg.resolved_n_f(n_items)
    best: CandidateScore | None = None
    for body in bodies:
        means = QueryDistances(
            head, {b: float(state.d_hat[head, b]) for b in body}
        )
        post = DistancePosterior(means, state.sigma2, n_f)
        score = mutual_information(post, cfg.params, mi_seed, cfg.max_enumerable)
        if best is None or score.info > best.info:
            best = score
    assert best is not None
    return TupleQuery(head, best.body), best


@dataclass(frozen=True)
class MetricsConfig:
    """What to measure and how often (every ``every`` rounds, plus round 0)."""

    every: int = 1
    ground_truth: "object | None" = None  # oracles.GroundTruth when present
    holdout: "Sequence | None" = None
    include_coherence: bool = True

    def sample(
        self, round_index: int, k_hat: np.ndarray, log: ResponseLog
    ) -> MetricSample:
        mean_tau = (
            mean_tau_vs_truth(k_hat, self.ground_truth)
            if self.ground_truth is not None
            else None
        )
        acc = (
            holdout_accuracy(k_hat, self.holdout)
            if self.holdout
            else None
        )
        coh = coherence(k_hat, log.responses) if self.include_coherence and len(log) else None
        return MetricSample(
            round_index=round_index,
            normalized_query_count=normalized_query_count(log),
            mean_tau=mean_tau,
            holdout_accuracy=acc,
            coherence=coh,
        )


def run_experiment(
    catalog: ItemCatalog,
    oracle: OracleHandle,
    cfg: SelectionConfig,
    metrics_cfg: MetricsConfig | None = None,
) -> ExperimentResult:
    """Burn in, fit, then run the adaptive loop for ``cfg.horizon`` rounds.

    Distances and their variance are recomputed once per round; within a
    round one query is posed per head, in head order, against the fit from
    the end of the previous round. Refits are warm-started and capped at
    ``cfg.refit_max_iters`` iterations. Fully deterministic given the
    catalog, oracle seed and config.
    """
    n_items = catalog.n_items
    cfg.validate_for_items(n_items)
    log = ResponseLog()
    query_index = 0

    for query in burn_in_queries(n_items, cfg, derive_seed(cfg.seed, TAG_BURN_IN)):
        log.append(oracle.answer(query, query_index))
        query_index += 1

    fit = fit_mds(log, n_items, cfg.mds)
    k_hat = fit.matrix

    metric_samples: list[MetricSample] = []
    if metrics_cfg is not None:
        metric_samples.append(metrics_cfg.sample(0, k_hat, log))

    reports: list[RoundReport] = []
    refit_cfg = replace(cfg.mds, max_iters=cfg.refit_max_iters)
    for round_index in range(1, cfg.horizon + 1):
        state = EmbeddingState.from_similarity(k_hat)
        selections: list[SelectedQuery] = []
        for head in range(n_items):
            started = time.perf_counter()
            query, score = select_query(
                head, state, cfg, derive_seed(cfg.seed, TAG_SELECT, round_index, head)
            )
            elapsed = time.perf_counter() - started
            log.append(oracle.answer(query, query_index))
            query_index += 1
            selections.append(SelectedQuery(query, score, elapsed))

        refit_started = time.perf_counter()
        refit = fit_mds(log, n_items, refit_cfg, warm_start=k_hat)
        refit_elapsed = time.perf_counter() - refit_started
        k_hat = refit.matrix
        reports.append(
            RoundReport(
                round_index=round_index,
                selections=tuple(selections),
                refit_loss=refit.loss_trace[-1] if refit.loss_trace else float("nan"),
                refit_seconds=refit_elapsed,
            )
        )
        if metrics_cfg is not None and round_index % metrics_cfg.every == 0:
            metric_samples.append(metrics_cfg.sample(round_index, k_hat, log))

    return ExperimentResult(
        state=EmbeddingState.from_similarity(k_hat),
        log=log,
        round_reports=reports,
        metric_samples=metric_samples,
    )

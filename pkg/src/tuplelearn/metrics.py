"""Embedding-quality metrics and their CSV export.

Rank agreement uses Kendall's tau with exact integer pair counting (inputs
are permutations, so there are never ties between distinct items); imputed
rankings break distance ties by ascending item id everywhere, keeping every
metric deterministic.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import RankingResponse, ResponseLog, Triplet
from .embedding import distances_from_similarity
from .oracles import GroundTruth


@dataclass(frozen=True)
class MetricSample:
    """One row of the per-round metric trace."""

    round_index: int
    normalized_query_count: int
    mean_tau: float | None = None
    holdout_accuracy: float | None = None
    coherence: float | None = None
    cumulative_label_seconds: float | None = None


def kendall_tau(r1: Sequence[int], r2: Sequence[int]) -> float:
    """Rank correlation between two orderings of the same items, in [-1, 1].

    (concordant - discordant) / C(n, 2) over all item pairs.
    """
    r1 = list(r1)
    r2 = list(r2)
    n = len(r1)
    if n < 2:
        raise ValueError(f"rankings must have at least 2 items, got {n}")
    if sorted(r1) != sorted(r2):
        raise ValueError("rankings must order the same item set")
    pos2 = {item: i for i, item in enumerate(r2)}
    y = np.asarray([pos2[item] for item in r1], dtype=np.int64)
    diff = np.sign(y[None, :] - y[:, None])
    upper = np.triu_indices(n, 1)
    concordant_minus_discordant = int(diff[upper].sum())
    return concordant_minus_discordant / math.comb(n, 2)


def _ranking_by_distance(distances: np.ndarray, items: np.ndarray) -> list[int]:
    order = np.lexsort((items, distances))
    return [int(i) for i in items[order]]


def mean_tau_vs_truth(k: np.ndarray, gt: GroundTruth) -> float:
    """Average over heads of the tau between learned and planted item sorts.

    For each head, every other item is sorted by distance under the learned
    matrix and under the planted coordinates, and the two total rankings
    are correlated.
    """
    d_est = distances_from_similarity(k)
    d_true = gt.distance_matrix()
    n = d_est.shape[0]
    if d_true.shape[0] != n:
        raise ValueError(f"size mismatch: embedding {n}, ground truth {d_true.shape[0]}")
    taus = []
    for head in range(n):
        others = np.asarray([i for i in range(n) if i != head], dtype=np.int64)
        est = _ranking_by_distance(d_est[head, others], others)
        true = _ranking_by_distance(d_true[head, others], others)
        taus.append(kendall_tau(est, true))
    return float(np.mean(taus))


def holdout_accuracy(k: np.ndarray, holdout: Sequence[Triplet]) -> float:
    """Fraction of held-out triplets whose order the embedding reproduces.

    Exact distance ties count one half.
    """
    if not holdout:
        raise ValueError("holdout set must be nonempty")
    d = distances_from_similarity(k)
    score = 0.0
    for t in holdout:
        near = d[t.head, t.closer]
        far = d[t.head, t.farther]
        if near < far:
            score += 1.0
        elif near == far:
            score += 0.5
    return score / len(holdout)


def coherence(k: np.ndarray, responses: Sequence[RankingResponse]) -> float:
    """Mean tau between recorded rankings and the embedding's imputed rankings."""
    if not responses:
        raise ValueError("responses must be nonempty")
    d = distances_from_similarity(k)
    taus = []
    for response in responses:
        body = np.asarray(response.query.body, dtype=np.int64)
        imputed = _ranking_by_distance(d[response.query.head, body], body)
        taus.append(kendall_tau(list(response.ranking), imputed))
    return float(np.mean(taus))


def normalized_query_count(log: ResponseLog | Iterable[RankingResponse]) -> int:
    """Total response cost in constituent-triplet units.

    A tuple of size k contributes k - 2 (the length of its ranking chain's
    transitive reduction); a plain triplet counts 1.
    """
    return sum(max(1, r.tuple_size - 2) for r in log)


METRIC_CSV_COLUMNS = (
    "round",
    "normalized_count",
    "mean_tau",
    "holdout_acc",
    "coherence",
    "label_seconds",
)


def _fmt(value: float | int | None) -> str:
    return "" if value is None else repr(float(value) if isinstance(value, float) else value)


def write_metrics_csv(samples: Sequence[MetricSample], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_CSV_COLUMNS)
        for s in samples:
            writer.writerow(
                [
                    s.round_index,
                    s.normalized_query_count,
                    _fmt(s.mean_tau),
                    _fmt(s.holdout_accuracy),
                    _fmt(s.coherence),
                    _fmt(s.cumulative_label_seconds),
                ]
            )


def read_metrics_csv(path: str | Path) -> list[MetricSample]:
    out: list[MetricSample] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != METRIC_CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected metric columns {header}")
        for row in reader:
            rnd, count, tau, acc, coh, secs = row
            out.append(
                MetricSample(
                    round_index=int(rnd),
                    normalized_query_count=int(count),
                    mean_tau=float(tau) if tau else None,
                    holdout_accuracy=float(acc) if acc else None,
                    coherence=float(coh) if coh else None,
                    cumulative_label_seconds=float(secs) if secs else None,
                )
            )
    return out

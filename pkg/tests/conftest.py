"""Shared helpers for building planted configurations and response logs."""

import itertools

import numpy as np
import pytest

from tuplelearn.core import RankingResponse, ResponseLog, TupleQuery
from tuplelearn.oracles import GroundTruth, answer_deterministic


def planted_similarity(n_items: int, dim: int, seed: int) -> np.ndarray:
    """Unit-diagonal Gram matrix of random points on the unit sphere."""
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((dim, n_items))
    m /= np.linalg.norm(m, axis=0, keepdims=True)
    return m.T @ m


def random_log(n_items: int, n_responses: int, seed: int, tuple_size: int = 3) -> ResponseLog:
    """Responses with random bodies and random rankings (no planted structure)."""
    rng = np.random.default_rng(seed)
    log = ResponseLog()
    for _ in range(n_responses):
        head = int(rng.integers(n_items))
        pool = [i for i in range(n_items) if i != head]
        body = rng.choice(pool, size=tuple_size - 1, replace=False)
        ranking = tuple(int(b) for b in rng.permutation(body))
        log.append(RankingResponse(TupleQuery(head, tuple(int(b) for b in body)), ranking))
    return log


def consistent_triplet_log(gt: GroundTruth) -> ResponseLog:
    """Every triplet query, answered noiselessly from the planted coordinates."""
    n = gt.n_items
    log = ResponseLog()
    for head in range(n):
        others = [i for i in range(n) if i != head]
        for b1, b2 in itertools.combinations(others, 2):
            log.append(answer_deterministic(TupleQuery(head, (b1, b2)), gt))
    return log


@pytest.fixture(scope="session")
def small_ground_truth():
    from tuplelearn.oracles import make_ground_truth

    return make_ground_truth(20, 2, seed=5)

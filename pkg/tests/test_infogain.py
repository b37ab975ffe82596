"""Mutual-information estimation: bounds, invariances, quadrature agreement.

The independent oracle for the triplet-size case is 2-D Gauss-Hermite
quadrature over the two distance coordinates, evaluating the same two
entropy terms without Monte Carlo.
"""

import math

import numpy as np
import pytest

from tuplelearn.errors import CapacityError
from tuplelearn.infogain import (
    CandidateScore,
    DistancePosterior,
    embedding_variance,
    mutual_information,
    ranking_entropy,
    sample_distances,
)
from tuplelearn.models import ModelParams, QueryDistances


def binary_entropy(p):
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


def quadrature_mi_triplet(mean1, mean2, sigma2, mu, n_nodes=80):
    """Gauss-Hermite evaluation of H(E[pmf]) - E[H(pmf)] for a 2-item body."""
    z, w = np.polynomial.hermite_e.hermegauss(n_nodes)
    w = w / w.sum()
    sd = math.sqrt(sigma2)
    d1 = mean1 + sd * z
    d2 = mean2 + sd * z
    p = (d2[None, :] ** 2 + mu) / (d1[:, None] ** 2 + d2[None, :] ** 2 + 2 * mu)
    weights = w[:, None] * w[None, :]
    mean_p = float((weights * p).sum())
    mean_h = float((weights * (-p * np.log(p) - (1 - p) * np.log(1 - p))).sum())
    return binary_entropy(mean_p) - mean_h


class TestEmbeddingVariance:
    def test_constant_matrix(self):
        assert embedding_variance(np.zeros((5, 5))) == 0.0

    def test_hand_evaluated_two_by_two(self):
        assert embedding_variance(np.array([[0.0, 2.0], [2.0, 0.0]])) == 1.0
        assert embedding_variance(np.array([[0.0, 1.0], [1.0, 0.0]])) == 0.25

    def test_population_variance_formula(self):
        rng = np.random.default_rng(2)
        d = rng.uniform(0, 3, size=(7, 7))
        flat = d.ravel()
        expected = float(np.mean((flat - flat.mean()) ** 2))
        assert embedding_variance(d) == pytest.approx(expected, rel=1e-12)


class TestSampleDistances:
    def test_zero_variance_returns_means(self):
        post = DistancePosterior(QueryDistances(0, {1: 1.5, 2: -0.25}), 0.0, 20)
        for sample in sample_distances(post, rng_seed=3):
            assert sample.dist == {1: 1.5, 2: -0.25}

    def test_law_of_large_numbers(self):
        n = 100_000
        post = DistancePosterior(QueryDistances(0, {1: 2.0, 2: -1.0}), 1.0, n)
        samples = sample_distances(post, rng_seed=4)
        for item, mean in ((1, 2.0), (2, -1.0)):
            values = np.array([s.dist[item] for s in samples])
            assert abs(values.mean() - mean) < 4.0 / math.sqrt(n)

    def test_deterministic_given_seed(self):
        post = DistancePosterior(QueryDistances(0, {1: 1.0, 5: 2.0}), 0.7, 50)
        a = sample_distances(post, rng_seed=9)
        b = sample_distances(post, rng_seed=9)
        assert all(x.dist == y.dist for x, y in zip(a, b))

    def test_invalid_posterior_rejected(self):
        with pytest.raises(ValueError):
            DistancePosterior(QueryDistances(0, {1: 1.0}), -0.1, 10)
        with pytest.raises(ValueError):
            DistancePosterior(QueryDistances(0, {1: 1.0}), 1.0, 0)


class TestRankingEntropy:
    def test_uniform_triplet(self):
        dq = QueryDistances(0, {1: 1.0, 2: 1.0})
        assert ranking_entropy(dq, ModelParams(0.5)) == pytest.approx(math.log(2), abs=1e-12)

    def test_uniform_five_tuple(self):
        dq = QueryDistances(0, {i: 2.0 for i in range(1, 5)})
        assert ranking_entropy(dq, ModelParams(0.5)) == pytest.approx(math.log(24), abs=1e-12)

    def test_hand_evaluated_asymmetric_triplet(self):
        dq = QueryDistances(0, {1: 1.0, 2: math.sqrt(3.0)})
        expected = binary_entropy(0.7)
        assert ranking_entropy(dq, ModelParams(0.5)) == pytest.approx(expected, abs=1e-12)

    def test_capacity_error(self):
        dq = QueryDistances(0, {i: 1.0 for i in range(1, 9)})
        with pytest.raises(CapacityError):
            ranking_entropy(dq, ModelParams(0.5))


class TestMutualInformation:
    def test_zero_variance_is_exactly_zero(self):
        post = DistancePosterior(QueryDistances(0, {1: 1.0, 2: 2.0}), 0.0, 500)
        score = mutual_information(post, ModelParams(0.5), rng_seed=1)
        assert score.info == 0.0

    def test_single_sample_is_exactly_zero(self):
        post = DistancePosterior(QueryDistances(0, {1: 1.0, 2: 2.0}), 0.8, 1)
        assert mutual_information(post, ModelParams(0.5), rng_seed=1).info == 0.0

    def test_bounds_on_random_candidates(self):
        # Acceptance: estimator in [-1e-12, log((k-1)!) + 1e-9] on 1000 candidates.
        rng = np.random.default_rng(17)
        for _ in range(1000):
            k = int(rng.integers(3, 6))
            means = {i + 1: float(m) for i, m in enumerate(rng.normal(1.0, 1.0, k - 1))}
            post = DistancePosterior(
                QueryDistances(0, means),
                float(rng.uniform(0, 2.0)),
                int(rng.integers(2, 40)),
            )
            info = mutual_information(post, ModelParams(0.5), rng_seed=int(rng.integers(2**31))).info
            assert info >= -1e-12
            assert info <= math.log(math.factorial(k - 1)) + 1e-9

    def test_positive_at_moderate_variance(self):
        post0 = DistancePosterior(QueryDistances(0, {1: 1.0, 2: 2.0}), 0.0, 2000)
        post1 = DistancePosterior(QueryDistances(0, {1: 1.0, 2: 2.0}), 0.5, 2000)
        params = ModelParams(0.5)
        assert mutual_information(post0, params, rng_seed=5).info == 0.0
        assert mutual_information(post1, params, rng_seed=5).info > 0.0

    def test_body_order_invariance(self):
        params = ModelParams(0.5)
        a = DistancePosterior(QueryDistances(0, {3: 0.7, 8: 1.4, 5: 2.1}), 0.4, 400)
        b = DistancePosterior(QueryDistances(0, {5: 2.1, 3: 0.7, 8: 1.4}), 0.4, 400)
        info_a = mutual_information(a, params, rng_seed=21).info
        info_b = mutual_information(b, params, rng_seed=21).info
        assert abs(info_a - info_b) < 1e-9

    def test_matches_quadrature_oracle(self):
        # Acceptance: within 0.01 nats of Gauss-Hermite on 20 fixed instances.
        rng = np.random.default_rng(99)
        params = ModelParams(0.5)
        for _ in range(20):
            mean1 = float(rng.uniform(0.2, 3.0))
            mean2 = float(rng.uniform(0.2, 3.0))
            sigma2 = float(rng.uniform(0.05, 1.0))
            post = DistancePosterior(
                QueryDistances(0, {1: mean1, 2: mean2}), sigma2, 10_000
            )
            estimate = mutual_information(post, params, rng_seed=int(rng.integers(2**31))).info
            exact = quadrature_mi_triplet(mean1, mean2, sigma2, params.mu)
            assert estimate == pytest.approx(exact, abs=0.01)

    def test_capacity_error_before_sampling(self):
        post = DistancePosterior(
            QueryDistances(0, {i: 1.0 for i in range(1, 9)}), 0.5, 10
        )
        with pytest.raises(CapacityError):
            mutual_information(post, ModelParams(0.5), rng_seed=0)

    def test_score_carries_body(self):
        post = DistancePosterior(QueryDistances(0, {4: 1.0, 2: 2.0}), 0.0, 10)
        score = mutual_information(post, ModelParams(0.5), rng_seed=0)
        assert score == CandidateScore(body=(4, 2), info=0.0)

"""Active similarity learning from ranked tuple queries.

Learns a unit-diagonal PSD similarity matrix over a catalog of items from
rankings of query tuples, choosing each query to maximize the estimated
mutual information between its response and the embedding. Includes
simulated oracles and an experiment CLI for benchmarking, and an HTTP
session service for collecting rankings from human labelers.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .core import (
    ItemCatalog,
    ItemId,
    RankingResponse,
    ResponseLog,
    Triplet,
    TupleQuery,
    constituent_triplets,
)
from .embedding import (
    FitResult,
    MdsConfig,
    distances_from_similarity,
    empirical_log_loss,
    fit_mds,
    loss_gradient,
    project_to_elliptope,
    recover_coordinates,
)
from .infogain import (
    CandidateScore,
    DistancePosterior,
    embedding_variance,
    mutual_information,
    ranking_entropy,
    sample_distances,
)
from .metrics import (
    MetricSample,
    coherence,
    holdout_accuracy,
    kendall_tau,
    mean_tau_vs_truth,
    normalized_query_count,
)
from .models import ModelParams, QueryDistances, ranking_pmf, ranking_weight, triplet_prob
from .oracles import GroundTruth, Oracle, OracleConfig, make_ground_truth
from .selection import (
    EmbeddingState,
    ExperimentResult,
    MetricsConfig,
    RoundReport,
    SelectionConfig,
    burn_in_queries,
    propose_candidates,
    run_experiment,
    select_query,
)

__version__ = "0.1.0"

__all__ = [
    "CandidateScore",
    "DistancePosterior",
    "EmbeddingState",
    "ExperimentResult",
    "FitResult",
    "GroundTruth",
    "ItemCatalog",
    "ItemId",
    "KERNEL_BACKEND",
    "MdsConfig",
    "MetricSample",
    "MetricsConfig",
    "ModelParams",
    "Oracle",
    "OracleConfig",
    "QueryDistances",
    "RankingResponse",
    "ResponseLog",
    "RoundReport",
    "SelectionConfig",
    "Triplet",
    "TupleQuery",
    "burn_in_queries",
    "coherence",
    "constituent_triplets",
    "distances_from_similarity",
    "embedding_variance",
    "empirical_log_loss",
    "fit_mds",
    "holdout_accuracy",
    "kendall_tau",
    "loss_gradient",
    "make_ground_truth",
    "mean_tau_vs_truth",
    "mutual_information",
    "normalized_query_count",
    "project_to_elliptope",
    "propose_candidates",
    "ranking_entropy",
    "ranking_pmf",
    "ranking_weight",
    "recover_coordinates",
    "run_experiment",
    "sample_distances",
    "select_query",
    "triplet_prob",
]

"""Experiment specs, runners and output files for the simulated studies.

A spec is a JSON document naming a dataset (synthetic cloud or catalog
file), an oracle, selection settings, a metric schedule and a replicate
count. Running it writes, per replicate, a metrics CSV, a per-round report
CSV, the response journal and a final embedding snapshot, plus a manifest
with every seed resolved; re-running the manifest reproduces the outputs.

The ``compare`` step aligns finished runs on their shared normalized query
counts and tabulates mean and standard error per strategy.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import ItemCatalog, load_catalog, load_triplets
from .embedding import MdsConfig, save_snapshot
from .errors import SpecError
from .metrics import MetricSample, read_metrics_csv, write_metrics_csv
from .models import ModelParams
from .oracles import ORACLE_KINDS, GroundTruth, Oracle, OracleConfig, make_ground_truth
from .selection import (
    STRATEGIES,
    ExperimentResult,
    MetricsConfig,
    SelectionConfig,
    run_experiment,
)
from .seeding import TAG_DATASET, TAG_ORACLE, TAG_REPLICATE, derive_seed

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "tuplelearn-manifest-v1"
ROUND_CSV_COLUMNS = ("round", "head", "body", "info", "loss", "selection_ms", "refit_ms")
WORKERS_ENV = "TUPLELEARN_WORKERS"


@dataclass(frozen=True)
class DatasetSpec:
    """Synthetic cloud (n_items/dim) or a catalog file with planted coordinates."""

    n_items: int | None = None
    dim: int = 2
    seed: int = 0
    catalog_path: str | None = None
    holdout_path: str | None = None

    @property
    def synthetic(self) -> bool:
        return self.catalog_path is None


@dataclass(frozen=True)
class ReplicateSeeds:
    replicate: int
    dataset_seed: int
    oracle_seed: int
    selection_seed: int


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: DatasetSpec
    oracle: OracleConfig
    selection: SelectionConfig
    metrics_every: int = 1
    include_coherence: bool = True
    replicates: int = 1
    output_dir: str = "runs/experiment"
    replicate_seeds: tuple[ReplicateSeeds, ...] | None = None

    def resolved_replicates(self) -> tuple[ReplicateSeeds, ...]:
        """Explicit per-replicate seeds; derived from base seeds when absent."""
        if self.replicate_seeds is not None:
            return self.replicate_seeds
        return tuple(
            ReplicateSeeds(
                replicate=rep,
                dataset_seed=derive_seed(self.dataset.seed, TAG_DATASET, rep),
                oracle_seed=derive_seed(self.oracle.seed, TAG_ORACLE, rep),
                selection_seed=derive_seed(self.selection.seed, TAG_REPLICATE, rep),
            )
            for rep in range(self.replicates)
        )

    def label(self) -> str:
        return f"{self.selection.strategy}-{self.selection.tuple_size}"


def _require(mapping: dict, field: str, ctx: str):
    if field not in mapping:
        raise SpecError(f"{ctx}.{field}", "missing required field")
    return mapping[field]


def _get_int(mapping: dict, field: str, ctx: str, default=None, minimum=None):
    value = mapping.get(field, default)
    if value is None:
        return None
    if not isinstance(value, int) or isinstance(value, bool):
        raise SpecError(f"{ctx}.{field}", f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise SpecError(f"{ctx}.{field}", f"must be at least {minimum}, got {value}")
    return value


def _get_num(mapping: dict, field: str, ctx: str, default=None):
    value = mapping.get(field, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"{ctx}.{field}", f"expected a number, got {value!r}")
    return float(value)


def parse_spec(doc: dict) -> ExperimentSpec:
    """Validate a spec/manifest dictionary, raising SpecError with a field path."""
    if not isinstance(doc, dict):
        raise SpecError("$", "spec must be a JSON object")

    ds_doc = _require(doc, "dataset", "$")
    if not isinstance(ds_doc, dict):
        raise SpecError("$.dataset", "must be an object")
    if ("n_items" in ds_doc) == ("catalog" in ds_doc):
        raise SpecError("$.dataset", "exactly one of n_items (synthetic) or catalog required")
    if "catalog" in ds_doc:
        dataset = DatasetSpec(
            catalog_path=str(ds_doc["catalog"]),
            holdout_path=str(ds_doc["holdout"]) if ds_doc.get("holdout") else None,
            dim=_get_int(ds_doc, "dim", "$.dataset", default=2, minimum=1),
            seed=_get_int(ds_doc, "seed", "$.dataset", default=0),
        )
    else:
        dataset = DatasetSpec(
            n_items=_get_int(ds_doc, "n_items", "$.dataset", minimum=3),
            dim=_get_int(ds_doc, "dim", "$.dataset", default=2, minimum=1),
            seed=_get_int(ds_doc, "seed", "$.dataset", default=0),
        )

    orc_doc = doc.get("oracle", {})
    if not isinstance(orc_doc, dict):
        raise SpecError("$.oracle", "must be an object")
    kind = orc_doc.get("kind", "deterministic")
    if kind not in ORACLE_KINDS:
        raise SpecError("$.oracle.kind", f"expected one of {ORACLE_KINDS}, got {kind!r}")
    try:
        oracle = OracleConfig(
            kind=kind,
            pl_mu=_get_num(orc_doc, "pl_mu", "$.oracle", default=0.5),
            gaussian_sigma=_get_num(orc_doc, "gaussian_sigma", "$.oracle"),
            invert_prob=_get_num(orc_doc, "invert_prob", "$.oracle", default=0.0),
            seed=_get_int(orc_doc, "seed", "$.oracle", default=0),
        )
    except ValueError as exc:
        raise SpecError("$.oracle", str(exc))

    sel_doc = doc.get("selection", {})
    if not isinstance(sel_doc, dict):
        raise SpecError("$.selection", "must be an object")
    mds_doc = sel_doc.get("mds", {})
    if not isinstance(mds_doc, dict):
        raise SpecError("$.selection.mds", "must be an object")
    try:
        params = ModelParams(mu=_get_num(sel_doc, "mu", "$.selection", default=0.5))
        mds = MdsConfig(
            eta=_get_num(mds_doc, "eta", "$.selection.mds"),
            max_iters=_get_int(mds_doc, "max_iters", "$.selection.mds", default=1000, minimum=1),
            loss_tol=_get_num(mds_doc, "loss_tol", "$.selection.mds", default=1e-6),
            projection_tol=_get_num(mds_doc, "projection_tol", "$.selection.mds", default=1e-7),
            projection_max_rounds=_get_int(
                mds_doc, "projection_max_rounds", "$.selection.mds", default=500, minimum=1
            ),
            seed=_get_int(mds_doc, "seed", "$.selection.mds", default=0),
            params=params,
        )
        strategy = sel_doc.get("strategy", "info_tuple")
        if strategy not in STRATEGIES:
            raise SpecError(
                "$.selection.strategy", f"expected one of {STRATEGIES}, got {strategy!r}"
            )
        selection = SelectionConfig(
            tuple_size=_get_int(sel_doc, "tuple_size", "$.selection", default=3, minimum=3),
            burn_in=_get_int(sel_doc, "burn_in", "$.selection", default=5, minimum=0),
            horizon=_get_int(sel_doc, "horizon", "$.selection", default=20, minimum=0),
            candidates_per_head=_get_int(
                sel_doc, "candidates_per_head", "$.selection", minimum=1
            ),
            n_f=_get_int(sel_doc, "n_f", "$.selection", minimum=1),
            params=params,
            mds=mds,
            strategy=strategy,
            seed=_get_int(sel_doc, "seed", "$.selection", default=0),
            refit_max_iters=_get_int(
                sel_doc, "refit_max_iters", "$.selection", default=200, minimum=1
            ),
        )
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError("$.selection", str(exc))

    met_doc = doc.get("metrics", {})
    if not isinstance(met_doc, dict):
        raise SpecError("$.metrics", "must be an object")

    reps_doc = doc.get("replicate_seeds")
    replicate_seeds = None
    if reps_doc is not None:
        replicate_seeds = tuple(
            ReplicateSeeds(
                replicate=_get_int(r, "replicate", "$.replicate_seeds[]"),
                dataset_seed=_get_int(r, "dataset_seed", "$.replicate_seeds[]"),
                oracle_seed=_get_int(r, "oracle_seed", "$.replicate_seeds[]"),
                selection_seed=_get_int(r, "selection_seed", "$.replicate_seeds[]"),
            )
            for r in reps_doc
        )

    spec = ExperimentSpec(
        dataset=dataset,
        oracle=oracle,
        selection=selection,
        metrics_every=_get_int(met_doc, "every", "$.metrics", default=1, minimum=1),
        include_coherence=bool(met_doc.get("coherence", True)),
        replicates=_get_int(doc, "replicates", "$", default=1, minimum=1),
        output_dir=str(doc.get("output_dir", "runs/experiment")),
        replicate_seeds=replicate_seeds,
    )
    _validate_scale(spec)
    return spec


def _validate_scale(spec: ExperimentSpec) -> None:
    if spec.dataset.synthetic:
        n_items = spec.dataset.n_items
        if n_items is None:
            raise SpecError("$.dataset.n_items", "missing for synthetic dataset")
        try:
            spec.selection.validate_for_items(n_items)
        except ValueError as exc:
            raise SpecError("$.selection.tuple_size", str(exc))


def load_spec(path: str | Path) -> ExperimentSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}:{exc.lineno}", exc.msg)
    return parse_spec(doc)


def spec_to_dict(spec: ExperimentSpec, resolved: bool = True) -> dict:
    ds: dict = {"dim": spec.dataset.dim, "seed": spec.dataset.seed}
    if spec.dataset.synthetic:
        ds["n_items"] = spec.dataset.n_items
    else:
        ds["catalog"] = spec.dataset.catalog_path
        if spec.dataset.holdout_path:
            ds["holdout"] = spec.dataset.holdout_path
    doc = {
        "format": MANIFEST_FORMAT,
        "dataset": ds,
        "oracle": {
            "kind": spec.oracle.kind,
            "pl_mu": spec.oracle.pl_mu,
            "gaussian_sigma": spec.oracle.gaussian_sigma,
            "invert_prob": spec.oracle.invert_prob,
            "seed": spec.oracle.seed,
        },
        "selection": {
            "tuple_size": spec.selection.tuple_size,
            "burn_in": spec.selection.burn_in,
            "horizon": spec.selection.horizon,
            "candidates_per_head": spec.selection.candidates_per_head,
            "n_f": spec.selection.n_f,
            "mu": spec.selection.params.mu,
            "strategy": spec.selection.strategy,
            "seed": spec.selection.seed,
            "refit_max_iters": spec.selection.refit_max_iters,
            "mds": {
                "eta": spec.selection.mds.eta,
                "max_iters": spec.selection.mds.max_iters,
                "loss_tol": spec.selection.mds.loss_tol,
                "projection_tol": spec.selection.mds.projection_tol,
                "projection_max_rounds": spec.selection.mds.projection_max_rounds,
                "seed": spec.selection.mds.seed,
            },
        },
        "metrics": {"every": spec.metrics_every, "coherence": spec.include_coherence},
        "replicates": spec.replicates,
        "output_dir": spec.output_dir,
    }
    if resolved:
        doc["replicate_seeds"] = [
            {
                "replicate": r.replicate,
                "dataset_seed": r.dataset_seed,
                "oracle_seed": r.oracle_seed,
                "selection_seed": r.selection_seed,
            }
            for r in spec.resolved_replicates()
        ]
    return doc


def _build_world(
    spec: ExperimentSpec, seeds: ReplicateSeeds
) -> tuple[ItemCatalog, GroundTruth, MetricsConfig]:
    if spec.dataset.synthetic:
        catalog = ItemCatalog.synthetic(spec.dataset.n_items)
        holdout = None
    else:
        catalog = load_catalog(spec.dataset.catalog_path)
        holdout = (
            load_triplets(spec.dataset.holdout_path) if spec.dataset.holdout_path else None
        )
    gt = make_ground_truth(catalog.n_items, spec.dataset.dim, seeds.dataset_seed)
    metrics_cfg = MetricsConfig(
        every=spec.metrics_every,
        ground_truth=gt,
        holdout=holdout,
        include_coherence=spec.include_coherence,
    )
    return catalog, gt, metrics_cfg


def run_replicate(spec: ExperimentSpec, seeds: ReplicateSeeds) -> ExperimentResult:
    catalog, gt, metrics_cfg = _build_world(spec, seeds)
    oracle = Oracle(gt, replace(spec.oracle, seed=seeds.oracle_seed))
    cfg = replace(spec.selection, seed=seeds.selection_seed)
    return run_experiment(catalog, oracle, cfg, metrics_cfg)


def write_round_reports(result: ExperimentResult, path: str | Path) -> None:
    """One CSV row per (round, head); loss and refit time repeat across a round's rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ROUND_CSV_COLUMNS)
        for report in result.round_reports:
            for sel in report.selections:
                writer.writerow(
                    [
                        report.round_index,
                        sel.query.head,
                        "|".join(str(b) for b in sel.query.body),
                        repr(sel.score.info),
                        repr(report.refit_loss),
                        repr(sel.seconds * 1000.0),
                        repr(report.refit_seconds * 1000.0),
                    ]
                )


def write_responses(result: ExperimentResult, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in result.log:
            fh.write(
                json.dumps(
                    {
                        "head": r.query.head,
                        "body": list(r.query.body),
                        "ranking": list(r.ranking),
                        "timestamp": r.timestamp,
                        "source": r.source,
                    }
                )
                + "\n"
            )


def _replicate_dir(outdir: Path, rep: int) -> Path:
    return outdir / f"seed_{rep:02d}"


def _run_and_write(spec: ExperimentSpec, seeds: ReplicateSeeds, outdir: Path) -> None:
    result = run_replicate(spec, seeds)
    rep_dir = _replicate_dir(outdir, seeds.replicate)
    rep_dir.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(result.metric_samples, rep_dir / "metrics.csv")
    write_round_reports(result, rep_dir / "rounds.csv")
    write_responses(result, rep_dir / "responses.jsonl")
    trace = [r.refit_loss for r in result.round_reports]
    save_snapshot(
        rep_dir / "embedding.txt",
        result.state.k_hat,
        iterations=len(result.round_reports),
        loss=trace[-1] if trace else float("nan"),
    )


def _worker(args: tuple[dict, dict]) -> None:
    spec_doc, seed_doc = args
    spec = parse_spec(spec_doc)
    seeds = ReplicateSeeds(**seed_doc)
    _run_and_write(spec, seeds, Path(spec.output_dir))


def run_spec(spec: ExperimentSpec, output_dir: str | Path | None = None) -> Path:
    """Run every replicate and write outputs plus the resolved manifest.

    Replicates run in parallel when the TUPLELEARN_WORKERS environment
    variable asks for more than one process; outputs are identical either
    way.
    """
    outdir = Path(output_dir) if output_dir is not None else Path(spec.output_dir)
    spec = replace(
        spec,
        output_dir=str(outdir),
        replicate_seeds=spec.resolved_replicates(),
    )
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2)
        fh.write("\n")

    workers = int(os.environ.get(WORKERS_ENV, "1") or "1")
    reps = spec.resolved_replicates()
    if workers > 1 and len(reps) > 1:
        spec_doc = spec_to_dict(spec)
        jobs = [
            (spec_doc, {
                "replicate": r.replicate,
                "dataset_seed": r.dataset_seed,
                "oracle_seed": r.oracle_seed,
                "selection_seed": r.selection_seed,
            })
            for r in reps
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_worker, jobs))
    else:
        for seeds in reps:
            _run_and_write(spec, seeds, outdir)
    return outdir


@dataclass(frozen=True)
class ComparisonRow:
    normalized_count: int
    label: str
    metric: str
    mean: float
    stderr: float
    n_runs: int


_COMPARE_METRICS = ("mean_tau", "holdout_acc", "coherence")


def _metric_value(sample: MetricSample, metric: str) -> float | None:
    return {
        "mean_tau": sample.mean_tau,
        "holdout_acc": sample.holdout_accuracy,
        "coherence": sample.coherence,
    }[metric]


def compare_runs(run_dirs: list[str | Path]) -> list[ComparisonRow]:
    """Align runs on shared normalized query counts; mean and stderr per strategy.

    Every replicate of every run directory must expose the same metric
    schema; counts not present in all replicates are dropped (intersection
    grid).
    """
    if not run_dirs:
        raise SpecError("run_dirs", "at least one run directory required")
    runs: list[tuple[str, list[list[MetricSample]]]] = []
    labels_seen: dict[str, int] = {}
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        manifest_path = run_dir / MANIFEST_NAME
        if not manifest_path.exists():
            raise SpecError(str(manifest_path), "missing manifest")
        spec = load_spec(manifest_path)
        label = spec.label()
        if label in labels_seen:
            labels_seen[label] += 1
            label = f"{label}#{labels_seen[label]}"
        else:
            labels_seen[label] = 1
        replicates = []
        for seeds in spec.resolved_replicates():
            metrics_path = _replicate_dir(run_dir, seeds.replicate) / "metrics.csv"
            if not metrics_path.exists():
                raise SpecError(str(metrics_path), "missing metrics file")
            replicates.append(read_metrics_csv(metrics_path))
        runs.append((label, replicates))

    grids = [
        {s.normalized_query_count for s in rep}
        for _, replicates in runs
        for rep in replicates
    ]
    grid = sorted(set.intersection(*grids)) if grids else []
    if not grid:
        raise SpecError("normalized_count", "runs share no normalized query counts")

    available = {
        metric
        for metric in _COMPARE_METRICS
        if all(
            all(
                any(
                    s.normalized_query_count == g and _metric_value(s, metric) is not None
                    for s in rep
                )
                for g in grid
            )
            for _, replicates in runs
            for rep in replicates
        )
    }
    if not available:
        raise SpecError("metrics", "runs share no populated metric columns")

    rows: list[ComparisonRow] = []
    for count in grid:
        for label, replicates in runs:
            for metric in _COMPARE_METRICS:
                if metric not in available:
                    continue
                values = []
                for rep in replicates:
                    sample = next(s for s in rep if s.normalized_query_count == count)
                    values.append(_metric_value(sample, metric))
                arr = np.asarray(values, dtype=np.float64)
                stderr = (
                    float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
                )
                rows.append(
                    ComparisonRow(count, label, metric, float(arr.mean()), stderr, len(arr))
                )
    return rows


def write_comparison(rows: list[ComparisonRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("normalized_count", "label", "metric", "mean", "stderr", "n_runs"))
        for row in rows:
            writer.writerow(
                [row.normalized_count, row.label, row.metric,
                 repr(row.mean), repr(row.stderr), row.n_runs]
            )

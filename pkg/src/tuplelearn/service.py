"""Human-in-the-loop labeling service.

Each session walks one labeler through burn-in triplets and then adaptively
selected tuples, one outstanding query at a time, with presentation order
shuffled per issue. Queries go out in batches (default 25): the last slot
of a batch repeats an earlier in-batch query, re-shuffled, and a batch
whose repeat is answered inconsistently is excluded from fitting wholesale,
with its lost queries reissued from fresh candidate pools. Every issued
query and response is appended to a per-session JSONL journal from which an
equivalent session can be rebuilt after a crash.

The embedding is refit once per completed round of responses, off the
request path unless the session is configured synchronous. Responses enter
a fit only after their batch has resolved valid, so no response from an
invalid batch ever reaches the fitter.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from pydantic import BaseModel

from .core import (
    SOURCE_HUMAN,
    ItemCatalog,
    RankingResponse,
    ResponseLog,
    Triplet,
    TupleQuery,
    load_catalog,
    load_triplets,
)
from .embedding import fit_mds, recover_coordinates, save_snapshot
from .errors import SpecError
from .metrics import MetricSample, coherence, holdout_accuracy, normalized_query_count
from .models import ModelParams
from .seeding import TAG_BURN_IN, TAG_REPEAT, TAG_SELECT, TAG_SHUFFLE, derive_seed, rng_from
from .selection import EmbeddingState, SelectionConfig, burn_in_queries, select_query

JOURNAL_SUFFIX = ".journal.jsonl"
SNAPSHOT_SUFFIX = ".snapshot.txt"


class SessionGone(Exception):
    """The session has no further queries to issue."""


class SessionNotReady(Exception):
    """Selection is still running in the background; retry shortly."""


@dataclass(frozen=True)
class SessionSettings:
    """Per-session behavior; ``selection.horizon`` counts adaptive rounds."""

    selection: SelectionConfig
    batch_size: int = 25
    snapshot_dim: int = 2
    synchronous: bool = True

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.snapshot_dim < 1:
            raise ValueError("snapshot_dim must be at least 1")


@dataclass
class _Issued:
    query_id: str
    query: TupleQuery
    presented: tuple[int, ...]
    batch: int
    position: int
    repeat_of: str | None
    # ("burn", index, attempt) or ("round", round, head, attempt); attempts
    # above 0 are replacements for queries lost to invalid batches.
    origin: tuple


def _origin_key(origin: tuple) -> tuple:
    return origin[:-1]


@dataclass
class _Batch:
    index: int
    fresh_ids: list[str] = field(default_factory=list)
    repeat_id: str | None = None
    valid: bool | None = None  # None until the repeat is answered


@dataclass
class _Answer:
    query_id: str
    ranking: tuple[int, ...]
    elapsed_seconds: float
    timestamp: float


class LabelSession:
    """State machine for one labeler; callers must hold ``self.lock``."""

    def __init__(
        self,
        session_id: str,
        catalog: ItemCatalog,
        settings: SessionSettings,
        journal_path: Path,
        snapshot_path: Path,
        holdout: list[Triplet] | None = None,
        preload: ResponseLog | None = None,
        _replay: bool = False,
    ):
        settings.selection.validate_for_items(catalog.n_items)
        self.session_id = session_id
        self.catalog = catalog
        self.settings = settings
        self.journal_path = journal_path
        self.snapshot_path = snapshot_path
        self.holdout = holdout
        self.preload = preload or ResponseLog()
        self.lock = threading.RLock()
        self._advanced = threading.Condition(self.lock)

        self.issued: dict[str, _Issued] = {}
        self.answers: dict[str, _Answer] = {}
        self.issue_order: list[str] = []
        self.batches: dict[int, _Batch] = {}
        self.outstanding: str | None = None
        self.metric_history: list[MetricSample] = []
        self._plan: deque[tuple[tuple, TupleQuery]] = deque()
        self._phase = 0  # 0 = burn-in, then adaptive rounds 1..horizon
        self._pending: set[tuple] = set()  # fresh origins not yet answered
        self._advancing = False
        self.exhausted = False

        cfg = settings.selection
        self._burn_queries = (
            burn_in_queries(catalog.n_items, cfg, derive_seed(cfg.seed, TAG_BURN_IN))
            if cfg.burn_in > 0
            else []
        )
        self.k_hat = fit_mds(self.preload, catalog.n_items, cfg.mds).matrix
        if not _replay:
            self._journal_write(
                {
                    "type": "session",
                    "session_id": session_id,
                    "n_items": catalog.n_items,
                    "settings": settings_to_dict(settings),
                    "created": time.time(),
                }
            )
            self._plan_phase()

    # ----- planning -----------------------------------------------------

    def _fresh_origins_for_phase(self, phase: int) -> list[tuple]:
        if phase == 0:
            return [("burn", idx, 0) for idx in range(len(self._burn_queries))]
        if phase > self.settings.selection.horizon:
            return []
        return [("round", phase, head, 0) for head in range(self.catalog.n_items)]

    def _materialize(self, origin: tuple) -> TupleQuery:
        """The deterministic query for an origin, given the current embedding."""
        cfg = self.settings.selection
        if origin[0] == "burn":
            _kind, idx, attempt = origin
            if attempt == 0:
                return self._burn_queries[idx]
            head = self._burn_queries[idx].head
            pool = [i for i in range(self.catalog.n_items) if i != head]
            rng = rng_from(cfg.seed, TAG_BURN_IN, idx, attempt)
            body = tuple(sorted(int(b) for b in rng.choice(pool, size=2, replace=False)))
            return TupleQuery(head, body)
        _kind, rnd, head, attempt = origin
        state = EmbeddingState.from_similarity(self.k_hat)
        query, _score = select_query(
            head, state, cfg, derive_seed(cfg.seed, TAG_SELECT, rnd, head, attempt)
        )
        return query

    def _plan_phase(self) -> None:
        if self._phase == 0 and not self._burn_queries:
            self._phase = 1
        for origin in self._fresh_origins_for_phase(self._phase):
            self._plan.append((origin, self._materialize(origin)))
            self._pending.add(origin)

    # ----- issuing --------------------------------------------------------

    def _current_batch(self) -> _Batch:
        index = len(self.issue_order) // self.settings.batch_size
        return self.batches.setdefault(index, _Batch(index))

    def next_query(self) -> dict:
        """The outstanding query, or the next one from the repeat slot or plan."""
        if self.outstanding is not None:
            return self._query_payload(self.issued[self.outstanding])
        if self.settings.synchronous:
            self._advance()

        batch = self._current_batch()
        position = len(self.issue_order) % self.settings.batch_size
        # The repeat goes out as the batch's last slot, or early whenever the
        # plan runs dry, so the batch can resolve before the next refit.
        wants_repeat = position == self.settings.batch_size - 1 or not self._plan
        if wants_repeat and batch.fresh_ids and batch.repeat_id is None:
            rng = rng_from(self.settings.selection.seed, TAG_REPEAT, batch.index)
            original_id = batch.fresh_ids[int(rng.integers(len(batch.fresh_ids)))]
            original = self.issued[original_id]
            return self._issue(original.query, original.origin, repeat_of=original_id)
        if self._plan:
            origin, query = self._plan.popleft()
            return self._issue(query, origin, repeat_of=None)
        if self._phase_answered() and self._current_batch_resolved() and self._rounds_done():
            self.exhausted = True
            raise SessionGone(self.session_id)
        raise SessionNotReady(self.session_id)

    def _issue(self, query: TupleQuery, origin: tuple, repeat_of: str | None) -> dict:
        counter = len(self.issue_order)
        query_id = f"q{counter:06d}"
        shuffle = rng_from(self.settings.selection.seed, TAG_SHUFFLE, counter)
        presented = tuple(int(b) for b in shuffle.permutation(query.body))
        batch = self._current_batch()
        issued = _Issued(
            query_id=query_id,
            query=query,
            presented=presented,
            batch=batch.index,
            position=counter % self.settings.batch_size,
            repeat_of=repeat_of,
            origin=origin,
        )
        self.issued[query_id] = issued
        self.issue_order.append(query_id)
        if repeat_of is None:
            batch.fresh_ids.append(query_id)
        else:
            batch.repeat_id = query_id
        self.outstanding = query_id
        self._journal_write(
            {
                "type": "issued",
                "query_id": query_id,
                "head": query.head,
                "body": list(query.body),
                "presented": list(presented),
                "batch": batch.index,
                "position": issued.position,
                "repeat_of": repeat_of,
                "origin": list(origin),
            }
        )
        return self._query_payload(issued)

    def _query_payload(self, issued: _Issued) -> dict:
        return {
            "query_id": issued.query_id,
            "head": {
                "id": issued.query.head,
                "payload": self.catalog.payload(issued.query.head),
            },
            "body": [
                {"id": item, "payload": self.catalog.payload(item)}
                for item in issued.presented
            ],
            "batch_index": issued.batch,
            "batch_position": issued.position + 1,
            "batch_size": self.settings.batch_size,
        }

    # ----- responses --------------------------------------------------------

    def submit_ranking(self, query_id: str, ranking: list[int], elapsed_seconds: float) -> dict:
        if query_id not in self.issued:
            raise KeyError(query_id)
        issued = self.issued[query_id]
        previous = self.answers.get(query_id)
        if previous is not None:
            if tuple(int(r) for r in ranking) == previous.ranking:
                return {"accepted": True, "duplicate": True, "query_id": query_id}
            raise ValueError(f"query {query_id} was already answered differently")
        if sorted(ranking) != sorted(issued.query.body):
            raise ValueError(
                f"ranking {list(ranking)} is not a permutation of the issued body "
                f"{sorted(issued.query.body)}"
            )
        answer = _Answer(
            query_id, tuple(int(r) for r in ranking), float(elapsed_seconds), time.time()
        )
        self.answers[query_id] = answer
        if self.outstanding == query_id:
            self.outstanding = None
        if issued.repeat_of is None:
            self._pending.discard(issued.origin)
        self._journal_write(
            {
                "type": "response",
                "query_id": query_id,
                "ranking": list(answer.ranking),
                "elapsed_seconds": answer.elapsed_seconds,
                "timestamp": answer.timestamp,
            }
        )
        batch_valid = self._maybe_resolve_batch(issued)
        self._schedule_advance()
        return {
            "accepted": True,
            "query_id": query_id,
            "repeat": issued.repeat_of is not None,
            "batch_index": issued.batch,
            "batch_valid": batch_valid,
        }

    def _maybe_resolve_batch(self, issued: _Issued) -> bool | None:
        """A batch resolves when its repeat is answered; invalid ones reissue."""
        if issued.repeat_of is None:
            return None
        batch = self.batches[issued.batch]
        original = self.answers[issued.repeat_of]
        batch.valid = original.ranking == self.answers[issued.query_id].ranking
        if not batch.valid:
            for fresh_id in batch.fresh_ids:
                self._reissue(self.issued[fresh_id].origin)
        return batch.valid

    def _reissue(self, origin: tuple) -> None:
        next_origin = (*_origin_key(origin), origin[-1] + 1)
        self._plan.appendleft((next_origin, self._materialize(next_origin)))
        self._pending.add(next_origin)

    # ----- fitting ------------------------------------------------------------

    def _phase_answered(self) -> bool:
        return not self._pending and self.outstanding is None

    def _current_batch_resolved(self) -> bool:
        # Only the newest batch can still be unresolved; older ones got their
        # repeat at the last slot.
        batch = self.batches.get(len(self.issue_order) // self.settings.batch_size)
        return batch is None or not batch.fresh_ids or batch.valid is not None

    def _rounds_done(self) -> bool:
        return self._phase > self.settings.selection.horizon

    def fit_input(self) -> ResponseLog:
        """Responses eligible for fitting: preload plus resolved-valid batches."""
        log = ResponseLog(list(self.preload))
        for query_id in self.issue_order:
            answer = self.answers.get(query_id)
            if answer is None:
                continue
            if self.batches[self.issued[query_id].batch].valid:
                log.append(
                    RankingResponse(
                        self.issued[query_id].query,
                        answer.ranking,
                        answer.timestamp,
                        SOURCE_HUMAN,
                    )
                )
        return log

    def _schedule_advance(self) -> None:
        if self.settings.synchronous:
            self._advance()
            return
        if not self._advancing:
            self._advancing = True
            threading.Thread(target=self._advance_in_thread, daemon=True).start()

    def _advance_in_thread(self) -> None:
        with self.lock:
            try:
                self._advance()
            finally:
                self._advancing = False
                self._advanced.notify_all()

    def wait_ready(self, timeout: float = 30.0) -> None:
        deadline = time.monotonic() + timeout
        while self._advancing:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return
            self._advanced.wait(timeout=remaining)

    def _advance(self) -> None:
        """Refit and plan the next phase once the current one is fully answered.

        Waits for the in-progress batch to resolve (its repeat is issued
        early when the plan runs dry), so each refit sees every response it
        is entitled to.
        """
        while (
            self._phase_answered()
            and not self._plan
            and self._current_batch_resolved()
            and not self._rounds_done()
        ):
            self._refit()
            self._phase += 1
            self._plan_phase()

    def _refit(self) -> None:
        cfg = self.settings.selection
        log = self.fit_input()
        mds = replace(cfg.mds, max_iters=cfg.refit_max_iters)
        self.k_hat = fit_mds(log, self.catalog.n_items, mds, warm_start=self.k_hat).matrix
        self.metric_history.append(
            MetricSample(
                round_index=self._phase,
                normalized_query_count=normalized_query_count(log),
                holdout_accuracy=(
                    holdout_accuracy(self.k_hat, self.holdout) if self.holdout else None
                ),
                coherence=coherence(self.k_hat, log.responses) if len(log) else None,
                cumulative_label_seconds=sum(
                    a.elapsed_seconds for a in self.answers.values()
                ),
            )
        )
        save_snapshot(
            self.snapshot_path,
            self.k_hat,
            iterations=len(self.metric_history),
            loss=float("nan"),
        )

    # ----- snapshotting ----------------------------------------------------------

    def validity_stats(self) -> dict:
        resolved = [b for b in self.batches.values() if b.valid is not None]
        return {
            "batches_started": len(self.batches),
            "batches_resolved": len(resolved),
            "batches_valid": sum(1 for b in resolved if b.valid),
            "batches_invalid": sum(1 for b in resolved if not b.valid),
            "responses_total": len(self.answers),
            "responses_in_fit": len(self.fit_input()) - len(self.preload),
        }

    def snapshot(self) -> dict:
        coords = recover_coordinates(self.k_hat, self.settings.snapshot_dim)
        return {
            "session_id": self.session_id,
            "n_items": self.catalog.n_items,
            "dim": self.settings.snapshot_dim,
            "coordinates": [[float(x) for x in row] for row in coords.T],
            "metric_history": [
                {
                    "round": s.round_index,
                    "normalized_count": s.normalized_query_count,
                    "holdout_acc": s.holdout_accuracy,
                    "coherence": s.coherence,
                    "label_seconds": s.cumulative_label_seconds,
                }
                for s in self.metric_history
            ],
            "validity": self.validity_stats(),
            "exhausted": self.exhausted,
        }

    # ----- persistence --------------------------------------------------------------

    def _journal_write(self, record: dict) -> None:
        with open(self.journal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")

    def journal_text(self) -> str:
        if not self.journal_path.exists():
            return ""
        return self.journal_path.read_text(encoding="utf-8")


def settings_to_dict(settings: SessionSettings) -> dict:
    cfg = settings.selection
    return {
        "tuple_size": cfg.tuple_size,
        "burn_in": cfg.burn_in,
        "horizon": cfg.horizon,
        "candidates_per_head": cfg.candidates_per_head,
        "n_f": cfg.n_f,
        "mu": cfg.params.mu,
        "strategy": cfg.strategy,
        "seed": cfg.seed,
        "refit_max_iters": cfg.refit_max_iters,
        "batch_size": settings.batch_size,
        "snapshot_dim": settings.snapshot_dim,
        "synchronous": settings.synchronous,
    }


def settings_from_dict(doc: dict) -> SessionSettings:
    cfg = SelectionConfig(
        tuple_size=int(doc.get("tuple_size", 3)),
        burn_in=int(doc.get("burn_in", 5)),
        horizon=int(doc.get("horizon", 20)),
        candidates_per_head=doc.get("candidates_per_head"),
        n_f=doc.get("n_f"),
        params=ModelParams(mu=float(doc.get("mu", 0.5))),
        strategy=doc.get("strategy", "info_tuple"),
        seed=int(doc.get("seed", 0)),
        refit_max_iters=int(doc.get("refit_max_iters", 200)),
    )
    return SessionSettings(
        selection=cfg,
        batch_size=int(doc.get("batch_size", 25)),
        snapshot_dim=int(doc.get("snapshot_dim", 2)),
        synchronous=bool(doc.get("synchronous", True)),
    )


def replay_session(
    journal_path: Path,
    catalog: ItemCatalog,
    snapshot_path: Path | None = None,
    holdout: list[Triplet] | None = None,
    preload: ResponseLog | None = None,
) -> LabelSession:
    """Rebuild an equivalent session from its journal.

    The issued/answered record, batch validity flags and valid-response set
    are reconstructed exactly. The embedding is refit from scratch on that
    set, so queries selected after the restart may differ from what an
    uninterrupted session would have asked; origins that were issued (or
    lost to invalid batches) and still owe an answer are planned again.
    """
    records = [
        json.loads(line)
        for line in journal_path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    if not records or records[0]["type"] != "session":
        raise ValueError(f"{journal_path}: journal must start with a session record")
    header = records[0]
    settings = settings_from_dict(header["settings"])
    session = LabelSession(
        session_id=header["session_id"],
        catalog=catalog,
        settings=settings,
        journal_path=journal_path,
        snapshot_path=snapshot_path or Path(str(journal_path) + SNAPSHOT_SUFFIX),
        holdout=holdout,
        preload=preload,
        _replay=True,
    )
    with session.lock:
        for record in records[1:]:
            if record["type"] == "issued":
                issued = _Issued(
                    query_id=record["query_id"],
                    query=TupleQuery(record["head"], tuple(record["body"])),
                    presented=tuple(record["presented"]),
                    batch=record["batch"],
                    position=record["position"],
                    repeat_of=record.get("repeat_of"),
                    origin=tuple(record["origin"]),
                )
                session.issued[issued.query_id] = issued
                session.issue_order.append(issued.query_id)
                batch = session.batches.setdefault(issued.batch, _Batch(issued.batch))
                if issued.repeat_of is None:
                    batch.fresh_ids.append(issued.query_id)
                    if issued.origin[0] == "round":
                        session._phase = max(session._phase, issued.origin[1])
                else:
                    batch.repeat_id = issued.query_id
                session.outstanding = issued.query_id
            elif record["type"] == "response":
                query_id = record["query_id"]
                issued = session.issued[query_id]
                session.answers[query_id] = _Answer(
                    query_id=query_id,
                    ranking=tuple(record["ranking"]),
                    elapsed_seconds=float(record["elapsed_seconds"]),
                    timestamp=float(record["timestamp"]),
                )
                if session.outstanding == query_id:
                    session.outstanding = None
                if issued.repeat_of is not None:
                    batch = session.batches[issued.batch]
                    original = session.answers[issued.repeat_of]
                    batch.valid = original.ranking == session.answers[query_id].ranking

        # Refit on the reconstructed valid set before regenerating the plan.
        cfg = settings.selection
        mds = replace(cfg.mds, max_iters=cfg.refit_max_iters)
        session.k_hat = fit_mds(session.fit_input(), catalog.n_items, mds).matrix

        # An origin key owes an answer unless its highest-attempt query was
        # answered inside a batch that is not known-invalid.
        attempts: dict[tuple, tuple] = {}
        for query_id in session.issue_order:
            issued = session.issued[query_id]
            if issued.repeat_of is not None:
                continue
            key = _origin_key(issued.origin)
            if key not in attempts or issued.origin[-1] > attempts[key][-1]:
                attempts[key] = issued.origin
        keys_owed: list[tuple] = []
        for key in [_origin_key(o) for o in session._fresh_origins_for_phase(session._phase)]:
            if key not in attempts:
                keys_owed.append((*key, 0))
        for key, origin in attempts.items():
            query_id = next(
                qid
                for qid in session.issue_order
                if session.issued[qid].repeat_of is None
                and session.issued[qid].origin == origin
            )
            if query_id not in session.answers:
                if session.outstanding != query_id:
                    keys_owed.append(origin)  # issued pre-crash, answer lost
            elif session.batches[session.issued[query_id].batch].valid is False:
                keys_owed.append((*key, origin[-1] + 1))
        for origin in keys_owed:
            session._plan.append((origin, session._materialize(origin)))
        session._pending = {o for o, _q in session._plan}
        if session.outstanding is not None:
            out = session.issued[session.outstanding]
            if out.repeat_of is None:
                session._pending.add(out.origin)
        session._advance()
    return session


@dataclass(frozen=True)
class CatalogEntry:
    path: str
    holdout: str | None = None
    preload_triplets: str | None = None


@dataclass(frozen=True)
class ServiceConfig:
    port: int = 8008
    data_dir: str = "sessions"
    catalogs: dict[str, CatalogEntry] = field(default_factory=dict)

    @staticmethod
    def load(path: str | Path) -> "ServiceConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}:{exc.lineno}", exc.msg)
        catalogs = {}
        for cid, entry in doc.get("catalogs", {}).items():
            if "path" not in entry:
                raise SpecError(f"catalogs.{cid}.path", "missing required field")
            catalogs[cid] = CatalogEntry(
                path=entry["path"],
                holdout=entry.get("holdout"),
                preload_triplets=entry.get("preload_triplets"),
            )
        return ServiceConfig(
            port=int(doc.get("port", 8008)),
            data_dir=str(doc.get("data_dir", "sessions")),
            catalogs=catalogs,
        )


class SessionStore:
    """Owns live sessions and their on-disk journals."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.data_dir = Path(config.data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, LabelSession] = {}
        self._lock = threading.Lock()

    def _load_catalog_entry(
        self, catalog_id: str
    ) -> tuple[ItemCatalog, list[Triplet] | None, ResponseLog | None]:
        entry = self.config.catalogs.get(catalog_id)
        if entry is None:
            raise KeyError(catalog_id)
        catalog = load_catalog(entry.path)
        holdout = load_triplets(entry.holdout) if entry.holdout else None
        preload = None
        if entry.preload_triplets:
            preload = ResponseLog(
                [
                    RankingResponse(
                        TupleQuery(t.head, (t.closer, t.farther)),
                        (t.closer, t.farther),
                        0.0,
                        SOURCE_HUMAN,
                    )
                    for t in load_triplets(entry.preload_triplets)
                ]
            )
        return catalog, holdout, preload

    def create_session(self, catalog_id: str, settings: SessionSettings) -> LabelSession:
        catalog, holdout, preload = self._load_catalog_entry(catalog_id)
        session_id = uuid.uuid4().hex[:12]
        session = LabelSession(
            session_id=session_id,
            catalog=catalog,
            settings=settings,
            journal_path=self.data_dir / f"{session_id}{JOURNAL_SUFFIX}",
            snapshot_path=self.data_dir / f"{session_id}{SNAPSHOT_SUFFIX}",
            holdout=holdout,
            preload=preload,
        )
        with self._lock:
            self.sessions[session_id] = session
        return session

    def get(self, session_id: str) -> LabelSession:
        with self._lock:
            if session_id not in self.sessions:
                raise KeyError(session_id)
            return self.sessions[session_id]


class CreateSessionRequest(BaseModel):
    catalog_id: str
    config: dict[str, Any] = {}


class SubmitRankingRequest(BaseModel):
    query_id: str
    ranking: list[int]
    elapsed_seconds: float = 0.0


def create_app(config: ServiceConfig):
    """FastAPI application over a session store."""
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import PlainTextResponse

    app = FastAPI(title="tuplelearn session service", version="1")
    store = SessionStore(config)
    app.state.store = store

    @app.post("/sessions", status_code=201)
    def create_session(request: CreateSessionRequest):
        try:
            settings = settings_from_dict(request.config)
            session = store.create_session(request.catalog_id, settings)
        except KeyError:
            raise HTTPException(404, f"unknown catalog {request.catalog_id!r}")
        except ValueError as exc:
            raise HTTPException(422, str(exc))
        return {"session_id": session.session_id}

    def _session_or_404(session_id: str) -> LabelSession:
        try:
            return store.get(session_id)
        except KeyError:
            raise HTTPException(404, f"unknown session {session_id!r}")

    @app.get("/sessions/{session_id}/next")
    def next_query(session_id: str):
        session = _session_or_404(session_id)
        with session.lock:
            session.wait_ready()
            try:
                return session.next_query()
            except SessionGone:
                raise HTTPException(410, "session exhausted")
            except SessionNotReady:
                raise HTTPException(503, "selection in progress; retry shortly")

    @app.post("/sessions/{session_id}/rankings")
    def submit_ranking(session_id: str, request: SubmitRankingRequest):
        session = _session_or_404(session_id)
        with session.lock:
            try:
                return session.submit_ranking(
                    request.query_id, request.ranking, request.elapsed_seconds
                )
            except KeyError:
                raise HTTPException(404, f"unknown query {request.query_id!r}")
            except ValueError as exc:
                if "already answered" in str(exc):
                    raise HTTPException(409, str(exc))
                raise HTTPException(422, str(exc))

    @app.get("/sessions/{session_id}/snapshot")
    def snapshot(session_id: str):
        session = _session_or_404(session_id)
        with session.lock:
            return session.snapshot()

    @app.get("/sessions/{session_id}/journal", response_class=PlainTextResponse)
    def journal(session_id: str):
        session = _session_or_404(session_id)
        with session.lock:
            return session.journal_text()

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    return app

"""Labeling session service: issuing, repeats, batch validity, replay, HTTP."""

import json
import time

import pytest
from fastapi.testclient import TestClient

from tuplelearn.core import ItemCatalog, Triplet, save_catalog, save_triplets
from tuplelearn.models import ModelParams
from tuplelearn.selection import SelectionConfig
from tuplelearn.service import (
    CatalogEntry,
    LabelSession,
    ServiceConfig,
    SessionGone,
    SessionSettings,
    create_app,
    replay_session,
    settings_from_dict,
    settings_to_dict,
)


def make_settings(**overrides):
    defaults = dict(
        tuple_size=3,
        burn_in=3,
        horizon=1,
        candidates_per_head=5,
        n_f=5,
        seed=5,
        batch_size=25,
        synchronous=True,
    )
    defaults.update(overrides)
    return settings_from_dict(defaults)


def make_session(tmp_path, n_items=8, **overrides) -> LabelSession:
    return LabelSession(
        session_id="testsession",
        catalog=ItemCatalog.synthetic(n_items),
        settings=make_settings(**overrides),
        journal_path=tmp_path / "session.journal.jsonl",
        snapshot_path=tmp_path / "session.snapshot.txt",
    )


def answer_identity(session, query):
    """Submit the body in ascending-id order; deterministic and repeat-consistent."""
    ranking = sorted(item["id"] for item in query["body"])
    return session.submit_ranking(query["query_id"], ranking, elapsed_seconds=1.0)


def answer_presented(session, query):
    """Submit exactly the presented order; differs between shuffles."""
    ranking = [item["id"] for item in query["body"]]
    return session.submit_ranking(query["query_id"], ranking, elapsed_seconds=1.0)


class TestIssuing:
    def test_fresh_session_starts_with_burn_in_triplet(self, tmp_path):
        session = make_session(tmp_path)
        query = session.next_query()
        assert len(query["body"]) == 2
        assert query["batch_index"] == 0
        assert query["batch_position"] == 1

    def test_same_query_until_answered(self, tmp_path):
        session = make_session(tmp_path)
        first = session.next_query()
        second = session.next_query()
        assert first["query_id"] == second["query_id"]
        assert [b["id"] for b in first["body"]] == [b["id"] for b in second["body"]]

    def test_presentation_is_shuffled_but_canonical_in_journal(self, tmp_path):
        session = make_session(tmp_path, n_items=30, burn_in=4)
        orders = []
        for _ in range(10):
            query = session.next_query()
            body = [item["id"] for item in query["body"]]
            orders.append(body != sorted(body))
            answer_identity(session, query)
        assert any(orders)  # at least one shuffled presentation
        issued = [
            json.loads(line)
            for line in session.journal_path.read_text().splitlines()
            if json.loads(line)["type"] == "issued"
        ]
        for record in issued:
            assert record["body"] == sorted(record["body"])
            assert sorted(record["presented"]) == record["body"]

    def test_twenty_fifth_query_is_in_batch_repeat(self, tmp_path):
        session = make_session(tmp_path)  # 8 items x 3 burn-in = 24 fresh
        seen = {}
        for i in range(24):
            query = session.next_query()
            seen[query["query_id"]] = (
                query["head"]["id"],
                sorted(item["id"] for item in query["body"]),
            )
            answer_identity(session, query)
        repeat = session.next_query()
        assert repeat["batch_position"] == 25
        issued = session.issued[repeat["query_id"]]
        assert issued.repeat_of in seen
        original = seen[issued.repeat_of]
        assert (repeat["head"]["id"], sorted(i["id"] for i in repeat["body"])) == original


class TestSubmission:
    def test_ack_and_log_growth(self, tmp_path):
        session = make_session(tmp_path)
        query = session.next_query()
        ack = answer_identity(session, query)
        assert ack["accepted"] is True
        assert len(session.answers) == 1

    def test_malformed_ranking_rejected_with_reason(self, tmp_path):
        session = make_session(tmp_path)
        query = session.next_query()
        with pytest.raises(ValueError, match="permutation"):
            session.submit_ranking(query["query_id"], [1, 1], 0.1)

    def test_unknown_query_id(self, tmp_path):
        session = make_session(tmp_path)
        session.next_query()
        with pytest.raises(KeyError):
            session.submit_ranking("q999999", [1, 2], 0.1)

    def test_duplicate_identical_submit_is_idempotent(self, tmp_path):
        session = make_session(tmp_path)
        query = session.next_query()
        ranking = sorted(item["id"] for item in query["body"])
        session.submit_ranking(query["query_id"], ranking, 1.0)
        ack = session.submit_ranking(query["query_id"], ranking, 1.0)
        assert ack.get("duplicate") is True

    def test_conflicting_resubmit_rejected(self, tmp_path):
        session = make_session(tmp_path)
        query = session.next_query()
        ranking = sorted(item["id"] for item in query["body"])
        session.submit_ranking(query["query_id"], ranking, 1.0)
        with pytest.raises(ValueError, match="already answered"):
            session.submit_ranking(query["query_id"], ranking[::-1], 1.0)

    def test_elapsed_seconds_recorded(self, tmp_path):
        session = make_session(tmp_path)
        query = session.next_query()
        session.submit_ranking(
            query["query_id"], sorted(i["id"] for i in query["body"]), 4.25
        )
        record = json.loads(session.journal_path.read_text().splitlines()[-1])
        assert record["type"] == "response"
        assert record["elapsed_seconds"] == 4.25


def run_batch(session, answer=answer_identity, count=25):
    acks = []
    for _ in range(count):
        query = session.next_query()
        acks.append((query, answer(session, query)))
    return acks


class TestBatchValidity:
    def test_consistent_repeat_keeps_batch_valid(self, tmp_path):
        session = make_session(tmp_path)
        acks = run_batch(session)
        assert acks[-1][1]["repeat"] is True
        assert acks[-1][1]["batch_valid"] is True
        stats = session.validity_stats()
        assert stats["batches_valid"] == 1
        assert stats["responses_in_fit"] == 25

    def test_inconsistent_repeat_excludes_batch_from_fit(self, tmp_path):
        session = make_session(tmp_path)
        for _ in range(24):
            answer_identity(session, session.next_query())
        assert len(session.metric_history) == 0  # nothing resolved yet, no refit data
        repeat = session.next_query()
        ranking = sorted(item["id"] for item in repeat["body"])[::-1]
        ack = session.submit_ranking(repeat["query_id"], ranking, 1.0)
        assert ack["batch_valid"] is False
        stats = session.validity_stats()
        assert stats["batches_invalid"] == 1
        assert stats["responses_in_fit"] == 0
        assert len(session.fit_input()) == 0

    def test_invalid_batch_reissues_fresh_queries(self, tmp_path):
        session = make_session(tmp_path)
        for _ in range(24):
            answer_identity(session, session.next_query())
        repeat = session.next_query()
        session.submit_ranking(
            repeat["query_id"], sorted(i["id"] for i in repeat["body"])[::-1], 1.0
        )
        # The 24 lost burn-in queries are replanned with new attempt salts.
        next_up = session.next_query()
        origin = session.issued[next_up["query_id"]].origin
        assert origin[0] == "burn"
        assert origin[-1] == 1

    def test_excluded_responses_never_reach_fit(self, tmp_path):
        session = make_session(tmp_path)
        for _ in range(24):
            answer_identity(session, session.next_query())
        repeat = session.next_query()
        session.submit_ranking(
            repeat["query_id"], sorted(i["id"] for i in repeat["body"])[::-1], 1.0
        )
        run_batch(session)  # replacement batch, answered consistently
        fit_queries = {(r.query.head, r.query.body) for r in session.fit_input()}
        invalid_ids = session.batches[0].fresh_ids
        # Replacements share heads but not necessarily bodies; assert by id.
        for qid in invalid_ids + [session.batches[0].repeat_id]:
            issued = session.issued[qid]
            for response in session.fit_input():
                assert not (
                    response.query == issued.query
                    and response.timestamp == session.answers[qid].timestamp
                )
        assert session.validity_stats()["responses_in_fit"] == 25


class TestSessionLifecycle:
    def test_full_session_to_exhaustion(self, tmp_path):
        session = make_session(tmp_path, n_items=8, burn_in=3, horizon=1)
        served = 0
        while True:
            try:
                query = session.next_query()
            except SessionGone:
                break
            answer_identity(session, query)
            served += 1
        # 24 burn-in + repeat + 8 round-1 + trailing repeat.
        assert served == 34
        assert session.exhausted
        assert [s.round_index for s in session.metric_history] == [0, 1]

    def test_metric_history_counts_only_fit_input(self, tmp_path):
        session = make_session(tmp_path, n_items=8, burn_in=3, horizon=1)
        while True:
            try:
                query = session.next_query()
            except SessionGone:
                break
            answer_identity(session, query)
        counts = [s.normalized_query_count for s in session.metric_history]
        assert counts[0] == 25  # burn-in batch incl. repeat, all valid triplets
        assert counts[-1] == 34
        assert all(s.cumulative_label_seconds > 0 for s in session.metric_history)

    def test_holdout_metric_populated(self, tmp_path):
        session = LabelSession(
            session_id="s2",
            catalog=ItemCatalog.synthetic(8),
            settings=make_settings(),
            journal_path=tmp_path / "s2.journal.jsonl",
            snapshot_path=tmp_path / "s2.snapshot.txt",
            holdout=[Triplet(0, 1, 2), Triplet(3, 4, 5)],
        )
        run_batch(session)
        assert session.metric_history == [] or all(
            s.holdout_accuracy is not None for s in session.metric_history
        )
        run_batch(session, count=9)
        assert any(s.holdout_accuracy is not None for s in session.metric_history)

    def test_snapshot_shape(self, tmp_path):
        session = make_session(tmp_path)
        snap = session.snapshot()
        assert len(snap["coordinates"]) == 8
        assert len(snap["coordinates"][0]) == 2
        assert snap["exhausted"] is False


class TestJournalReplay:
    def _drive(self, tmp_path, stop_after, inconsistent_repeat=False):
        session = make_session(tmp_path)
        for i in range(stop_after):
            query = session.next_query()
            issued = session.issued[query["query_id"]]
            if inconsistent_repeat and issued.repeat_of is not None:
                ranking = sorted(item["id"] for item in query["body"])[::-1]
                session.submit_ranking(query["query_id"], ranking, 1.0)
            else:
                answer_identity(session, query)
        return session

    def _replay(self, session):
        return replay_session(
            session.journal_path,
            session.catalog,
            snapshot_path=session.snapshot_path,
        )

    @pytest.mark.parametrize("stop_after", [1, 10, 24, 25, 30])
    def test_equivalent_state(self, tmp_path, stop_after):
        session = self._drive(tmp_path, stop_after)
        replay = self._replay(session)
        assert set(replay.answers) == set(session.answers)
        assert {b.index: b.valid for b in replay.batches.values()} == {
            b.index: b.valid for b in session.batches.values()
        }
        original_fit = [(r.query, r.ranking) for r in session.fit_input()]
        replayed_fit = [(r.query, r.ranking) for r in replay.fit_input()]
        assert original_fit == replayed_fit

    def test_replay_restores_outstanding_query(self, tmp_path):
        session = self._drive(tmp_path, 5)
        pending = session.next_query()  # issued but unanswered
        replay = self._replay(session)
        assert replay.outstanding == pending["query_id"]
        assert replay.next_query()["query_id"] == pending["query_id"]

    def test_replay_after_invalid_batch(self, tmp_path):
        session = self._drive(tmp_path, 25, inconsistent_repeat=True)
        replay = self._replay(session)
        assert replay.batches[0].valid is False
        assert len(replay.fit_input()) == 0
        query = replay.next_query()
        assert replay.issued[query["query_id"]].origin[-1] == 1  # reissue attempt

    def test_replayed_session_can_finish(self, tmp_path):
        session = self._drive(tmp_path, 17)
        replay = self._replay(session)
        served = 0
        while True:
            try:
                query = replay.next_query()
            except SessionGone:
                break
            answer_identity(replay, query)
            served += 1
        assert replay.exhausted
        assert served == 34 - 17


class TestAsyncMode:
    def test_background_advance_serves_next_round(self, tmp_path):
        session = make_session(tmp_path, synchronous=False)
        served = 0
        deadline = time.monotonic() + 60
        while time.monotonic() < deadline:
            with session.lock:
                session.wait_ready()
                try:
                    query = session.next_query()
                except SessionGone:
                    break
                except SessionNotReady:
                    continue
                answer_identity(session, query)
                served += 1
        else:
            pytest.fail("async session did not finish in time")
        assert served == 34


from tuplelearn.service import SessionNotReady  # noqa: E402


class TestSettingsRoundTrip:
    def test_dict_round_trip(self):
        settings = SessionSettings(
            selection=SelectionConfig(
                tuple_size=4, burn_in=2, horizon=3, params=ModelParams(0.1), seed=11
            ),
            batch_size=10,
            snapshot_dim=3,
            synchronous=False,
        )
        assert settings_from_dict(settings_to_dict(settings)) == settings


class TestHttpApi:
    @pytest.fixture()
    def client(self, tmp_path):
        save_catalog(ItemCatalog.synthetic(8), tmp_path / "catalog.tsv")
        save_triplets([Triplet(0, 1, 2)], tmp_path / "holdout.csv")
        config = ServiceConfig(
            data_dir=str(tmp_path / "sessions"),
            catalogs={
                "demo": CatalogEntry(
                    path=str(tmp_path / "catalog.tsv"),
                    holdout=str(tmp_path / "holdout.csv"),
                )
            },
        )
        return TestClient(create_app(config))

    def _create(self, client, **overrides):
        config = dict(
            tuple_size=3, burn_in=3, horizon=1, candidates_per_head=5,
            n_f=5, seed=5, batch_size=25, synchronous=True,
        )
        config.update(overrides)
        response = client.post("/sessions", json={"catalog_id": "demo", "config": config})
        assert response.status_code == 201
        return response.json()["session_id"]

    def test_unknown_catalog_404(self, client):
        response = client.post("/sessions", json={"catalog_id": "nope"})
        assert response.status_code == 404

    def test_oversized_tuple_422(self, client):
        response = client.post(
            "/sessions", json={"catalog_id": "demo", "config": {"tuple_size": 10}}
        )
        assert response.status_code == 422

    def test_full_round_trip_and_exhaustion(self, client):
        sid = self._create(client)
        served = 0
        while True:
            response = client.get(f"/sessions/{sid}/next")
            if response.status_code == 410:
                break
            assert response.status_code == 200
            query = response.json()
            ranking = sorted(item["id"] for item in query["body"])
            ack = client.post(
                f"/sessions/{sid}/rankings",
                json={
                    "query_id": query["query_id"],
                    "ranking": ranking,
                    "elapsed_seconds": 0.5,
                },
            )
            assert ack.status_code == 200
            served += 1
        assert served == 34
        snapshot = client.get(f"/sessions/{sid}/snapshot").json()
        assert snapshot["exhausted"] is True
        assert snapshot["validity"]["batches_valid"] == 2
        assert snapshot["metric_history"][-1]["holdout_acc"] is not None
        journal = client.get(f"/sessions/{sid}/journal").text
        responses = [
            json.loads(line) for line in journal.splitlines()
            if json.loads(line)["type"] == "response"
        ]
        assert len(responses) == 34

    def test_duplicate_submit_conflict_409(self, client):
        sid = self._create(client)
        query = client.get(f"/sessions/{sid}/next").json()
        ranking = sorted(item["id"] for item in query["body"])
        payload = {"query_id": query["query_id"], "ranking": ranking, "elapsed_seconds": 1}
        assert client.post(f"/sessions/{sid}/rankings", json=payload).status_code == 200
        payload["ranking"] = ranking[::-1]
        assert client.post(f"/sessions/{sid}/rankings", json=payload).status_code == 409

    def test_bad_ranking_422(self, client):
        sid = self._create(client)
        query = client.get(f"/sessions/{sid}/next").json()
        response = client.post(
            f"/sessions/{sid}/rankings",
            json={"query_id": query["query_id"], "ranking": [0, 0], "elapsed_seconds": 1},
        )
        assert response.status_code == 422

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope/next").status_code == 404

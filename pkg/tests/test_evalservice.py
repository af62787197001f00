"""Session sampling, blindness, durability, and score aggregation."""

import json

import pytest
from fastapi.testclient import TestClient

from deskmt.evalservice.service import create_app
from deskmt.evalservice.sessions import (DuplicateJudgmentError, SessionError,
                                         SessionStore, aggregate, create_session)


def corpus(n=60):
    sources = [f"source sentence number {i}" for i in range(n)]
    systems = {
        "sys/alpha/checkpoints/epoch-010.ckpt": [f"alpha out {i}" for i in range(n)],
        "sys-bravo": [f"bravo out {i}" for i in range(n)],
        "sys-charlie": [f"charlie out {i}" for i in range(n)],
    }
    return sources, systems


class TestCreateSession:
    def test_three_systems_fifty_sentences_give_150_items_once_each(self):
        sources, systems = corpus()
        session = create_session(sources, systems, seed=3, sample_size=50)
        assert session.total == 150
        ids = [it.item_id for it in session.items]
        assert len(set(ids)) == 150
        keys = {(it.sentence_index, it.system) for it in session.items}
        assert len(keys) == 150  # bijection over sampled (sentence, system)

    def test_single_system_single_sentence(self):
        session = create_session(["hello there"], {"only": ["hi"]},
                                 seed=0, sample_size=1)
        assert session.total == 1

    def test_same_seed_reproduces_order_different_seed_changes_it(self):
        sources, systems = corpus()
        a = create_session(sources, systems, seed=9, sample_size=10)
        b = create_session(sources, systems, seed=9, sample_size=10)
        c = create_session(sources, systems, seed=10, sample_size=10)
        key = lambda s: [(it.sentence_index, it.system) for it in s.items]
        assert key(a) == key(b)
        assert key(a) != key(c)

    def test_long_sentences_excluded_from_sampling(self):
        sources = ["short one", "w " * 60, "fine too", "also ok"]
        systems = {"s": ["a", "b", "c", "d"]}
        session = create_session(sources, systems, seed=0, sample_size=3)
        assert all(len(it.source_text.split()) <= 50 for it in session.items)

    def test_coverage_gap_rejected(self):
        with pytest.raises(SessionError, match="covers"):
            create_session(["a", "b"], {"s": ["only one"]}, seed=0, sample_size=1)

    def test_empty_inputs_rejected(self):
        with pytest.raises(SessionError):
            create_session([], {"s": []}, seed=0)
        with pytest.raises(SessionError):
            create_session(["a"], {}, seed=0)


class TestAggregate:
    def tally_session(self, counts_by_system):
        n = sum(next(iter(counts_by_system.values())))
        sources = [f"s{i}" for i in range(n)]
        systems = {name: [f"{name}-{i}" for i in range(n)] for name in counts_by_system}
        session = create_session(sources, systems, seed=1, sample_size=n)
        scores = {name: [k for k, c in enumerate(counts) for _ in range(c)]
                  for name, counts in counts_by_system.items()}
        position = {name: 0 for name in counts_by_system}
        for item in session.items:
            session.judgments[item.item_id] = scores[item.system][position[item.system]]
            position[item.system] += 1
        return session

    def test_published_histogram_averages(self):
        session = self.tally_session({
            "baseline": [1, 0, 10, 9, 13, 17],
            "continue-epoch-2": [0, 0, 7, 9, 14, 20],
            "ensemble-epoch-2": [0, 0, 8, 6, 12, 24],
        })
        report = aggregate(session)
        assert report.systems["baseline"].average == 3.68
        assert report.systems["continue-epoch-2"].average == 3.94
        assert report.systems["ensemble-epoch-2"].average == 4.04

    def test_second_published_table(self):
        session = self.tally_session({
            "baseline": [0, 0, 24, 14, 9, 3],
            "continue-epoch-6": [0, 0, 19, 11, 11, 9],
            "ensemble-epoch-6": [0, 0, 17, 10, 11, 12],
        })
        report = aggregate(session)
        assert report.systems["baseline"].average == 2.82
        assert report.systems["continue-epoch-6"].average == 3.20
        assert report.systems["ensemble-epoch-6"].average == 3.36

    def test_average_identity_is_exact_in_integers(self):
        session = self.tally_session({"s": [3, 5, 7, 11, 13, 11]})
        tally = aggregate(session).systems["s"]
        assert tally.average * 0 == 0  # float, but derived from these ints:
        assert tally.score_sum == sum(k * c for k, c in enumerate(tally.counts))
        assert tally.judged == sum(tally.counts)

    def test_all_fives(self):
        session = self.tally_session({"s": [0, 0, 0, 0, 0, 50]})
        assert aggregate(session).systems["s"].average == 5.0

    def test_incomplete_needs_partial_flag(self):
        sources, systems = corpus()
        session = create_session(sources, systems, seed=2, sample_size=5)
        session.judgments[session.items[0].item_id] = 4
        with pytest.raises(SessionError):
            aggregate(session)
        report = aggregate(session, partial=True)
        assert not report.complete

    def test_no_judgments_rejected(self):
        sources, systems = corpus()
        session = create_session(sources, systems, seed=2, sample_size=5)
        with pytest.raises(SessionError):
            aggregate(session, partial=True)


class TestStoreDurability:
    def test_restart_recovers_exact_state(self, tmp_path):
        sources, systems = corpus()
        store = SessionStore(tmp_path)
        session = store.create(sources, systems, seed=5, sample_size=4)
        store.record_judgment(session.session_id, session.items[0].item_id, 3)
        store.record_judgment(session.session_id, session.items[1].item_id, 5)

        reopened = SessionStore(tmp_path)
        recovered = reopened.get(session.session_id)
        assert recovered.judgments == session.judgments
        assert [it.item_id for it in recovered.items] == [it.item_id for it in session.items]

    def test_retry_after_crash_does_not_double_count(self, tmp_path):
        store = SessionStore(tmp_path)
        sources, systems = corpus()
        session = store.create(sources, systems, seed=5, sample_size=4)
        item = session.items[0].item_id
        store.record_judgment(session.session_id, item, 2)
        # client never saw the ack and retries the same judgment
        ack = store.record_judgment(session.session_id, item, 2)
        assert ack["duplicate"] is True
        reopened = SessionStore(tmp_path)
        assert reopened.get(session.session_id).judgments[item] == 2
        assert len(reopened.get(session.session_id).judgments) == 1

    def test_score_change_requires_overwrite(self, tmp_path):
        store = SessionStore(tmp_path)
        sources, systems = corpus()
        session = store.create(sources, systems, seed=5, sample_size=4)
        item = session.items[0].item_id
        store.record_judgment(session.session_id, item, 2)
        with pytest.raises(DuplicateJudgmentError):
            store.record_judgment(session.session_id, item, 4)
        store.record_judgment(session.session_id, item, 4, overwrite=True)
        assert store.get(session.session_id).judgments[item] == 4

    def test_out_of_range_scores_rejected(self, tmp_path):
        store = SessionStore(tmp_path)
        sources, systems = corpus()
        session = store.create(sources, systems, seed=5, sample_size=4)
        for bad in (-1, 7, 2.5):
            with pytest.raises(SessionError):
                store.record_judgment(session.session_id, session.items[0].item_id, bad)


@pytest.fixture()
def client(tmp_path):
    app = create_app(tmp_path / "evaldata")
    return TestClient(app)


def make_session(client, sample_size=4, display_mode="single"):
    sources, systems = corpus()
    resp = client.post("/sessions", json={
        "sources": sources, "systems": systems, "seed": 11,
        "sample_size": sample_size, "display_mode": display_mode,
    })
    assert resp.status_code == 200
    return resp.json()


class TestHttpApi:
    def test_full_judging_round_trip(self, client):
        info = make_session(client, sample_size=4)
        sid, token = info["session_id"], info["token"]
        assert info["item_count"] == 12

        judged = 0
        while True:
            nxt = client.get(f"/sessions/{sid}/next", params={"token": token}).json()
            if nxt.get("done"):
                break
            assert set(nxt) == {"item_id", "source_text", "translation_text", "progress"}
            resp = client.post(f"/sessions/{sid}/judgments", json={
                "token": token, "item_id": nxt["item_id"], "score": judged % 6})
            assert resp.status_code == 200
            judged += 1
        assert judged == 12

        report = client.get(f"/sessions/{sid}/report", params={"token": token}).json()
        assert report["complete"] is True
        assert sum(t["judged"] for t in report["systems"].values()) == 12

    def test_annotator_payloads_are_blind(self, client):
        sources = [f"quelle {i}" for i in range(8)]
        systems = {
            "baseline/ckpts/epoch-010.ckpt": [f"ausgabe eins {i}" for i in range(8)],
            "adapted-epoch-2": [f"ausgabe zwei {i}" for i in range(8)],
        }
        resp = client.post("/sessions", json={
            "sources": sources, "systems": systems, "seed": 4, "sample_size": 4})
        sid, token = resp.json()["session_id"], resp.json()["token"]
        leaky = ("baseline", "adapted", "ckpt", "epoch", "/")
        for _ in range(8):
            nxt = client.get(f"/sessions/{sid}/next", params={"token": token})
            body = nxt.json()
            payload = json.dumps(body)
            for needle in leaky:
                assert needle not in payload, f"{needle!r} leaked into {payload}"
            ack = client.post(f"/sessions/{sid}/judgments", json={
                "token": token, "item_id": body["item_id"], "score": 3})
            for needle in leaky:
                assert needle not in ack.text

    def test_bad_token_and_unknown_session(self, client):
        info = make_session(client)
        assert client.get(f"/sessions/{info['session_id']}/next",
                          params={"token": "wrong"}).status_code == 403
        assert client.get("/sessions/nope/next",
                          params={"token": "x"}).status_code == 404

    def test_double_submission_conflict(self, client):
        info = make_session(client)
        sid, token = info["session_id"], info["token"]
        nxt = client.get(f"/sessions/{sid}/next", params={"token": token}).json()
        body = {"token": token, "item_id": nxt["item_id"], "score": 1}
        assert client.post(f"/sessions/{sid}/judgments", json=body).status_code == 200
        body["score"] = 2
        assert client.post(f"/sessions/{sid}/judgments", json=body).status_code == 409
        body["overwrite"] = True
        assert client.post(f"/sessions/{sid}/judgments", json=body).status_code == 200

    def test_score_validation(self, client):
        info = make_session(client)
        sid, token = info["session_id"], info["token"]
        nxt = client.get(f"/sessions/{sid}/next", params={"token": token}).json()
        resp = client.post(f"/sessions/{sid}/judgments", json={
            "token": token, "item_id": nxt["item_id"], "score": 7})
        assert resp.status_code == 422

    def test_report_before_completion_conflicts(self, client):
        info = make_session(client)
        sid, token = info["session_id"], info["token"]
        assert client.get(f"/sessions/{sid}/report",
                          params={"token": token}).status_code == 409

    def test_grouped_display_mode(self, client):
        info = make_session(client, display_mode="grouped")
        sid, token = info["session_id"], info["token"]
        group = client.get(f"/sessions/{sid}/next-group", params={"token": token}).json()
        assert len(group["translations"]) == 3
        assert "source_text" in group

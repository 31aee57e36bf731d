import threading

import pytest
from fastapi.testclient import TestClient

import consensus_labeler.world as world_mod
from consensus_labeler.ensemble import EnsembleSpec
from consensus_labeler.features import patch_features
from consensus_labeler.loop import LabelingLoop, LoopConfig
from consensus_labeler.samples import FOREST
from consensus_labeler.service import AnnotationService, Session, create_app


@pytest.fixture(scope="module")
def small_world():
    return world_mod.generate(world_mod.WorldConfig(seed=21, ncols=64,
                                                    nrows=64))


def build_service(world, n=200, batch=200, extra_tokens=None):
    store, truth = world_mod.build_store(world, n_samples=n, seed=21)
    cfg = LoopConfig(batch_size=batch, max_iterations=10,
                     spec=EnsembleSpec(K=2, n_architectures=2, M=2),
                     seed=21, train_cap=200,
                     patch_params={"n_trees": 3, "max_depth": 3},
                     tabular_params={"n_trees": 4, "max_depth": 4})
    loop = LabelingLoop(
        store, cfg,
        patch_row_fn=lambda s: patch_features(
            world_mod.patch_for_sample(world, s.id)))
    tokens = {"tok-a": Session("alice"), "tok-b": Session("bob"),
              "tok-c": Session("carol"),
              "tok-admin": Session("root", ("annotate", "admin"))}
    tokens.update(extra_tokens or {})
    service = AnnotationService(
        loop, tokens, patch_fn=lambda sid: world_mod.patch_for_sample(world, sid))
    return service, loop, truth


@pytest.fixture()
def client(small_world):
    service, loop, truth = build_service(small_world)
    loop.run_iteration()
    return TestClient(create_app(service)), service, loop


def auth(token):
    return {"Authorization": f"Bearer {token}"}


class TestAuthentication:
    def test_missing_token_401(self, client):
        c, *_ = client
        assert c.get("/api/progress").status_code == 401

    def test_bad_token_401(self, client):
        c, *_ = client
        assert c.get("/api/progress", headers=auth("nope")).status_code == 401

    def test_good_token_ok(self, client):
        c, *_ = client
        assert c.get("/api/progress", headers=auth("tok-a")).status_code == 200

    def test_admin_required_for_advance(self, client):
        c, *_ = client
        r = c.post("/api/iteration/advance", headers=auth("tok-a"))
        assert r.status_code == 401


class TestTaskFlow:
    def test_next_task_payload(self, client):
        c, *_ = client
        r = c.get("/api/tasks/next", headers=auth("tok-a"))
        assert r.status_code == 200
        body = r.json()
        assert body["task_id"]
        assert body["patch_url"].startswith("/api/patches/")
        assert "forest" in body["class_menu"]
        assert body["proposed_label"] in ("forest", "non-forest")

    def test_unknown_task_404(self, client):
        c, *_ = client
        r = c.post("/api/tasks/nope/decision", headers=auth("tok-a"),
                   json={"decided_class": "forest"})
        assert r.status_code == 404

    def test_unknown_class_400(self, client):
        c, *_ = client
        tid = c.get("/api/tasks/next", headers=auth("tok-a")).json()["task_id"]
        r = c.post(f"/api/tasks/{tid}/decision", headers=auth("tok-a"),
                   json={"decided_class": "swamp"})
        assert r.status_code == 400

    def test_idempotent_retry_accepted(self, client):
        c, *_ = client
        tid = c.get("/api/tasks/next", headers=auth("tok-a")).json()["task_id"]
        body = {"decided_class": "forest"}
        r1 = c.post(f"/api/tasks/{tid}/decision", headers=auth("tok-a"),
                    json=body)
        r2 = c.post(f"/api/tasks/{tid}/decision", headers=auth("tok-a"),
                    json=body)
        assert r1.status_code == r2.status_code == 200
        assert r1.json() == r2.json()

    def test_conflicting_duplicate_409(self, client):
        c, *_ = client
        tid = c.get("/api/tasks/next", headers=auth("tok-a")).json()["task_id"]
        c.post(f"/api/tasks/{tid}/decision", headers=auth("tok-a"),
               json={"decided_class": "forest"})
        r = c.post(f"/api/tasks/{tid}/decision", headers=auth("tok-a"),
                   json={"decided_class": "grassland"})
        assert r.status_code == 409

    def test_triple_review_needs_distinct_annotators(self, client):
        c, service, loop = client
        state = loop.current
        triple = next(t for t in state.open_tasks if t.required_decisions == 3)
        for tok in ("tok-a", "tok-b"):
            r = c.post(f"/api/tasks/{triple.task_id}/decision",
                       headers=auth(tok), json={"decided_class": "forest"})
            assert r.status_code == 200 and not r.json()["resolved"]
        r = c.post(f"/api/tasks/{triple.task_id}/decision",
                   headers=auth("tok-c"), json={"decided_class": "forest"})
        assert r.json()["resolved"]
        assert r.json()["resolved_label"] == FOREST

    def test_own_pending_task_not_reissued(self, client):
        c, *_ = client
        tid = c.get("/api/tasks/next", headers=auth("tok-a")).json()["task_id"]
        c.post(f"/api/tasks/{tid}/decision", headers=auth("tok-a"),
               json={"decided_class": "forest"})
        nxt = c.get("/api/tasks/next", headers=auth("tok-a")).json()
        assert nxt.get("task_id") != tid

    def test_patch_served_as_png(self, client):
        c, *_ = client
        sid = c.get("/api/tasks/next",
                    headers=auth("tok-a")).json()["sample_id"]
        r = c.get(f"/api/patches/{sid}", headers=auth("tok-a"))
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert r.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_unknown_patch_404(self, client):
        c, *_ = client
        r = c.get("/api/patches/sXX_YY", headers=auth("tok-a"))
        assert r.status_code == 404


class TestProgressAndAdvance:
    def test_progress_counters(self, client):
        c, service, loop = client
        p = c.get("/api/progress", headers=auth("tok-a")).json()
        state = loop.current
        assert p["tasks_total"] == len(state.open_tasks)
        assert p["consistent_count"] == len(state.consistent_set)
        assert p["inconsistent_count"] == len(state.inconsistent_set)
        assert 0.0 <= p["labor_saved_so_far"] <= 1.0
        assert not p["complete"]

    def test_advance_blocked_while_tasks_open(self, client):
        c, *_ = client
        r = c.post("/api/iteration/advance", headers=auth("tok-admin"))
        assert r.status_code == 409

    def test_full_cycle_to_completion(self, small_world):
        service, loop, truth = build_service(small_world, n=120, batch=200)
        loop.run_iteration()
        c = TestClient(create_app(service))
        binary = world_mod.binary_truth(truth)
        while True:
            for tok in ("tok-a", "tok-b", "tok-c"):
                while True:
                    t = c.get("/api/tasks/next", headers=auth(tok)).json()
                    if not t.get("task_id"):
                        break
                    want = ("forest" if binary[t["sample_id"]] == FOREST
                            else "grassland")
                    r = c.post(f"/api/tasks/{t['task_id']}/decision",
                               headers=auth(tok),
                               json={"decided_class": want})
                    assert r.status_code == 200
            r = c.post("/api/iteration/advance", headers=auth("tok-admin"))
            assert r.status_code == 200
            if r.json()["status"] == "complete":
                break
        p = c.get("/api/progress", headers=auth("tok-a")).json()
        assert p["complete"]
        for s in loop.store:
            if not s.excluded:
                assert s.current_label == binary[s.id]

    def test_progress_matches_store_recount(self, client):
        c, service, loop = client
        p = c.get("/api/progress", headers=auth("tok-a")).json()
        excluded = sum(1 for s in loop.store if s.excluded)
        assert p["excluded_count"] == excluded


class TestConcurrency:
    def test_parallel_decisions_lossless(self, small_world):
        tokens = {f"tok-w{i}": Session(f"worker{i}") for i in range(8)}
        service, loop, truth = build_service(small_world, n=400, batch=400,
                                             extra_tokens=tokens)
        state = loop.run_iteration()
        c = TestClient(create_app(service))
        errors = []

        def worker(tok):
            try:
                while True:
                    t = c.get("/api/tasks/next", headers=auth(tok)).json()
                    if not t.get("task_id"):
                        return
                    r = c.post(f"/api/tasks/{t['task_id']}/decision",
                               headers=auth(tok),
                               json={"decided_class": "forest"})
                    if r.status_code not in (200, 409):
                        errors.append((tok, r.status_code, r.text))
            except Exception as exc:   # pragma: no cover - surfaced below
                errors.append((tok, exc))

        threads = [threading.Thread(target=worker, args=(tok,))
                   for tok in tokens]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        assert errors == []
        for t in state.open_tasks:
            assert t.resolved
            annotators = [d.annotator_id for d in t.decisions]
            assert len(annotators) == len(set(annotators))
            assert len(annotators) == t.required_decisions

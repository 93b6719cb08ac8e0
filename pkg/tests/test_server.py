import json

import pytest
from fastapi.testclient import TestClient

from scribeloop import harness
from scribeloop.server import SessionRegistry, create_app, handle


@pytest.fixture(scope="module")
def case():
    return harness.make_synthetic_case("demo", seed=21)


@pytest.fixture
def registry(case, tmp_path):
    return SessionRegistry({case.name: case}, run_dir=tmp_path)


def stroke_wire(t0, t1, y=10.0):
    return [{"x": float(t0), "y": y, "t": t0}, {"x": float(t1), "y": y, "t": t1}]


def open_msg(budget=None):
    return {"type": "open_session", "case": "demo", "budget": budget}


def test_unknown_type(registry):
    (resp,) = handle(registry, "c1", {"type": "bogus"})
    assert resp["type"] == "error" and resp["code"] == "bad_request"


def test_requires_open_session(registry):
    (resp,) = handle(registry, "c1", {"type": "request_query"})
    assert resp["type"] == "error" and resp["code"] == "no_session"


def test_open_session_state(registry, case):
    (state,) = handle(registry, "c1", open_msg(budget=5))
    assert state["type"] == "session_state"
    assert state["num_frames"] == 300
    assert state["vocab"] == list(case.vocab.names)
    assert state["budget_remaining"] == 5
    # the session starts from the case's initial labeling
    assert state["segments"] == [
        {"start": s, "end": e, "label": l} for (s, e, l) in case.init.segments
    ]
    assert len(state["energy"]) == 300


def test_open_unknown_case(registry):
    (resp,) = handle(registry, "c1", {"type": "open_session", "case": "nope"})
    assert resp["type"] == "error"


def test_full_message_cycle(registry, case):
    handle(registry, "c1", open_msg())
    (q,) = handle(registry, "c1", {"type": "request_query"})
    assert q["type"] == "query" and 0 <= q["t_q"] < 300
    lo, hi = q["window"]
    assert 0 <= lo < hi <= 300

    (prop,) = handle(registry, "c1", {
        "type": "submit_scribble",
        "strokes": [stroke_wire(max(1, q["t_q"] - 4), min(298, q["t_q"] + 4))],
    })
    assert prop["type"] == "proposal" and len(prop["drafts"]) >= 1
    d = prop["drafts"][0]
    assert 0.0 <= d["raw_confidence"] <= 1.0
    assert len(d["p_b"]) == d["window"][1] - d["window"][0]

    (upd,) = handle(registry, "c1", {"type": "submit_verdict", "verdict": "accepted",
                                     "draft_index": 0})
    assert upd["type"] == "labeling_update"
    assert upd["accepted"] == 1
    assert len(upd["anchors"]) == 1

    (state,) = handle(registry, "c1", {"type": "save"})
    assert state["type"] == "session_state"
    snap = json.loads((registry.run_dir / "c1.snapshot.json").read_text())
    assert snap["case"] == "demo" and len(snap["anchors"]) == 1
    journal = (registry.run_dir / "c1.journal.jsonl").read_text()
    kinds = [json.loads(line)["kind"] for line in journal.splitlines()]
    assert kinds[0] == "init" and "verdict" in kinds


def test_edited_verdict_with_final(registry, case):
    handle(registry, "c1", open_msg())
    (q,) = handle(registry, "c1", {"type": "request_query"})
    g = min(case.gt.boundaries().times, key=lambda b: abs(b - q["t_q"]))
    handle(registry, "c1", {
        "type": "submit_scribble",
        "strokes": [stroke_wire(max(1, g - 4), min(298, g + 4))],
    })
    final = {"start": g - 3, "end": g + 3, "cut": g, "y_left": 0, "y_right": 1,
             "id": 0, "merge": False}
    (upd,) = handle(registry, "c1", {"type": "submit_verdict", "verdict": "edited",
                                     "final": final})
    assert upd["type"] == "labeling_update"
    assert upd["anchors"][0]["cut"] == g


def test_verdict_without_proposal(registry):
    handle(registry, "c1", open_msg())
    (resp,) = handle(registry, "c1", {"type": "submit_verdict", "verdict": "accepted"})
    assert resp["type"] == "error"


def test_edit_cue_message(registry):
    handle(registry, "c1", open_msg())
    # vertical flick on a background-only timeline: journaled no-op
    (upd,) = handle(registry, "c1", {
        "type": "edit_cue",
        "strokes": [[{"x": 50.0, "y": 0.0, "t": 50}, {"x": 51.0, "y": 80.0, "t": 50}]],
    })
    assert upd["type"] == "labeling_update"


def test_edit_cue_rejected_on_scribble_channel(registry):
    handle(registry, "c1", open_msg())
    (resp,) = handle(registry, "c1", {
        "type": "submit_scribble",
        "strokes": [[{"x": 50.0, "y": 0.0, "t": 50}, {"x": 51.0, "y": 80.0, "t": 50}]],
    })
    assert resp["type"] == "error" and "edit" in resp["detail"]


def test_empty_strokes(registry):
    handle(registry, "c1", open_msg())
    (resp,) = handle(registry, "c1", {"type": "submit_scribble", "strokes": []})
    assert resp["type"] == "error"


def test_http_endpoints(case, tmp_path):
    app = create_app(cases={case.name: case}, run_dir=tmp_path)
    client = TestClient(app)
    assert client.get("/health").json() == {"status": "ok"}
    listing = client.get("/cases").json()
    assert listing["cases"][0]["name"] == "demo"
    assert listing["cases"][0]["num_frames"] == 300


def test_websocket_session(case, tmp_path):
    app = create_app(cases={case.name: case}, run_dir=tmp_path)
    client = TestClient(app)
    with client.websocket_connect("/ws") as ws:
        hello = json.loads(ws.receive_text())
        assert hello["type"] == "hello"
        ws.send_text(json.dumps(open_msg()))
        state = json.loads(ws.receive_text())
        assert state["type"] == "session_state"
        ws.send_text(json.dumps({"type": "request_query"}))
        q = json.loads(ws.receive_text())
        assert q["type"] == "query"
        ws.send_text("this is not json")
        err = json.loads(ws.receive_text())
        assert err["type"] == "error"
        # journal is reachable over HTTP while the session lives
        journal = client.get(f"/sessions/{hello['session_id']}/journal").json()
        assert "journal" in journal


def test_journal_endpoint_after_save(case, tmp_path):
    app = create_app(cases={case.name: case}, run_dir=tmp_path)
    registry = app.state.registry
    handle(registry, "conn-x", open_msg())
    handle(registry, "conn-x", {"type": "save"})
    registry.close("conn-x")
    client = TestClient(app)
    doc = client.get("/sessions/conn-x/journal").json()
    assert "journal" in doc and '"init"' in doc["journal"]

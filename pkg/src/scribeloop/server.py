"""Live session server: the correction loop behind a message protocol.

Session traffic runs over one persistent WebSocket per session; case
listing and journal download use plain request/response. Message
handling itself is a pure function over a session registry so the
protocol can be tested without sockets.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import click
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from scribeloop import harness, proposal
from scribeloop.errors import ConstraintConflictError, GestureError, ScribeloopError
from scribeloop.scribble import GestureKind, Stroke, classify_gesture
from scribeloop.session import PolicyConfig, Session, _anchor_from_payload, _anchor_payload

CLIENT_TYPES = (
    "open_session",
    "request_query",
    "submit_scribble",
    "submit_verdict",
    "edit_cue",
    "save",
)


def _strokes_from_wire(payload) -> list:
    return [
        Stroke(points=tuple((p["x"], p["y"], p["t"]) for p in stroke)) for stroke in payload
    ]


def snapshot_state(session: Session, name: str) -> dict:
    seg = session.hypothesis_segments()
    remaining = (
        None if session.budget is None else max(0, session.budget - session.accepted)
    )
    return {
        "type": "session_state",
        "case": name,
        "num_frames": session.num_frames,
        "vocab": list(session.vocab.names),
        "segments": [{"start": s, "end": e, "label": l} for s, e, l in seg.segments],
        "anchors": [_anchor_payload(a) for a in session.anchors],
        "step": session.step,
        "accepted": session.accepted,
        "budget_remaining": remaining,
        "model_version": session.model.version,
        "energy": session.energy.tolist(),
    }


class SessionRegistry:
    """One live session per connection; all mutation is serialized by the
    caller (one handler task per socket)."""

    def __init__(self, cases: dict, model: Optional[proposal.ModelParams] = None,
                 run_dir: Optional[Path] = None):
        self.cases = cases
        self.model = model
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.sessions: dict = {}
        self.drafts: dict = {}

    def open(self, conn_id: str, case_name: str, budget=None) -> Session:
        case = self.cases[case_name]
        model = self.model
        if model is not None and model.dim != case.features.dim:
            model = None
        session = Session(
            case.features, case.vocab, init=case.init, budget=budget,
            model=model, policy=PolicyConfig(),
        )
        self.sessions[conn_id] = (case_name, session)
        self.drafts[conn_id] = []
        return session

    def close(self, conn_id: str) -> None:
        self.sessions.pop(conn_id, None)
        self.drafts.pop(conn_id, None)


def handle(registry: SessionRegistry, conn_id: str, msg: dict) -> list:
    """Process one client message; always returns >= 1 response."""
    mtype = msg.get("type")
    if mtype not in CLIENT_TYPES:
        return [{"type": "error", "code": "bad_request", "detail": f"unknown type {mtype!r}"}]
    if mtype == "open_session":
        case_name = msg.get("case")
        if case_name not in registry.cases:
            return [{"type": "error", "code": "bad_request", "detail": f"unknown case {case_name!r}"}]
        session = registry.open(conn_id, case_name, budget=msg.get("budget"))
        return [snapshot_state(session, case_name)]

    entry = registry.sessions.get(conn_id)
    if entry is None:
        return [{"type": "error", "code": "no_session", "detail": "open a session first"}]
    case_name, session = entry

    try:
        if mtype == "request_query":
            q = session.next_query()
            if q is None:
                return [{"type": "completed", "accepted": session.accepted}]
            return [{
                "type": "query",
                "t_q": q.t_q,
                "window": [q.window.start, q.window.end],
                "priority": q.priority,
                "utility": q.utility,
                "cost": q.cost,
                "provenance": q.provenance,
            }]

        if mtype == "submit_scribble":
            strokes = _strokes_from_wire(msg.get("strokes", []))
            if not strokes:
                return [{"type": "error", "code": "bad_request", "detail": "no strokes"}]
            gesture = classify_gesture(
                strokes, session.num_frames, session.hypothesis_segments().boundaries()
            )
            if gesture == GestureKind.EDIT_CUE:
                return [{"type": "error", "code": "bad_request",
                         "detail": "edit cues go through edit_cue"}]
            drafts = session.propose(strokes)
            registry.drafts[conn_id] = drafts
            payload = []
            for d in drafts:
                top3 = None
                p_b = None
                raw_c = 0.5
                if d.output is not None:
                    raw_c = d.output.confidence
                    p_b = d.output.p_b.tolist()
                    order_l = d.output.p_left.argsort()[::-1][:3]
                    order_r = d.output.p_right.argsort()[::-1][:3]
                    top3 = {
                        "left": [[session.vocab.names[i], float(d.output.p_left[i])] for i in order_l],
                        "right": [[session.vocab.names[i], float(d.output.p_right[i])] for i in order_r],
                    }
                payload.append({
                    "anchor": _anchor_payload(d.anchor),
                    "p_b": p_b,
                    "window": [d.output.window.start, d.output.window.end] if d.output else None,
                    "side_top3": top3,
                    "raw_confidence": raw_c,
                    "calibrated_confidence": session.adapt.calibration.calibrated(raw_c),
                })
            return [{"type": "proposal", "drafts": payload}]

        if mtype == "submit_verdict":
            drafts = registry.drafts.get(conn_id, [])
            idx = int(msg.get("draft_index", 0))
            if not drafts or idx >= len(drafts):
                return [{"type": "error", "code": "bad_request", "detail": "no pending draft"}]
            final = _anchor_from_payload(msg["final"]) if msg.get("final") else None
            try:
                session.verdict(drafts[idx], msg.get("verdict"), final=final)
            except ConstraintConflictError as exc:
                return [{"type": "conflict", "anchor_ids": list(exc.anchor_ids),
                         "detail": str(exc)}]
            seg = session.hypothesis_segments()
            return [{
                "type": "labeling_update",
                "segments": [{"start": s, "end": e, "label": l} for s, e, l in seg.segments],
                "anchors": [_anchor_payload(a) for a in session.anchors],
                "accepted": session.accepted,
            }]

        if mtype == "edit_cue":
            strokes = _strokes_from_wire(msg.get("strokes", []))
            if not strokes:
                return [{"type": "error", "code": "bad_request", "detail": "no strokes"}]
            session.edit_segment(strokes)
            seg = session.hypothesis_segments()
            return [{
                "type": "labeling_update",
                "segments": [{"start": s, "end": e, "label": l} for s, e, l in seg.segments],
                "anchors": [_anchor_payload(a) for a in session.anchors],
                "accepted": session.accepted,
            }]

        if mtype == "save":
            if registry.run_dir is None:
                return [{"type": "error", "code": "bad_request", "detail": "no run directory"}]
            registry.run_dir.mkdir(parents=True, exist_ok=True)
            seg = session.hypothesis_segments()
            snapshot = {
                "case": case_name,
                "segments": list(seg.segments),
                "anchors": [_anchor_payload(a) for a in session.anchors],
                "adaptation": json.loads(session.adapt.serialize()),
                "model_version": session.model.version,
            }
            (registry.run_dir / f"{conn_id}.snapshot.json").write_text(
                json.dumps(snapshot, sort_keys=True, indent=2), encoding="utf-8"
            )
            (registry.run_dir / f"{conn_id}.journal.jsonl").write_text(
                session.journal.to_jsonl(), encoding="utf-8"
            )
            return [snapshot_state(session, case_name)]
    except (GestureError, ValueError, KeyError, TypeError) as exc:
        return [{"type": "error", "code": "bad_request", "detail": str(exc)}]
    except ScribeloopError as exc:
        return [{"type": "error", "code": "internal", "detail": str(exc)}]
    return [{"type": "error", "code": "bad_request", "detail": "unhandled message"}]


def create_app(case_dir=None, cases: Optional[dict] = None,
               model_path=None, run_dir=None) -> FastAPI:
    if cases is None:
        loaded = harness.load_cases(case_dir, case_dir) if case_dir else []
        cases = {c.name: c for c in loaded}
    model = proposal.load_checkpoint(model_path) if model_path else None
    registry = SessionRegistry(cases, model=model, run_dir=run_dir)
    app = FastAPI(title="scribeloop session server")
    app.state.registry = registry

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/cases")
    def list_cases():
        return {
            "cases": [
                {
                    "name": name,
                    "num_frames": c.features.num_frames,
                    "dim": c.features.dim,
                    "vocab": list(c.vocab.names),
                }
                for name, c in sorted(registry.cases.items())
            ]
        }

    @app.get("/sessions/{conn_id}/journal")
    def get_journal(conn_id: str):
        entry = registry.sessions.get(conn_id)
        if entry is None:
            path = registry.run_dir / f"{conn_id}.journal.jsonl" if registry.run_dir else None
            if path is not None and path.exists():
                return {"journal": path.read_text(encoding="utf-8")}
            return {"error": "no_session"}
        return {"journal": entry[1].journal.to_jsonl()}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        conn_id = f"conn-{id(ws)}"
        await ws.send_text(json.dumps({"type": "hello", "session_id": conn_id}))
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    responses = [{"type": "error", "code": "bad_request",
                                  "detail": "invalid JSON"}]
                else:
                    responses = handle(registry, conn_id, msg)
                for resp in responses:
                    await ws.send_text(json.dumps(resp))
        except WebSocketDisconnect:
            pass

    return app


@click.command()
@click.option("--cases", "case_dir", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", default=None, type=click.Path(exists=True))
@click.option("--run-dir", default="runs", type=click.Path())
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8400, type=int)
def main(case_dir, model_path, run_dir, host, port):
    """Serve the annotation loop for the timeline UI."""
    import uvicorn

    app = create_app(case_dir=case_dir, model_path=model_path, run_dir=run_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()

import { describe, expect, it } from "vitest";

import {
    ClientMessage,
    ServerMessage,
    parseClientMessage,
    parseServerMessage,
    serializeMessage,
} from "../src/protocol.js";

const anchor = {
    start: 40, end: 60, cut: 50, y_left: 0, y_right: 2, id: 3, merge: false,
};

const clientMessages: ClientMessage[] = [
    { type: "open_session", case: "demo", budget: 6 },
    { type: "request_query" },
    {
        type: "submit_scribble",
        strokes: [[{ x: 10, y: 5, t: 10 }, { x: 20, y: 6, t: 20 }]],
    },
    { type: "submit_verdict", verdict: "accepted", draft_index: 0, final: null },
    { type: "submit_verdict", verdict: "edited", draft_index: 1, final: anchor },
    {
        type: "edit_cue",
        strokes: [[{ x: 12, y: 0, t: 12 }, { x: 12.4, y: 40, t: 12 }]],
    },
    { type: "save" },
];

const serverMessages: ServerMessage[] = [
    { type: "hello", session_id: "conn-1" },
    {
        type: "session_state",
        case: "demo",
        num_frames: 120,
        vocab: ["a", "b"],
        segments: [{ start: 0, end: 120, label: 0 }],
        anchors: [anchor],
        step: 2,
        accepted: 1,
        budget_remaining: 5,
        model_version: 1,
        energy: [0, 0.5, 1],
    },
    {
        type: "query",
        t_q: 57, window: [25, 90], priority: 1.8, utility: 0.9, cost: 0.5,
        provenance: "energy_peak",
    },
    {
        type: "proposal",
        drafts: [{
            anchor,
            p_b: [0.1, 0.7, 0.2],
            window: [48, 51],
            side_top3: { left: [["a", 0.8], ["b", 0.2]], right: [["b", 0.9], ["a", 0.1]] },
            raw_confidence: 0.7,
            calibrated_confidence: 0.64,
        }],
    },
    {
        type: "labeling_update",
        segments: [{ start: 0, end: 50, label: 0 }, { start: 50, end: 120, label: 2 }],
        anchors: [anchor],
        accepted: 2,
    },
    { type: "conflict", anchor_ids: [1, 2], detail: "conflicting protected cuts" },
    { type: "completed", accepted: 6 },
    { type: "error", code: "bad_request", detail: "no strokes" },
];

describe("protocol round-trip", () => {
    it.each(clientMessages.map((m) => [m.type, m] as const))(
        "client %s serializes and parses to identity",
        (_type, msg) => {
            expect(parseClientMessage(serializeMessage(msg))).toEqual(msg);
        },
    );

    it.each(serverMessages.map((m) => [m.type, m] as const))(
        "server %s serializes and parses to identity",
        (_type, msg) => {
            expect(parseServerMessage(serializeMessage(msg))).toEqual(msg);
        },
    );

    it("rejects unknown message types", () => {
        expect(() => parseServerMessage(JSON.stringify({ type: "nope" }))).toThrow();
        expect(() => parseClientMessage(JSON.stringify({ type: "nope" }))).toThrow();
    });

    it("rejects malformed payloads", () => {
        expect(() =>
            parseClientMessage(JSON.stringify({ type: "submit_scribble", strokes: [] })),
        ).toThrow();
        expect(() =>
            parseServerMessage(JSON.stringify({ type: "query", t_q: "not a frame" })),
        ).toThrow();
        expect(() =>
            parseClientMessage(JSON.stringify({ type: "save", extra: 1 })),
        ).toThrow();
    });
});

/**
 * UI session state: a mirror of the last server snapshot plus local
 * pending strokes and draft selection. The server is authoritative —
 * segments and anchors only ever change when a session_state or
 * labeling_update arrives; every other message leaves them untouched.
 */

import type {
    AnchorPayload,
    ClientMessage,
    DraftPayload,
    QueryMessage,
    SegmentPayload,
    ServerMessage,
    StrokesWire,
} from "./protocol.js";

export interface UiSessionState {
    sessionId: string | null;
    caseName: string | null;
    numFrames: number;
    vocab: readonly string[];
    segments: readonly SegmentPayload[];
    anchors: readonly AnchorPayload[];
    energy: readonly number[];
    step: number;
    accepted: number;
    budgetRemaining: number | null;
    modelVersion: number;
    pendingQuery: QueryMessage | null;
    drafts: readonly DraftPayload[];
    selectedDraft: number;
    pendingStrokes: StrokesWire | null;
    conflictAnchorIds: readonly number[];
    completed: boolean;
    errorBanner: string | null;
}

export function initialState(): UiSessionState {
    return {
        sessionId: null,
        caseName: null,
        numFrames: 0,
        vocab: [],
        segments: [],
        anchors: [],
        energy: [],
        step: 0,
        accepted: 0,
        budgetRemaining: null,
        modelVersion: 0,
        pendingQuery: null,
        drafts: [],
        selectedDraft: 0,
        pendingStrokes: null,
        conflictAnchorIds: [],
        completed: false,
        errorBanner: null,
    };
}

/** Pure reducer from a server message to the next UI state. */
export function applyMessage(state: UiSessionState, msg: ServerMessage): UiSessionState {
    switch (msg.type) {
        case "hello":
            return { ...state, sessionId: msg.session_id };
        case "session_state":
            return {
                ...state,
                caseName: msg.case,
                numFrames: msg.num_frames,
                vocab: msg.vocab,
                segments: msg.segments,
                anchors: msg.anchors,
                energy: msg.energy,
                step: msg.step,
                accepted: msg.accepted,
                budgetRemaining: msg.budget_remaining,
                modelVersion: msg.model_version,
                errorBanner: null,
            };
        case "query":
            return { ...state, pendingQuery: msg, drafts: [], selectedDraft: 0, errorBanner: null };
        case "proposal":
            return { ...state, drafts: msg.drafts, selectedDraft: 0, pendingStrokes: null, errorBanner: null };
        case "labeling_update":
            return {
                ...state,
                segments: msg.segments,
                anchors: msg.anchors,
                accepted: msg.accepted,
                budgetRemaining:
                    state.budgetRemaining === null
                        ? null
                        : Math.max(0, state.budgetRemaining - (msg.accepted - state.accepted)),
                drafts: [],
                selectedDraft: 0,
                pendingQuery: null,
                conflictAnchorIds: [],
                errorBanner: null,
            };
        case "conflict":
            return { ...state, conflictAnchorIds: msg.anchor_ids, errorBanner: msg.detail };
        case "completed":
            return { ...state, completed: true, pendingQuery: null, accepted: msg.accepted };
        case "error":
            // state preserved; the banner is the only change
            return { ...state, errorBanner: `${msg.code}: ${msg.detail}` };
    }
}

export type VerdictAction =
    | { kind: "accept" }
    | { kind: "reject" }
    | { kind: "edit"; final: AnchorPayload };

/**
 * Verdict controls: accept submits the displayed draft as-is; edit (cut
 * dragged or side labels re-picked) submits the adjusted anchor;
 * dismiss rejects. Requires a displayed draft.
 */
export function buildVerdict(state: UiSessionState, action: VerdictAction): ClientMessage {
    if (state.drafts.length === 0) {
        throw new Error("no draft proposal is displayed");
    }
    switch (action.kind) {
        case "accept":
            return { type: "submit_verdict", verdict: "accepted", draft_index: state.selectedDraft };
        case "reject":
            return { type: "submit_verdict", verdict: "rejected", draft_index: state.selectedDraft };
        case "edit":
            return {
                type: "submit_verdict",
                verdict: "edited",
                draft_index: state.selectedDraft,
                final: action.final,
            };
    }
}

/** Keyboard shortcuts for low-friction verdicts. */
export const verdictShortcuts: Record<string, VerdictAction["kind"]> = {
    a: "accept",
    r: "reject",
    e: "edit",
};

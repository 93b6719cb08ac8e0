/**
 * Wire protocol spoken with the session server: message schemas, a
 * discriminated union over every type, and serialize/parse helpers.
 * Serializing then parsing any valid message is the identity.
 */

import { z } from "zod";

export const anchorSchema = z.object({
    start: z.number().int(),
    end: z.number().int(),
    cut: z.number().int(),
    y_left: z.number().int(),
    y_right: z.number().int(),
    id: z.number().int(),
    merge: z.boolean(),
}).strict();
export type AnchorPayload = z.infer<typeof anchorSchema>;

export const segmentSchema = z.object({
    start: z.number().int(),
    end: z.number().int(),
    label: z.number().int(),
}).strict();
export type SegmentPayload = z.infer<typeof segmentSchema>;

export const strokePointSchema = z.object({
    x: z.number(),
    y: z.number(),
    t: z.number().int(),
}).strict();
export type StrokePoint = z.infer<typeof strokePointSchema>;

/** A scribble on the wire: a list of strokes, each a list of samples. */
export const strokesSchema = z.array(z.array(strokePointSchema).min(2)).min(1);
export type StrokesWire = z.infer<typeof strokesSchema>;

// -- client -> server ---------------------------------------------------

const openSessionSchema = z.object({
    type: z.literal("open_session"),
    case: z.string(),
    budget: z.number().int().positive().nullable().optional(),
}).strict();

const requestQuerySchema = z.object({
    type: z.literal("request_query"),
}).strict();

const submitScribbleSchema = z.object({
    type: z.literal("submit_scribble"),
    strokes: strokesSchema,
}).strict();

const submitVerdictSchema = z.object({
    type: z.literal("submit_verdict"),
    verdict: z.enum(["accepted", "rejected", "edited"]),
    draft_index: z.number().int().nonnegative().optional(),
    final: anchorSchema.nullable().optional(),
}).strict();

const editCueSchema = z.object({
    type: z.literal("edit_cue"),
    strokes: strokesSchema,
}).strict();

const saveSchema = z.object({
    type: z.literal("save"),
}).strict();

export const clientMessageSchema = z.discriminatedUnion("type", [
    openSessionSchema,
    requestQuerySchema,
    submitScribbleSchema,
    submitVerdictSchema,
    editCueSchema,
    saveSchema,
]);
export type ClientMessage = z.infer<typeof clientMessageSchema>;

// -- server -> client ---------------------------------------------------

const helloSchema = z.object({
    type: z.literal("hello"),
    session_id: z.string(),
}).strict();

const sessionStateSchema = z.object({
    type: z.literal("session_state"),
    case: z.string(),
    num_frames: z.number().int(),
    vocab: z.array(z.string()),
    segments: z.array(segmentSchema),
    anchors: z.array(anchorSchema),
    step: z.number().int(),
    accepted: z.number().int(),
    budget_remaining: z.number().int().nullable(),
    model_version: z.number().int(),
    energy: z.array(z.number()),
}).strict();

const querySchema = z.object({
    type: z.literal("query"),
    t_q: z.number().int(),
    window: z.tuple([z.number().int(), z.number().int()]),
    priority: z.number(),
    utility: z.number(),
    cost: z.number(),
    provenance: z.string(),
}).strict();

const draftSchema = z.object({
    anchor: anchorSchema,
    p_b: z.array(z.number()).nullable(),
    window: z.tuple([z.number().int(), z.number().int()]).nullable(),
    side_top3: z.object({
        left: z.array(z.tuple([z.string(), z.number()])),
        right: z.array(z.tuple([z.string(), z.number()])),
    }).nullable(),
    raw_confidence: z.number(),
    calibrated_confidence: z.number(),
}).strict();
export type DraftPayload = z.infer<typeof draftSchema>;

const proposalSchema = z.object({
    type: z.literal("proposal"),
    drafts: z.array(draftSchema),
}).strict();

const labelingUpdateSchema = z.object({
    type: z.literal("labeling_update"),
    segments: z.array(segmentSchema),
    anchors: z.array(anchorSchema),
    accepted: z.number().int(),
}).strict();

const conflictSchema = z.object({
    type: z.literal("conflict"),
    anchor_ids: z.array(z.number().int()),
    detail: z.string(),
}).strict();

const completedSchema = z.object({
    type: z.literal("completed"),
    accepted: z.number().int(),
}).strict();

const errorSchema = z.object({
    type: z.literal("error"),
    code: z.string(),
    detail: z.string(),
}).strict();

export const serverMessageSchema = z.discriminatedUnion("type", [
    helloSchema,
    sessionStateSchema,
    querySchema,
    proposalSchema,
    labelingUpdateSchema,
    conflictSchema,
    completedSchema,
    errorSchema,
]);
export type ServerMessage = z.infer<typeof serverMessageSchema>;
export type SessionState = z.infer<typeof sessionStateSchema>;
export type QueryMessage = z.infer<typeof querySchema>;
export type ProposalMessage = z.infer<typeof proposalSchema>;
export type LabelingUpdate = z.infer<typeof labelingUpdateSchema>;

export function serializeMessage(msg: ClientMessage | ServerMessage): string {
    return JSON.stringify(msg);
}

export function parseClientMessage(text: string): ClientMessage {
    return clientMessageSchema.parse(JSON.parse(text));
}

export function parseServerMessage(text: string): ServerMessage {
    return serverMessageSchema.parse(JSON.parse(text));
}

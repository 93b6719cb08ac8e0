/**
 * Scribble capture: pointer traces to the stroke wire form, plus a
 * local preview of the uncertain interval computed with the same
 * projection rule the server applies, so the preview never disagrees
 * with the encoding the backend derives.
 */

import type { StrokePoint, StrokesWire } from "./protocol.js";
import type { TimelineView } from "./timeline.js";

/** Aspect ratio at or below which a stroke reads as a vertical edit cue. */
export const TALL_RATIO = 0.5;

export interface PointerSample {
    x: number; // canvas px
    y: number; // canvas px
    timeStampMs: number;
}

/**
 * Map one pointer trace to a wire stroke. Samples outside the canvas
 * are dropped; a trace with fewer than 2 usable samples is discarded
 * (returns null so the caller can flash a visual cue).
 */
export function captureStroke(trace: readonly PointerSample[], view: TimelineView): StrokePoint[] | null {
    const points: StrokePoint[] = [];
    for (const s of trace) {
        if (!view.inCanvas(s.x)) {
            continue;
        }
        points.push({ x: s.x, y: s.y, t: view.frameAtPixel(s.x) });
    }
    return points.length >= 2 ? points : null;
}

export function captureScribble(traces: readonly (readonly PointerSample[])[], view: TimelineView): StrokesWire | null {
    const strokes: StrokePoint[][] = [];
    for (const trace of traces) {
        const stroke = captureStroke(trace, view);
        if (stroke !== null) {
            strokes.push(stroke);
        }
    }
    return strokes.length > 0 ? strokes : null;
}

// -- shared projection rule (mirrors the server) -------------------------

export interface FrameSpan {
    start: number;
    end: number; // exclusive
}

function aspectRatio(points: readonly StrokePoint[]): number {
    const xs = points.map((p) => p.x);
    const ys = points.map((p) => p.y);
    const width = Math.max(...xs) - Math.min(...xs);
    const height = Math.max(...ys) - Math.min(...ys);
    return height <= 0 ? Number.POSITIVE_INFINITY : width / height;
}

/** Inclusive frame range covered by the stroke, clipped to [0, T). */
export function projectStroke(points: readonly StrokePoint[], numFrames: number): FrameSpan | null {
    const ts = points.map((p) => p.t);
    const start = Math.max(0, Math.min(...ts));
    const end = Math.min(numFrames, Math.max(...ts) + 1);
    return end > start ? { start, end } : null;
}

/**
 * Uncertain interval of a stroke set: the projection of the widest
 * horizontal stroke (ties go to the earlier one). Returns null when no
 * stroke is horizontal, i.e. the set is a pure edit cue.
 */
export function uncertainInterval(strokes: StrokesWire, numFrames: number): FrameSpan | null {
    let best: FrameSpan | null = null;
    for (const stroke of strokes) {
        if (aspectRatio(stroke) <= TALL_RATIO) {
            continue;
        }
        const span = projectStroke(stroke, numFrames);
        if (span === null) {
            continue;
        }
        const len = span.end - span.start;
        if (
            best === null ||
            len > best.end - best.start ||
            (len === best.end - best.start && span.start < best.start)
        ) {
            best = span;
        }
    }
    return best;
}

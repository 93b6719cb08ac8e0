/**
 * Timeline geometry and render models. Everything here is pure data in
 * / data out so it can be unit-tested without a canvas; the drawing
 * layer consumes the computed spans, paths and marker positions.
 */

import type {
    AnchorPayload,
    DraftPayload,
    QueryMessage,
    SegmentPayload,
} from "./protocol.js";

export interface VisibleRange {
    start: number; // first visible frame (inclusive)
    end: number;   // one past the last visible frame
}

const palette = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
];

export function labelColor(label: number): string {
    return palette[((label % palette.length) + palette.length) % palette.length]!;
}

/**
 * Invertible frame-to-pixel mapping over the visible range plus the
 * derived render models for every track.
 */
export class TimelineView {
    constructor(
        public readonly numFrames: number,
        public readonly widthPx: number,
        public visible: VisibleRange = { start: 0, end: numFrames },
    ) {
        if (numFrames < 2 || widthPx <= 0) {
            throw new Error(`bad timeline geometry: T=${numFrames}, width=${widthPx}`);
        }
        this.setVisible(visible);
    }

    setVisible(range: VisibleRange): void {
        const start = Math.max(0, Math.floor(range.start));
        const end = Math.min(this.numFrames, Math.ceil(range.end));
        if (end - start < 1) {
            throw new Error(`visible range [${range.start}, ${range.end}) is empty`);
        }
        this.visible = { start, end };
    }

    get pixelsPerFrame(): number {
        return this.widthPx / (this.visible.end - this.visible.start);
    }

    frameToPixel(frame: number): number {
        return (frame - this.visible.start) * this.pixelsPerFrame;
    }

    pixelToFrame(px: number): number {
        return this.visible.start + px / this.pixelsPerFrame;
    }

    /** Nearest visible frame index for a pointer x coordinate. */
    frameAtPixel(px: number): number {
        const f = Math.floor(this.pixelToFrame(px));
        return Math.min(this.visible.end - 1, Math.max(this.visible.start, f));
    }

    inCanvas(px: number): boolean {
        return px >= 0 && px <= this.widthPx;
    }

    /** Colored spans for the segment track; off-screen segments are dropped. */
    segmentSpans(segments: readonly SegmentPayload[]): Array<{
        x: number; width: number; label: number; color: string;
    }> {
        const spans = [];
        for (const seg of segments) {
            const lo = Math.max(seg.start, this.visible.start);
            const hi = Math.min(seg.end, this.visible.end);
            if (hi <= lo) {
                continue;
            }
            spans.push({
                x: this.frameToPixel(lo),
                width: (hi - lo) * this.pixelsPerFrame,
                label: seg.label,
                color: labelColor(seg.label),
            });
        }
        return spans;
    }

    /** Polyline for the energy track, one point per visible frame. */
    energyPath(energy: readonly number[], heightPx: number): Array<{ x: number; y: number }> {
        const path = [];
        for (let f = this.visible.start; f < this.visible.end; f++) {
            const e = Math.min(1, Math.max(0, energy[f] ?? 0));
            path.push({ x: this.frameToPixel(f + 0.5), y: heightPx * (1 - e) });
        }
        return path;
    }

    queryMarker(query: QueryMessage): { x: number; windowX: number; windowWidth: number } {
        return {
            x: this.frameToPixel(query.t_q),
            windowX: this.frameToPixel(query.window[0]),
            windowWidth: (query.window[1] - query.window[0]) * this.pixelsPerFrame,
        };
    }

    anchorMarkers(anchors: readonly AnchorPayload[], highlight: readonly number[] = []): Array<{
        x: number; spanX: number; spanWidth: number; id: number; conflicting: boolean;
    }> {
        const hot = new Set(highlight);
        return anchors.map((a) => ({
            x: this.frameToPixel(a.cut),
            spanX: this.frameToPixel(a.start),
            spanWidth: (a.end + 1 - a.start) * this.pixelsPerFrame,
            id: a.id,
            conflicting: hot.has(a.id),
        }));
    }

    /** Overlay model for a draft proposal: p_b curve, cut line, side picks. */
    proposalOverlay(draft: DraftPayload, heightPx: number): {
        cutX: number;
        curve: Array<{ x: number; y: number }>;
        sideTop3: DraftPayload["side_top3"];
        confidence: number;
    } {
        const curve = [];
        if (draft.p_b !== null && draft.window !== null) {
            const [w0] = draft.window;
            const peak = Math.max(...draft.p_b, 1e-12);
            for (let i = 0; i < draft.p_b.length; i++) {
                curve.push({
                    x: this.frameToPixel(w0 + i + 0.5),
                    y: heightPx * (1 - draft.p_b[i]! / peak),
                });
            }
        }
        return {
            cutX: this.frameToPixel(draft.anchor.cut),
            curve,
            sideTop3: draft.side_top3,
            confidence: draft.calibrated_confidence,
        };
    }
}

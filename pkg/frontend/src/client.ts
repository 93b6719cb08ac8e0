/**
 * Session client over one persistent socket. The server answers every
 * client message with at least one response on the same connection and
 * a connection owns at most one session, so a simple in-order request
 * queue is sufficient — no correlation ids needed.
 */

import {
    AnchorPayload,
    ClientMessage,
    ServerMessage,
    SessionState,
    StrokesWire,
    parseServerMessage,
    serializeMessage,
} from "./protocol.js";

/** The subset of the WebSocket surface the client needs (browser or `ws`). */
export interface SocketLike {
    send(data: string): void;
    close(): void;
    addEventListener(event: "message", handler: (ev: { data: unknown }) => void): void;
    addEventListener(event: "close", handler: () => void): void;
}

export class SessionClient {
    private inbox: ServerMessage[] = [];
    private waiters: Array<(msg: ServerMessage) => void> = [];
    private closed = false;

    constructor(private readonly socket: SocketLike) {
        socket.addEventListener("message", (ev) => {
            this.dispatch(parseServerMessage(String(ev.data)));
        });
        socket.addEventListener("close", () => {
            this.closed = true;
        });
    }

    private dispatch(msg: ServerMessage): void {
        const waiter = this.waiters.shift();
        if (waiter !== undefined) {
            waiter(msg);
        } else {
            this.inbox.push(msg);
        }
    }

    /** Next server message, in arrival order. */
    next(): Promise<ServerMessage> {
        const queued = this.inbox.shift();
        if (queued !== undefined) {
            return Promise.resolve(queued);
        }
        if (this.closed) {
            return Promise.reject(new Error("connection closed"));
        }
        return new Promise((resolve) => this.waiters.push(resolve));
    }

    /** Send one message and await its (single) response. */
    async request(msg: ClientMessage): Promise<ServerMessage> {
        this.socket.send(serializeMessage(msg));
        return this.next();
    }

    private async expect<T extends ServerMessage["type"]>(
        msg: ClientMessage,
        type: T,
    ): Promise<Extract<ServerMessage, { type: T }>> {
        const reply = await this.request(msg);
        if (reply.type !== type) {
            throw new Error(`expected ${type}, got ${reply.type}: ${JSON.stringify(reply)}`);
        }
        return reply as Extract<ServerMessage, { type: T }>;
    }

    hello(): Promise<ServerMessage> {
        return this.next();
    }

    openSession(caseName: string, budget: number | null = null): Promise<SessionState> {
        return this.expect({ type: "open_session", case: caseName, budget }, "session_state");
    }

    requestQuery(): Promise<ServerMessage> {
        return this.request({ type: "request_query" });
    }

    submitScribble(strokes: StrokesWire): Promise<ServerMessage> {
        return this.request({ type: "submit_scribble", strokes });
    }

    submitVerdict(
        verdict: "accepted" | "rejected" | "edited",
        draftIndex = 0,
        final: AnchorPayload | null = null,
    ): Promise<ServerMessage> {
        return this.request({
            type: "submit_verdict",
            verdict,
            draft_index: draftIndex,
            final,
        });
    }

    editCue(strokes: StrokesWire): Promise<ServerMessage> {
        return this.request({ type: "edit_cue", strokes });
    }

    save(): Promise<SessionState> {
        return this.expect({ type: "save" }, "session_state");
    }

    close(): void {
        this.socket.close();
    }
}

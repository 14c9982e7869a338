/**
 * Snapshot subscription over server-sent events.
 *
 * On connect (and on every reconnect) the monitor pushes the current full
 * snapshot first, so rendering is always whole-state.  Missed sequence
 * numbers are detected and answered with a one-shot /state refetch; drops
 * reconnect with exponential backoff and surface a stale-data status.
 */
import { parseSnapshot, SchemaVersionError } from "./schema.js";
export class SnapshotStream {
    constructor(options) {
        this.options = options;
        this.source = null;
        this.lastSeq = null;
        this.closed = false;
        this.base = options.baseBackoffMs ?? 1000;
        this.max = options.maxBackoffMs ?? 30000;
        this.backoffMs = this.base;
        this.schedule =
            options.schedule ?? ((fn, delay) => setTimeout(fn, delay));
    }
    connect() {
        if (this.closed)
            return;
        this.status({ state: "connecting" });
        this.source = this.options.makeSource(`${this.options.endpoint}/events`);
        this.source.onopen = () => {
            this.backoffMs = this.base;
        };
        this.source.addEventListener("snapshot", (event) => this.handleFrame(event.data));
        this.source.onerror = () => this.handleDrop();
    }
    close() {
        this.closed = true;
        this.source?.close();
        this.source = null;
    }
    status(status) {
        this.options.onStatus?.(status);
    }
    handleFrame(data) {
        let snapshot;
        try {
            snapshot = parseSnapshot(JSON.parse(data));
        }
        catch (error) {
            if (error instanceof SchemaVersionError) {
                this.status({ state: "incompatible", detail: error.message });
                this.close();
                return;
            }
            return; // malformed frame: skip, the next snapshot is self-contained
        }
        const gap = this.lastSeq !== null && snapshot.seq > this.lastSeq + 1;
        this.lastSeq = snapshot.seq;
        this.status({ state: "live" });
        this.options.onSnapshot(snapshot);
        if (gap) {
            void this.resync();
        }
    }
    /** Missed events: fetch the authoritative current state once. */
    async resync() {
        try {
            const raw = await this.options.fetchState(`${this.options.endpoint}/state`);
            const snapshot = parseSnapshot(raw);
            if (this.lastSeq === null || snapshot.seq >= this.lastSeq) {
                this.lastSeq = snapshot.seq;
                this.options.onSnapshot(snapshot);
            }
        }
        catch {
            // resync is best-effort; the stream keeps delivering full snapshots
        }
    }
    handleDrop() {
        if (this.closed)
            return;
        this.source?.close();
        this.source = null;
        this.status({
            state: "stale",
            detail: `reconnecting in ${Math.round(this.backoffMs / 1000)}s`,
        });
        const delay = this.backoffMs;
        this.backoffMs = Math.min(this.backoffMs * 2, this.max);
        this.schedule(() => this.connect(), delay);
    }
}

/**
 * Snapshot subscription over server-sent events.
 *
 * On connect (and on every reconnect) the monitor pushes the current full
 * snapshot first, so rendering is always whole-state.  Missed sequence
 * numbers are detected and answered with a one-shot /state refetch; drops
 * reconnect with exponential backoff and surface a stale-data status.
 */

import { parseSnapshot, SchemaVersionError, type Snapshot } from "./schema.js";

/** Structural shim over the DOM EventSource; `any` on the handler slots
 * keeps the browser type assignable under strictFunctionTypes. */
export interface EventSourceLike {
  // eslint-disable-next-line @typescript-eslint/no-explicit-any
  onerror: ((event?: any) => void) | null;
  // eslint-disable-next-line @typescript-eslint/no-explicit-any
  onopen: ((event?: any) => void) | null;
  addEventListener(type: string, listener: (event: { data: string }) => void): void;
  close(): void;
}

export interface StreamStatus {
  state: "connecting" | "live" | "stale" | "incompatible";
  detail?: string;
}

export interface StreamOptions {
  endpoint: string;
  makeSource: (url: string) => EventSourceLike;
  fetchState: (url: string) => Promise<unknown>;
  onSnapshot: (snapshot: Snapshot) => void;
  onStatus?: (status: StreamStatus) => void;
  schedule?: (fn: () => void, delayMs: number) => void;
  baseBackoffMs?: number;
  maxBackoffMs?: number;
}

export class SnapshotStream {
  private source: EventSourceLike | null = null;
  private lastSeq: number | null = null;
  private backoffMs: number;
  private readonly base: number;
  private readonly max: number;
  private readonly schedule: (fn: () => void, delayMs: number) => void;
  private closed = false;

  constructor(private readonly options: StreamOptions) {
    this.base = options.baseBackoffMs ?? 1000;
    this.max = options.maxBackoffMs ?? 30_000;
    this.backoffMs = this.base;
    this.schedule =
      options.schedule ?? ((fn, delay) => setTimeout(fn, delay) as unknown as void);
  }

  connect(): void {
    if (this.closed) return;
    this.status({ state: "connecting" });
    this.source = this.options.makeSource(`${this.options.endpoint}/events`);
    this.source.onopen = () => {
      this.backoffMs = this.base;
    };
    this.source.addEventListener("snapshot", (event) => this.handleFrame(event.data));
    this.source.onerror = () => this.handleDrop();
  }

  close(): void {
    this.closed = true;
    this.source?.close();
    this.source = null;
  }

  private status(status: StreamStatus): void {
    this.options.onStatus?.(status);
  }

  private handleFrame(data: string): void {
    let snapshot: Snapshot;
    try {
      snapshot = parseSnapshot(JSON.parse(data));
    } catch (error) {
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
  private async resync(): Promise<void> {
    try {
      const raw = await this.options.fetchState(`${this.options.endpoint}/state`);
      const snapshot = parseSnapshot(raw);
      if (this.lastSeq === null || snapshot.seq >= this.lastSeq) {
        this.lastSeq = snapshot.seq;
        this.options.onSnapshot(snapshot);
      }
    } catch {
      // resync is best-effort; the stream keeps delivering full snapshots
    }
  }

  private handleDrop(): void {
    if (this.closed) return;
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

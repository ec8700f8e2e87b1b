// NDJSON stream client: one JSON event per line over a long-lived GET.
//
// The gateway pushes {sample, alert_raised, alert_cleared,
// profile_changed} events; a dropped stream flips the dashboard into
// its stale presentation and reconnects with exponential backoff.

import type { StreamEvent } from "./types.js";

export type StreamStatus = "connecting" | "live" | "disconnected";

export interface StreamOptions {
  onEvent: (event: StreamEvent) => void;
  onStatus?: (status: StreamStatus) => void;
  fetchImpl?: typeof fetch;
  scheduleImpl?: (fn: () => void, delayMs: number) => unknown;
  initialBackoffMs?: number;
  maxBackoffMs?: number;
}

/** Split a byte stream into complete lines, buffering partials. */
export class LineSplitter {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    const parts = this.buffer.split("\n");
    this.buffer = parts.pop() ?? "";
    return parts.filter((line) => line.trim().length > 0);
  }
}

export function parseEventLine(line: string): StreamEvent | null {
  try {
    const event = JSON.parse(line) as StreamEvent;
    return typeof event === "object" && event !== null && "type" in event ? event : null;
  } catch {
    return null; // a malformed line never kills the stream
  }
}

export class NdjsonStreamClient {
  private readonly url: string;
  private readonly onEvent: (event: StreamEvent) => void;
  private readonly onStatus: (status: StreamStatus) => void;
  private readonly fetchImpl: typeof fetch;
  private readonly schedule: (fn: () => void, delayMs: number) => unknown;
  private readonly initialBackoffMs: number;
  private readonly maxBackoffMs: number;
  private backoffMs: number;
  private stopped = false;

  constructor(url: string, options: StreamOptions) {
    this.url = url;
    this.onEvent = options.onEvent;
    this.onStatus = options.onStatus ?? (() => undefined);
    this.fetchImpl = options.fetchImpl ?? fetch.bind(globalThis);
    this.schedule =
      options.scheduleImpl ?? ((fn, delay) => setTimeout(fn, delay));
    this.initialBackoffMs = options.initialBackoffMs ?? 1000;
    this.maxBackoffMs = options.maxBackoffMs ?? 15000;
    this.backoffMs = this.initialBackoffMs;
  }

  start(): void {
    void this.connect();
  }

  stop(): void {
    this.stopped = true;
  }

  /** Current reconnect delay (exposed for tests). */
  get currentBackoffMs(): number {
    return this.backoffMs;
  }

  private async connect(): Promise<void> {
    if (this.stopped) return;
    this.onStatus("connecting");
    try {
      const response = await this.fetchImpl(this.url);
      if (!response.ok || response.body === null) {
        throw new Error(`stream HTTP ${response.status}`);
      }
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      const splitter = new LineSplitter();
      this.onStatus("live");
      for (;;) {
        const { done, value } = await reader.read();
        if (this.stopped) {
          await reader.cancel().catch(() => undefined);
          return;
        }
        if (done) break;
        for (const line of splitter.push(decoder.decode(value, { stream: true }))) {
          const event = parseEventLine(line);
          if (event) {
            this.backoffMs = this.initialBackoffMs; // healthy again
            this.onEvent(event);
          }
        }
      }
    } catch {
      // fall through to reconnect
    }
    if (this.stopped) return;
    this.onStatus("disconnected");
    const delay = this.backoffMs;
    this.backoffMs = Math.min(this.backoffMs * 2, this.maxBackoffMs);
    this.schedule(() => void this.connect(), delay);
  }
}

/** Server-sent events over fetch streaming.
 *
 * Implemented on ReadableStream rather than EventSource so the same code
 * runs in browsers and in node-based tests. Reconnects automatically; the
 * service replays a full snapshot event on every (re)connect, so a killed
 * and restored stream recovers the complete chart history.
 */

import type { StreamEvent } from "./types.js";

export interface StreamHandlers {
  onEvent: (event: StreamEvent) => void;
  onConnectionChange?: (connected: boolean) => void;
}

export function parseSseChunk(buffer: string): { events: string[]; rest: string } {
  const events: string[] = [];
  let start = 0;
  for (;;) {
    const end = buffer.indexOf("\n\n", start);
    if (end < 0) {
      break;
    }
    events.push(buffer.slice(start, end));
    start = end + 2;
  }
  return { events, rest: buffer.slice(start) };
}

export function parseSseEvent(block: string): StreamEvent | null {
  const dataLines: string[] = [];
  for (const line of block.split("\n")) {
    if (line.startsWith("data:")) {
      dataLines.push(line.slice(5).trimStart());
    }
    // comment lines (": keepalive") and event: lines need no handling;
    // the payload carries its own type field
  }
  if (!dataLines.length) {
    return null;
  }
  try {
    return JSON.parse(dataLines.join("\n")) as StreamEvent;
  } catch {
    return null;
  }
}

export class EventStream {
  private stopped = false;
  private abort: AbortController | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly handlers: StreamHandlers,
    private readonly fetchFn: typeof fetch = fetch,
    private readonly reconnectDelayMs = 1000,
  ) {}

  start(): void {
    this.stopped = false;
    void this.loop();
  }

  stop(): void {
    this.stopped = true;
    this.abort?.abort();
  }

  private async loop(): Promise<void> {
    while (!this.stopped) {
      try {
        await this.consumeOnce();
      } catch {
        // drop through to reconnect
      }
      this.handlers.onConnectionChange?.(false);
      if (this.stopped) {
        return;
      }
      await new Promise((resolve) => setTimeout(resolve, this.reconnectDelayMs));
    }
  }

  private async consumeOnce(): Promise<void> {
    this.abort = new AbortController();
    const response = await this.fetchFn(`${this.baseUrl}/api/v1/stream`, {
      signal: this.abort.signal,
      headers: { accept: "text/event-stream" },
    });
    if (!response.ok || !response.body) {
      throw new Error(`stream failed: HTTP ${response.status}`);
    }
    this.handlers.onConnectionChange?.(true);
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) {
        return;
      }
      buffer += decoder.decode(value, { stream: true });
      const { events, rest } = parseSseChunk(buffer);
      buffer = rest;
      for (const block of events) {
        const event = parseSseEvent(block);
        if (event) {
          this.handlers.onEvent(event);
        }
      }
    }
  }
}

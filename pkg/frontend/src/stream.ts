// Live event feed: newline-delimited JSON over a streaming GET, with
// reconnect backoff and gap detection by window index. The panel never
// invents rows; it renders exactly what arrives, plus gap markers.

import type { StreamFrame } from './types.js';

export interface StreamCallbacks {
  onFrame(frame: StreamFrame): void;
  onGap(fromWindow: number, toWindow: number): void;
  onConnection(connected: boolean): void;
  onServerClose?(reason: string): void;
}

export class LineDecoder {
  private tail = '';

  push(chunk: string): string[] {
    const data = this.tail + chunk;
    const lines = data.split('\n');
    this.tail = lines.pop() ?? '';
    return lines.filter((line) => line.trim().length > 0);
  }
}

export interface StreamOptions {
  initialBackoffMs?: number;
  maxBackoffMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class EventStream {
  lastWindow: number | null = null;
  private running = false;
  private backoffMs: number;
  private readonly initialBackoffMs: number;
  private readonly maxBackoffMs: number;
  private readonly sleep: (ms: number) => Promise<void>;

  constructor(
    private base: string,
    private callbacks: StreamCallbacks,
    private fetcher: typeof fetch = fetch,
    options: StreamOptions = {},
  ) {
    this.initialBackoffMs = options.initialBackoffMs ?? 500;
    this.maxBackoffMs = options.maxBackoffMs ?? 8000;
    this.backoffMs = this.initialBackoffMs;
    this.sleep = options.sleep ?? defaultSleep;
  }

  start(): Promise<void> {
    this.running = true;
    return this.loop();
  }

  stop(): void {
    this.running = false;
  }

  handleLine(line: string): void {
    let payload: StreamFrame & { close_reason?: string };
    try {
      payload = JSON.parse(line);
    } catch {
      return; // keepalive noise
    }
    if (payload.close_reason !== undefined) {
      this.callbacks.onServerClose?.(payload.close_reason);
      return;
    }
    if (typeof payload.window !== 'number') return;
    if (this.lastWindow !== null && payload.window > this.lastWindow + 1) {
      this.callbacks.onGap(this.lastWindow + 1, payload.window - 1);
    }
    this.lastWindow = payload.window;
    this.callbacks.onFrame(payload);
  }

  private async loop(): Promise<void> {
    while (this.running) {
      let connected = false;
      try {
        const resp = await this.fetcher(this.base + '/events');
        if (!resp.ok || !resp.body) throw new Error(`HTTP ${resp.status}`);
        connected = true;
        this.backoffMs = this.initialBackoffMs;
        this.callbacks.onConnection(true);
        const reader = resp.body.getReader();
        const decoder = new TextDecoder();
        const lines = new LineDecoder();
        for (;;) {
          const { done, value } = await reader.read();
          if (done || !this.running) break;
          for (const line of lines.push(decoder.decode(value, { stream: true }))) {
            this.handleLine(line);
          }
        }
      } catch {
        // fall through to reconnect
      }
      if (connected) this.callbacks.onConnection(false);
      if (!this.running) return;
      await this.sleep(this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, this.maxBackoffMs);
    }
  }
}

/**
 * Reconnecting WebSocket client. Each (re)connection is a fresh protocol
 * session: new FrameWriter (seq restarts), fresh hello, and the first
 * snapshot after a reconnect is always complete, so no client-side
 * catch-up is needed.
 */

import { FrameWriter, HumanCommand, parseFrame, Envelope } from './protocol.js';

export interface NetEvents {
  onOpen(): void;
  onMessage(env: Envelope): void;
  onClose(willRetry: boolean): void;
}

export class Backoff {
  private attempt = 0;

  constructor(private baseMs = 250, private capMs = 5000, private maxRetries = 30) {}

  nextDelay(): number | null {
    if (this.attempt >= this.maxRetries) return null;
    const delay = Math.min(this.capMs, this.baseMs * 2 ** this.attempt);
    this.attempt += 1;
    return delay;
  }

  reset(): void {
    this.attempt = 0;
  }
}

export class SyncClient {
  private ws: WebSocket | null = null;
  private writer = new FrameWriter();
  private backoff = new Backoff();
  private closed = false;

  constructor(private url: string, private events: NetEvents) {}

  connect(): void {
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.backoff.reset();
      this.writer = new FrameWriter();
      this.ws?.send(this.writer.hello());
      this.events.onOpen();
    };
    this.ws.onmessage = (ev) => {
      const env = parseFrame(String(ev.data));
      if (env) this.events.onMessage(env);
    };
    this.ws.onclose = () => {
      if (this.closed) return;
      const delay = this.backoff.nextDelay();
      this.events.onClose(delay !== null);
      if (delay !== null) {
        setTimeout(() => this.connect(), delay);
      }
    };
    this.ws.onerror = () => {
      this.ws?.close();
    };
  }

  sendCommand(cmd: HumanCommand): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(this.writer.command(cmd));
    }
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}

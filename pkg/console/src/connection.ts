// WebSocket wrapper: JSON framing, auto-reconnect with backoff, and an
// injectable socket factory so tests can run against fakes or node sockets.

import type { Frame, OutboundFrame } from "./types.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: ((err: unknown) => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ConnectionHandlers {
  onFrame(frame: Frame): void;
  onOpen?(): void;
  onClose?(willRetry: boolean): void;
  onSendFailure?(frame: OutboundFrame): void;
}

const RECONNECT_DELAYS_MS = [500, 1000, 2000, 5000];

export class ConsoleConnection {
  private socket: SocketLike | null = null;
  private attempts = 0;
  private closed = false;
  private open = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly url: string,
    private readonly handlers: ConnectionHandlers,
    private readonly factory: SocketFactory = (u) =>
      new WebSocket(u) as unknown as SocketLike,
  ) {}

  connect(): void {
    this.closed = false;
    this.dial();
  }

  private dial(): void {
    let socket: SocketLike;
    try {
      socket = this.factory(this.url);
    } catch {
      this.scheduleRetry();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      this.open = true;
      this.handlers.onOpen?.();
    };
    socket.onmessage = (event) => {
      let frame: Frame;
      try {
        frame = JSON.parse(String(event.data)) as Frame;
      } catch {
        return; // tolerate garbage; the server never sends it
      }
      this.handlers.onFrame(frame);
    };
    socket.onerror = () => {
      /* onclose always follows */
    };
    socket.onclose = () => {
      this.open = false;
      this.socket = null;
      if (this.closed) {
        this.handlers.onClose?.(false);
        return;
      }
      this.handlers.onClose?.(true);
      this.scheduleRetry();
    };
  }

  private scheduleRetry(): void {
    const delay =
      RECONNECT_DELAYS_MS[Math.min(this.attempts, RECONNECT_DELAYS_MS.length - 1)];
    this.attempts += 1;
    this.timer = setTimeout(() => this.dial(), delay);
  }

  get isOpen(): boolean {
    return this.open;
  }

  /** Send a frame; returns false (and reports) when the link is down. */
  send(frame: OutboundFrame): boolean {
    if (!this.socket || !this.open) {
      this.handlers.onSendFailure?.(frame);
      return false;
    }
    try {
      this.socket.send(JSON.stringify(frame));
      return true;
    } catch {
      this.handlers.onSendFailure?.(frame);
      return false;
    }
  }

  close(): void {
    this.closed = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.socket?.close();
  }
}

// Live session client: owns the socket, the latest-frames ring buffer and
// the telemetry series. Rendered state only ever comes from received frame
// messages; commands go out as throttled full-snapshot messages.

import type { CommandState, FrameMessage, ServerMessage } from "./types.js";

export type SessionStatus = "idle" | "connecting" | "open" | "retrying" | "closed";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface SessionOptions {
  socketFactory?: SocketFactory;
  maxSendHz?: number;       // command messages per second on input change
  bufferSize?: number;      // latest-frame ring buffer length
  telemetrySize?: number;
  retryBaseMs?: number;
  retryMaxMs?: number;
  now?: () => number;       // injectable clock for tests
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (id: unknown) => void;
}

export interface Telemetry {
  t: number[];
  slipPre: number[];
  slipPost: number[];
  uPrime: number[][];
}

export class SessionClient {
  status: SessionStatus = "idle";
  gco = true;
  frames: FrameMessage[] = []; // ring buffer, newest last
  telemetry: Telemetry = { t: [], slipPre: [], slipPost: [], uPrime: [] };
  attempts = 0;
  lastError: string | null = null;
  onframe: ((frame: FrameMessage) => void) | null = null;
  onstatus: ((status: SessionStatus) => void) | null = null;

  private socket: SocketLike | null = null;
  private readonly factory: SocketFactory;
  private readonly minSendInterval: number;
  private readonly bufferSize: number;
  private readonly telemetrySize: number;
  private readonly retryBaseMs: number;
  private readonly retryMaxMs: number;
  private readonly now: () => number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;
  private readonly clearTimer: (id: unknown) => void;
  private lastSendAt = -Infinity;
  private pendingCommand: CommandState | null = null;
  private sendTimer: unknown = null;
  private retryTimer: unknown = null;
  private closedByUser = false;

  constructor(private readonly url: string, options: SessionOptions = {}) {
    const g = globalThis as Record<string, unknown>;
    this.factory =
      options.socketFactory ?? ((u: string) => new (g.WebSocket as new (u: string) => SocketLike)(u));
    this.minSendInterval = 1000 / (options.maxSendHz ?? 50);
    this.bufferSize = options.bufferSize ?? 256;
    this.telemetrySize = options.telemetrySize ?? 600;
    this.retryBaseMs = options.retryBaseMs ?? 500;
    this.retryMaxMs = options.retryMaxMs ?? 10_000;
    this.now = options.now ?? (() => Date.now());
    this.setTimer = options.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.clearTimer = options.clearTimer ?? ((id) => clearTimeout(id as Parameters<typeof clearTimeout>[0]));
  }

  connect(): void {
    this.closedByUser = false;
    this.openSocket();
  }

  private openSocket(): void {
    this.setStatus(this.attempts > 0 ? "retrying" : "connecting");
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      this.setStatus("open");
      this.sendGco();
    };
    socket.onmessage = (ev) => this.handleMessage(ev.data);
    socket.onerror = () => {
      this.lastError = "socket error";
    };
    socket.onclose = () => {
      this.socket = null;
      if (this.closedByUser) {
        this.setStatus("closed");
        return;
      }
      this.scheduleRetry();
    };
  }

  private scheduleRetry(): void {
    this.setStatus("retrying");
    const delay = Math.min(this.retryBaseMs * 2 ** this.attempts, this.retryMaxMs);
    this.attempts += 1;
    this.retryTimer = this.setTimer(() => this.openSocket(), delay);
  }

  close(): void {
    this.closedByUser = true;
    if (this.retryTimer !== null) this.clearTimer(this.retryTimer);
    if (this.sendTimer !== null) this.clearTimer(this.sendTimer);
    this.socket?.close();
    this.setStatus("closed");
  }

  private setStatus(status: SessionStatus): void {
    this.status = status;
    this.onstatus?.(status);
  }

  private handleMessage(data: string): void {
    let msg: ServerMessage;
    try {
      msg = JSON.parse(data) as ServerMessage;
    } catch {
      this.lastError = "unparseable message";
      return;
    }
    if (msg.type === "error") {
      this.lastError = `${msg.code}: ${msg.detail}`;
      return;
    }
    if (msg.type !== "frame" || !Array.isArray(msg.q_ref)) {
      this.lastError = "unexpected message shape";
      return;
    }
    this.frames.push(msg);
    if (this.frames.length > this.bufferSize) this.frames.shift();
    const tel = this.telemetry;
    tel.t.push(msg.t);
    tel.slipPre.push(msg.slip_pre);
    tel.slipPost.push(msg.slip_post);
    if (msg.u_prime) tel.uPrime.push(msg.u_prime);
    while (tel.t.length > this.telemetrySize) {
      tel.t.shift();
      tel.slipPre.shift();
      tel.slipPost.shift();
      if (tel.uPrime.length > tel.t.length) tel.uPrime.shift();
    }
    this.onframe?.(msg);
  }

  get latest(): FrameMessage | null {
    return this.frames.length ? this.frames[this.frames.length - 1] : null;
  }

  /** Queue a full command snapshot; sends immediately when under the rate cap,
   * else coalesces to a trailing send (latest wins). */
  setCommand(cmd: CommandState): void {
    this.pendingCommand = { ...cmd };
    const elapsed = this.now() - this.lastSendAt;
    if (elapsed >= this.minSendInterval) {
      this.flushCommand();
    } else if (this.sendTimer === null) {
      this.sendTimer = this.setTimer(() => {
        this.sendTimer = null;
        this.flushCommand();
      }, this.minSendInterval - elapsed);
    }
  }

  private flushCommand(): void {
    if (!this.pendingCommand || this.status !== "open" || !this.socket) return;
    const c = this.pendingCommand;
    this.pendingCommand = null;
    this.lastSendAt = this.now();
    this.socket.send(
      JSON.stringify({
        type: "command",
        t_client: this.now() / 1000,
        vx: c.vx, vy: c.vy, wz: c.wz,
        pitch: c.pitch, roll: c.roll, height: c.height,
      }),
    );
  }

  setGco(on: boolean): void {
    this.gco = on;
    this.sendGco();
  }

  private sendGco(): void {
    if (this.status === "open" && this.socket) {
      this.socket.send(JSON.stringify({ type: "config", gco: this.gco }));
    }
  }
}

/** Console session: one connection, the latest state frame, and outbound
 * command handling. The console owns no physics; everything rendered comes
 * from the most recent validated frame. */

import {
  encodeClientFrame,
  parseServerFrame,
  type ClientFrame,
  type ErrorFrame,
  type StateFrame,
  type TargetFrame,
} from "./protocol.js";
import {
  ReconnectingSocket,
  type ConnectionStatus,
  type ReconnectOptions,
  type SocketFactory,
} from "./socket.js";

export const TARGET_INTERVAL_MS = 1000 / 60;

export interface SessionOptions extends ReconnectOptions {
  /** Injectable clock for tests; defaults to Date.now. */
  now?: () => number;
}

export class ConsoleSession {
  latest: StateFrame | null = null;
  lastError: ErrorFrame | null = null;
  droppedFrames = 0;
  mode: "policy" | "manual" = "policy";

  onState: ((frame: StateFrame) => void) | null = null;
  onError: ((frame: ErrorFrame) => void) | null = null;
  onStatus: ((status: ConnectionStatus) => void) | null = null;

  private readonly socket: ReconnectingSocket;
  private readonly now: () => number;
  private lastTargetAt = -Infinity;
  private pendingTarget: TargetFrame | null = null;

  constructor(url: string, factory: SocketFactory, options: SessionOptions = {}) {
    this.now = options.now ?? (() => Date.now());
    this.socket = new ReconnectingSocket(url, factory, options);
    this.socket.onFrame = (text) => this.receive(text);
    this.socket.onStatus = (status) => this.onStatus?.(status);
  }

  get status(): ConnectionStatus {
    return this.socket.status;
  }

  connect(): void {
    this.socket.connect();
  }

  close(): void {
    this.socket.close();
  }

  setMode(value: "policy" | "manual"): boolean {
    const ok = this.sendFrame({ type: "mode", value });
    if (ok) this.mode = value;
    return ok;
  }

  setGain(name: "damping" | "pd_velocity_scale", value: number): boolean {
    return this.sendFrame({ type: "gain", name, value });
  }

  /** Rate-limited to the 60 Hz control rate: at most one frame per control
   * tick, the newest pending target flushed on the next allowed send. */
  sendTarget(frame: TargetFrame): boolean {
    const t = this.now();
    if (t - this.lastTargetAt < TARGET_INTERVAL_MS) {
      this.pendingTarget = frame;
      return false;
    }
    const ok = this.sendFrame(frame);
    if (ok) {
      this.lastTargetAt = t;
      this.pendingTarget = null;
    }
    return ok;
  }

  /** Call periodically (e.g. per animation frame) to flush a deferred target. */
  flush(): void {
    if (this.pendingTarget !== null) this.sendTarget(this.pendingTarget);
  }

  private sendFrame(frame: ClientFrame): boolean {
    return this.socket.send(encodeClientFrame(frame));
  }

  private receive(text: string): void {
    const frame = parseServerFrame(text);
    if (frame === null) {
      this.droppedFrames += 1;
      return;
    }
    if (frame.type === "state") {
      this.latest = frame;
      this.onState?.(frame);
    } else {
      this.lastError = frame;
      this.onError?.(frame);
    }
  }
}

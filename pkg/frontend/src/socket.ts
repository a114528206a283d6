/** Reconnecting transport. The socket flavor is injected so tests (and any
 * non-browser host) can drive the client without a network. */

/** Structural subset of the browser WebSocket; loose handler signatures so a
 * real WebSocket satisfies it directly. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((event?: any) => void) | null;
  onmessage: ((event: any) => void) | null;
  onclose: ((event?: any) => void) | null;
  onerror: ((event?: any) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export type ConnectionStatus = "connecting" | "open" | "reconnecting" | "closed";

export interface ReconnectOptions {
  initialDelayMs?: number;
  maxDelayMs?: number;
  /** Injectable timer for tests; defaults to setTimeout. */
  schedule?: (fn: () => void, ms: number) => void;
}

export class ReconnectingSocket {
  status: ConnectionStatus = "closed";
  onFrame: ((text: string) => void) | null = null;
  onStatus: ((status: ConnectionStatus) => void) | null = null;

  private socket: SocketLike | null = null;
  private delayMs: number;
  private readonly initialDelayMs: number;
  private readonly maxDelayMs: number;
  private readonly schedule: (fn: () => void, ms: number) => void;
  private stopped = false;

  constructor(
    private readonly url: string,
    private readonly factory: SocketFactory,
    options: ReconnectOptions = {},
  ) {
    this.initialDelayMs = options.initialDelayMs ?? 500;
    this.maxDelayMs = options.maxDelayMs ?? 8000;
    this.delayMs = this.initialDelayMs;
    this.schedule = options.schedule ?? ((fn, ms) => setTimeout(fn, ms));
  }

  connect(): void {
    this.stopped = false;
    this.open("connecting");
  }

  close(): void {
    this.stopped = true;
    this.socket?.close();
    this.socket = null;
    this.setStatus("closed");
  }

  /** Returns false when the frame could not be sent (not connected). */
  send(text: string): boolean {
    if (this.status !== "open" || this.socket === null) return false;
    this.socket.send(text);
    return true;
  }

  get currentBackoffMs(): number {
    return this.delayMs;
  }

  private open(status: ConnectionStatus): void {
    this.setStatus(status);
    let socket: SocketLike;
    try {
      socket = this.factory(this.url);
    } catch {
      this.retryLater();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.delayMs = this.initialDelayMs;
      this.setStatus("open");
    };
    socket.onmessage = (event) => this.onFrame?.(event.data);
    socket.onerror = () => socket.onclose?.();
    socket.onclose = () => {
      socket.onclose = null;
      if (this.socket === socket) this.socket = null;
      if (!this.stopped) this.retryLater();
    };
  }

  private retryLater(): void {
    this.setStatus("reconnecting");
    const delay = this.delayMs;
    this.delayMs = Math.min(this.delayMs * 2, this.maxDelayMs);
    this.schedule(() => {
      if (!this.stopped) this.open("reconnecting");
    }, delay);
  }

  private setStatus(status: ConnectionStatus): void {
    if (this.status !== status) {
      this.status = status;
      this.onStatus?.(status);
    }
  }
}

/**
 * Session service binding: one WebSocket carrying JSON control frames and
 * binary DevicePacket frames, with auto-reconnect and a visible link state.
 *
 * The socket constructor is injectable so the logic runs under tests without
 * a browser.
 */

import { decodePacket, type DevicePacket } from "./packet.js";
import {
  parseServiceMessage,
  type ControlMessage,
  type ServiceMessage,
} from "./protocol.js";

export type LinkState = "connecting" | "open" | "lost";

export interface SocketLike {
  binaryType: string;
  onopen: ((ev: unknown) => void) | null;
  onclose: ((ev: unknown) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  send(data: string): void;
  close(): void;
}

export interface SessionClientHandlers {
  onMessage?: (msg: ServiceMessage) => void;
  onPacket?: (packet: DevicePacket) => void;
  onLinkState?: (state: LinkState, retryInMs?: number) => void;
  onDecodeError?: (error: Error) => void;
}

const BACKOFF_START_MS = 500;
const BACKOFF_MAX_MS = 10_000;

export class SessionClient {
  private socket: SocketLike | null = null;
  private backoffMs = BACKOFF_START_MS;
  private closed = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    readonly url: string,
    private readonly handlers: SessionClientHandlers,
    private readonly socketFactory: (url: string) => SocketLike = (u) =>
      new WebSocket(u) as unknown as SocketLike,
    private readonly schedule: (fn: () => void, ms: number) => ReturnType<typeof setTimeout> =
      (fn, ms) => setTimeout(fn, ms),
  ) {}

  connect(): void {
    this.closed = false;
    this.open();
  }

  private open(): void {
    this.handlers.onLinkState?.("connecting");
    const socket = this.socketFactory(this.url);
    this.socket = socket;
    socket.binaryType = "arraybuffer";
    socket.onopen = () => {
      this.backoffMs = BACKOFF_START_MS;
      this.handlers.onLinkState?.("open");
    };
    socket.onmessage = (ev) => this.onFrame(ev.data);
    socket.onclose = () => this.onLost();
    socket.onerror = () => {
      // close follows; nothing else to do here
    };
  }

  private onLost(): void {
    if (this.closed) return;
    this.socket = null;
    this.handlers.onLinkState?.("lost", this.backoffMs);
    this.retryTimer = this.schedule(() => this.open(), this.backoffMs);
    this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
  }

  private onFrame(data: unknown): void {
    try {
      if (typeof data === "string") {
        this.handlers.onMessage?.(parseServiceMessage(data));
      } else if (data instanceof ArrayBuffer) {
        this.handlers.onPacket?.(decodePacket(data));
      } else if (ArrayBuffer.isView(data as ArrayBufferView)) {
        const view = data as ArrayBufferView;
        this.handlers.onPacket?.(
          decodePacket(new Uint8Array(view.buffer, view.byteOffset, view.byteLength)),
        );
      }
    } catch (error) {
      this.handlers.onDecodeError?.(error as Error);
    }
  }

  send(msg: ControlMessage): void {
    if (!this.socket) throw new Error("link is down");
    this.socket.send(JSON.stringify(msg));
  }

  close(): void {
    this.closed = true;
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.socket?.close();
    this.socket = null;
  }
}

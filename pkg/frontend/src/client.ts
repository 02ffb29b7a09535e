/** Thin websocket client for one role.
 *
 * The socket constructor is injected so tests can run under node with
 * the ws package while the browser uses the native WebSocket. A client
 * says hello as seq 1 on open and numbers everything after that from
 * one counter, matching the server's strictly-increasing rule.
 */

import type { ControlCommand, Envelope, Role } from "./protocol.js";
import { PROTOCOL_VERSION, ProtocolError, decodeEnvelope, encodeEnvelope, makeEnvelope } from "./protocol.js";

interface MessageEventLike {
  data: unknown;
}

export interface SocketLike {
  send(data: string): void;
  close(code?: number, reason?: string): void;
  onopen: (() => void) | null;
  onmessage: ((ev: MessageEventLike) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketCtor = new (url: string) => SocketLike;

export function nowNs(): number {
  // ms clock scaled up; envelope timestamps are informational here
  return Math.round(performance.now() * 1e6);
}

export class TwinClient {
  readonly role: Role;
  onEnvelope: (env: Envelope) => void = () => {};
  onStatus: (status: "open" | "closed") => void = () => {};
  onProtocolError: (err: ProtocolError) => void = (err) => console.warn(err.message);

  private sock: SocketLike;
  private seq = 2; // hello takes 1
  private opened = false;

  constructor(url: string, role: Role, Socket: SocketCtor) {
    this.role = role;
    this.sock = new Socket(url);
    this.sock.onopen = () => {
      this.opened = true;
      this.sock.send(
        encodeEnvelope(makeEnvelope("hello", 1, nowNs(), { role, protocol_version: PROTOCOL_VERSION })),
      );
      this.onStatus("open");
    };
    this.sock.onmessage = (ev) => {
      let env: Envelope;
      try {
        env = decodeEnvelope(ev.data as string | ArrayBuffer | Uint8Array);
      } catch (err) {
        if (err instanceof ProtocolError) {
          this.onProtocolError(err);
          return;
        }
        throw err;
      }
      this.onEnvelope(env);
    };
    this.sock.onclose = () => {
      this.opened = false;
      this.onStatus("closed");
    };
    this.sock.onerror = () => {
      // the close handler carries the user-visible transition
    };
  }

  get isOpen(): boolean {
    return this.opened;
  }

  /** Claim the next seq; the caller promises to send it. */
  claimSeq(): number {
    return this.seq++;
  }

  sendRaw(env: Envelope): void {
    this.sock.send(encodeEnvelope(env));
  }

  /** Send a control command; returns the seq its ack will reference. */
  sendControl(cmd: ControlCommand, args: Record<string, unknown> = {}): number {
    const seq = this.claimSeq();
    this.sendRaw(makeEnvelope("control", seq, nowNs(), { cmd, args }));
    return seq;
  }

  close(): void {
    this.sock.close();
  }
}

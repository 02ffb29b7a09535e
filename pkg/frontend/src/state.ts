/** View model: everything the DOM and scene render from.
 *
 * One mutable store fed by decoded envelopes. Robot states apply
 * latest-wins by seq (the socket can burst after a stall), acks
 * resolve against an in-flight control map, and the get_model reply
 * carries the model document in its ack message.
 */

import type {
  AckPayload,
  ControlCommand,
  Envelope,
  FeedbackMode,
  ModelDocument,
  RecordingState,
  RobotStatePayload,
} from "./protocol.js";
import { parseModelDocument } from "./protocol.js";

export type ConnState = "connecting" | "open" | "closed";

export interface Toast {
  kind: "info" | "error";
  text: string;
}

export class ViewState {
  viewerConn: ConnState = "connecting";
  sourceConn: ConnState = "connecting";

  lastState: RobotStatePayload | null = null;
  lastStateSeq = -1;

  model: ModelDocument | null = null;
  feedbackMode: FeedbackMode = "live";
  recording: RecordingState = "idle";
  labels: Record<string, string> = {};

  toasts: Toast[] = [];
  private pending = new Map<number, ControlCommand>();

  /** Remember an outgoing control so its ack can be interpreted. */
  noteControl(seq: number, cmd: ControlCommand): void {
    this.pending.set(seq, cmd);
  }

  applyEnvelope(env: Envelope): void {
    if (env.type === "robot_state") {
      if (env.seq > this.lastStateSeq) {
        this.lastState = env.payload;
        this.lastStateSeq = env.seq;
        this.recording = env.payload.recording;
        this.feedbackMode = env.payload.feedback_mode;
      }
    } else if (env.type === "ack") {
      this.applyAck(env.payload);
    }
  }

  private applyAck(ack: AckPayload): void {
    const cmd = this.pending.get(ack.for_seq);
    if (cmd === undefined) return; // hello ack or someone else's control
    this.pending.delete(ack.for_seq);
    if (!ack.ok) {
      this.toasts.push({ kind: "error", text: `${cmd} refused: ${ack.message}` });
      return;
    }
    if (cmd === "get_model") {
      this.model = parseModelDocument(ack.message);
      return; // the raw document is not toast material
    }
    this.toasts.push({ kind: "info", text: ack.message });
  }

  takeToasts(): Toast[] {
    const out = this.toasts;
    this.toasts = [];
    return out;
  }

  get pendingCount(): number {
    return this.pending.size;
  }
}

/** Wire protocol v1: JSON envelopes over a websocket at /ws.
 *
 * This mirrors the server's schema. Encoding is plain JSON (the server
 * decoder accepts any key order); decoding validates the parts the UI
 * consumes and throws ProtocolError with a path on anything off.
 */

export const PROTOCOL_VERSION = 1;
export const WS_PATH = "/ws";

export const ROLES = ["hand_source", "viewer", "controller"] as const;
export const CONTROL_COMMANDS = [
  "start_recording",
  "stop_recording",
  "set_feedback",
  "set_labels",
  "reset",
  "get_model",
  "replay",
] as const;
export const GRIPPER_VALUES = ["open", "closed"] as const;
export const RECORDING_VALUES = ["idle", "armed", "recording"] as const;
export const FEEDBACK_MODES = ["none", "live"] as const;
export const FACES = ["+X", "-X", "+Y", "-Y", "+Z", "-Z"] as const;

export type Role = (typeof ROLES)[number];
export type ControlCommand = (typeof CONTROL_COMMANDS)[number];
export type Gripper = (typeof GRIPPER_VALUES)[number];
export type RecordingState = (typeof RECORDING_VALUES)[number];
export type FeedbackMode = (typeof FEEDBACK_MODES)[number];
export type Face = (typeof FACES)[number];

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number]; // (w, x, y, z)

export interface HandPayload {
  side: "left" | "right";
  wrist: { p: Vec3; q: Quat };
  knuckles: { index: Vec3; middle: Vec3; ring: Vec3; little: Vec3 };
  thumb_tip: Vec3;
  index_tip: Vec3;
}

export interface HandFramePayload {
  hands: HandPayload[];
}

export interface WorkspaceHit {
  face: Face;
  depth: number;
}

export interface ConstraintPayload {
  singularity_proximity: number;
  workspace: WorkspaceHit[];
  ee_speed: number;
  speed_violated: boolean;
}

export interface LinkPose {
  name: string;
  p: Vec3;
  q: Quat;
}

export interface ArmStatePayload {
  name: string;
  links: LinkPose[];
  q_cmd: number[];
  gripper: Gripper;
  ik_ok: boolean;
  constraint: ConstraintPayload;
}

export interface RobotStatePayload {
  arms: ArmStatePayload[];
  recording: RecordingState;
  feedback_mode: FeedbackMode;
}

export interface ControlPayload {
  cmd: ControlCommand;
  args: Record<string, unknown>;
}

export interface AckPayload {
  for_seq: number;
  ok: boolean;
  message: string;
}

export interface HelloPayload {
  role: Role;
  protocol_version: number;
}

export type Envelope =
  | { type: "hand_frame"; seq: number; t_ns: number; payload: HandFramePayload }
  | { type: "robot_state"; seq: number; t_ns: number; payload: RobotStatePayload }
  | { type: "control"; seq: number; t_ns: number; payload: ControlPayload }
  | { type: "ack"; seq: number; t_ns: number; payload: AckPayload }
  | { type: "hello"; seq: number; t_ns: number; payload: HelloPayload };

export class ProtocolError extends Error {}

function fail(where: string, what: string): never {
  throw new ProtocolError(`${where}: ${what}`);
}

function num(raw: unknown, where: string): number {
  if (typeof raw !== "number" || !Number.isFinite(raw)) fail(where, "expected a number");
  return raw;
}

function int(raw: unknown, where: string): number {
  if (typeof raw !== "number" || !Number.isInteger(raw) || raw < 0) {
    fail(where, "expected a non-negative integer");
  }
  return raw;
}

function bool(raw: unknown, where: string): boolean {
  if (typeof raw !== "boolean") fail(where, "expected a boolean");
  return raw;
}

function str<T extends string>(raw: unknown, where: string, allowed?: readonly T[]): T {
  if (typeof raw !== "string") fail(where, "expected a string");
  if (allowed && !allowed.includes(raw as T)) fail(where, `not one of ${allowed.join(", ")}`);
  return raw as T;
}

function obj(raw: unknown, where: string): Record<string, unknown> {
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    fail(where, "expected an object");
  }
  return raw as Record<string, unknown>;
}

function vec(raw: unknown, n: number, where: string): number[] {
  if (!Array.isArray(raw) || raw.length !== n) fail(where, `expected ${n} numbers`);
  return raw.map((v, i) => num(v, `${where}[${i}]`));
}

function parseConstraint(raw: unknown, where: string): ConstraintPayload {
  const c = obj(raw, where);
  const proximity = num(c.singularity_proximity, `${where}.singularity_proximity`);
  if (proximity < 0 || proximity > 1) fail(`${where}.singularity_proximity`, "outside [0, 1]");
  if (!Array.isArray(c.workspace)) fail(`${where}.workspace`, "expected a list");
  const workspace = c.workspace.map((rw, i) => {
    const hit = obj(rw, `${where}.workspace[${i}]`);
    const depth = num(hit.depth, `${where}.workspace[${i}].depth`);
    if (depth <= 0) fail(`${where}.workspace[${i}].depth`, "must be > 0");
    return { face: str(hit.face, `${where}.workspace[${i}].face`, FACES), depth };
  });
  const speed = num(c.ee_speed, `${where}.ee_speed`);
  if (speed < 0) fail(`${where}.ee_speed`, "must be >= 0");
  return {
    singularity_proximity: proximity,
    workspace,
    ee_speed: speed,
    speed_violated: bool(c.speed_violated, `${where}.speed_violated`),
  };
}

function parseRobotState(raw: unknown): RobotStatePayload {
  const p = obj(raw, "robot_state");
  if (!Array.isArray(p.arms) || p.arms.length === 0) fail("robot_state.arms", "expected arms");
  const arms = p.arms.map((ra, i) => {
    const where = `robot_state.arms[${i}]`;
    const a = obj(ra, where);
    if (!Array.isArray(a.links) || a.links.length === 0) fail(`${where}.links`, "expected links");
    const links = a.links.map((rl, j) => {
      const l = obj(rl, `${where}.links[${j}]`);
      return {
        name: str(l.name, `${where}.links[${j}].name`),
        p: vec(l.p, 3, `${where}.links[${j}].p`) as Vec3,
        q: vec(l.q, 4, `${where}.links[${j}].q`) as Quat,
      };
    });
    if (!Array.isArray(a.q_cmd) || a.q_cmd.length === 0) fail(`${where}.q_cmd`, "expected q_cmd");
    return {
      name: str(a.name, `${where}.name`),
      links,
      q_cmd: a.q_cmd.map((v, j) => num(v, `${where}.q_cmd[${j}]`)),
      gripper: str(a.gripper, `${where}.gripper`, GRIPPER_VALUES),
      ik_ok: bool(a.ik_ok, `${where}.ik_ok`),
      constraint: parseConstraint(a.constraint, `${where}.constraint`),
    };
  });
  return {
    arms,
    recording: str(p.recording, "robot_state.recording", RECORDING_VALUES),
    feedback_mode: str(p.feedback_mode, "robot_state.feedback_mode", FEEDBACK_MODES),
  };
}

function parseHand(raw: unknown, where: string): HandPayload {
  const h = obj(raw, where);
  const wrist = obj(h.wrist, `${where}.wrist`);
  const kn = obj(h.knuckles, `${where}.knuckles`);
  return {
    side: str(h.side, `${where}.side`, ["left", "right"] as const),
    wrist: {
      p: vec(wrist.p, 3, `${where}.wrist.p`) as Vec3,
      q: vec(wrist.q, 4, `${where}.wrist.q`) as Quat,
    },
    knuckles: {
      index: vec(kn.index, 3, `${where}.knuckles.index`) as Vec3,
      middle: vec(kn.middle, 3, `${where}.knuckles.middle`) as Vec3,
      ring: vec(kn.ring, 3, `${where}.knuckles.ring`) as Vec3,
      little: vec(kn.little, 3, `${where}.knuckles.little`) as Vec3,
    },
    thumb_tip: vec(h.thumb_tip, 3, `${where}.thumb_tip`) as Vec3,
    index_tip: vec(h.index_tip, 3, `${where}.index_tip`) as Vec3,
  };
}

export function decodeEnvelope(data: string | ArrayBuffer | Uint8Array): Envelope {
  let text: string;
  if (typeof data === "string") text = data;
  else text = new TextDecoder().decode(data);
  let rawEnv: unknown;
  try {
    rawEnv = JSON.parse(text);
  } catch (err) {
    throw new ProtocolError(`malformed message: ${(err as Error).message}`);
  }
  const env = obj(rawEnv, "envelope");
  const seq = int(env.seq, "envelope.seq");
  const tNs = int(env.t_ns, "envelope.t_ns");
  const type = str(env.type, "envelope.type");
  switch (type) {
    case "robot_state":
      return { type, seq, t_ns: tNs, payload: parseRobotState(env.payload) };
    case "ack": {
      const a = obj(env.payload, "ack");
      return {
        type,
        seq,
        t_ns: tNs,
        payload: {
          for_seq: int(a.for_seq, "ack.for_seq"),
          ok: bool(a.ok, "ack.ok"),
          message: str(a.message, "ack.message"),
        },
      };
    }
    case "hello": {
      const h = obj(env.payload, "hello");
      const version = int(h.protocol_version, "hello.protocol_version");
      if (version !== PROTOCOL_VERSION) {
        fail("hello.protocol_version", `peer speaks ${version}, this end speaks ${PROTOCOL_VERSION}`);
      }
      return {
        type,
        seq,
        t_ns: tNs,
        payload: { role: str(h.role, "hello.role", ROLES), protocol_version: version },
      };
    }
    case "hand_frame": {
      const p = obj(env.payload, "hand_frame");
      if (!Array.isArray(p.hands)) fail("hand_frame.hands", "expected a list");
      return {
        type,
        seq,
        t_ns: tNs,
        payload: { hands: p.hands.map((h, i) => parseHand(h, `hand_frame.hands[${i}]`)) },
      };
    }
    case "control": {
      const c = obj(env.payload, "control");
      return {
        type,
        seq,
        t_ns: tNs,
        payload: {
          cmd: str(c.cmd, "control.cmd", CONTROL_COMMANDS),
          args: obj(c.args ?? {}, "control.args"),
        },
      };
    }
    default:
      fail("envelope.type", `unknown message type ${type}`);
  }
}

export function encodeEnvelope(env: Envelope): string {
  assertFiniteNumbers(env, "envelope");
  return JSON.stringify(env);
}

function assertFiniteNumbers(value: unknown, where: string): void {
  if (typeof value === "number") {
    if (!Number.isFinite(value)) fail(where, "non-finite number");
  } else if (Array.isArray(value)) {
    value.forEach((v, i) => assertFiniteNumbers(v, `${where}[${i}]`));
  } else if (typeof value === "object" && value !== null) {
    for (const [k, v] of Object.entries(value)) assertFiniteNumbers(v, `${where}.${k}`);
  }
}

export function makeEnvelope<T extends Envelope["type"]>(
  type: T,
  seq: number,
  tNs: number,
  payload: Extract<Envelope, { type: T }>["payload"],
): Envelope {
  return { type, seq, t_ns: tNs, payload } as Envelope;
}

/** Model document shape delivered in a get_model ack message. */
export interface ModelDocument {
  arms: {
    name: string;
    assigned_hand: "left" | "right";
    model_hash: string;
    base_pose: { p: Vec3; q: Quat };
    model: unknown;
    workspace: { min: Vec3; max: Vec3 } | null;
    anchor: Vec3 | null;
  }[];
  anchor_radius: number;
}

export function parseModelDocument(text: string): ModelDocument {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new ProtocolError("model document is not JSON");
  }
  const doc = obj(raw, "model");
  if (!Array.isArray(doc.arms) || doc.arms.length === 0) fail("model.arms", "expected arms");
  const arms = doc.arms.map((ra, i) => {
    const a = obj(ra, `model.arms[${i}]`);
    const base = obj(a.base_pose, `model.arms[${i}].base_pose`);
    let workspace: { min: Vec3; max: Vec3 } | null = null;
    if (a.workspace !== null && a.workspace !== undefined) {
      const w = obj(a.workspace, `model.arms[${i}].workspace`);
      workspace = {
        min: vec(w.min, 3, `model.arms[${i}].workspace.min`) as Vec3,
        max: vec(w.max, 3, `model.arms[${i}].workspace.max`) as Vec3,
      };
    }
    return {
      name: str(a.name, `model.arms[${i}].name`),
      assigned_hand: str(a.assigned_hand, `model.arms[${i}].assigned_hand`, [
        "left",
        "right",
      ] as const),
      model_hash: str(a.model_hash, `model.arms[${i}].model_hash`),
      base_pose: {
        p: vec(base.p, 3, `model.arms[${i}].base_pose.p`) as Vec3,
        q: vec(base.q, 4, `model.arms[${i}].base_pose.q`) as Quat,
      },
      model: a.model,
      workspace,
      anchor:
        a.anchor === null || a.anchor === undefined
          ? null
          : (vec(a.anchor, 3, `model.arms[${i}].anchor`) as Vec3),
    };
  });
  return { arms, anchor_radius: num(doc.anchor_radius, "model.anchor_radius") };
}

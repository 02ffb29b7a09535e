/** Pointer/keyboard steering turned into a streamed hand skeleton.
 *
 * The browser has no tracker, so the UI synthesizes the same rigid
 * right-hand template the server's retargeter expects: knuckle line
 * along local +x, fingers along +y, wrist behind the palm. The server
 * then recovers exactly the steered pose, and the thumb-index distance
 * is the steered pinch value. The template constants here must stay
 * identical to the server's synthetic stream generator.
 */

import type { Envelope, HandPayload, Quat, Vec3 } from "./protocol.js";
import { makeEnvelope } from "./protocol.js";

// --- quaternion helpers, (w, x, y, z), Hamilton convention ---

export function quatNormalize(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  if (n < 1e-9) throw new Error("cannot normalize near-zero quaternion");
  let out: Quat = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
  if (out[0] < 0) out = [-out[0], -out[1], -out[2], -out[3]];
  return out;
}

export function quatMul(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

export function quatFromAxisAngle(axis: Vec3, angle: number): Quat {
  const half = 0.5 * angle;
  const s = Math.sin(half);
  return quatNormalize([Math.cos(half), s * axis[0], s * axis[1], s * axis[2]]);
}

/** Intrinsic X-Y-Z rotation: roll, then pitch, then yaw. */
export function quatFromRpy(roll: number, pitch: number, yaw: number): Quat {
  const qx = quatFromAxisAngle([1, 0, 0], roll);
  const qy = quatFromAxisAngle([0, 1, 0], pitch);
  const qz = quatFromAxisAngle([0, 0, 1], yaw);
  return quatNormalize(quatMul(quatMul(qx, qy), qz));
}

export function quatRotate(q: Quat, v: Vec3): Vec3 {
  const [, x, y, z] = q;
  const w = q[0];
  // v + 2 (w u×v + u×(u×v))
  const uv: Vec3 = [y * v[2] - z * v[1], z * v[0] - x * v[2], x * v[1] - y * v[0]];
  const uuv: Vec3 = [y * uv[2] - z * uv[1], z * uv[0] - x * uv[2], x * uv[1] - y * uv[0]];
  return [v[0] + 2 * (w * uv[0] + uuv[0]), v[1] + 2 * (w * uv[1] + uuv[1]), v[2] + 2 * (w * uv[2] + uuv[2])];
}

// --- the skeleton template (right hand, basis coordinates) ---

export const KNUCKLE_X = { index: 0.033, middle: 0.011, ring: -0.011, little: -0.033 } as const;
export const WRIST_LOCAL: Vec3 = [0.0, -0.09, 0.0];
export const PINCH_CENTER: Vec3 = [0.045, 0.05, 0.012];
export const PINCH_DIR: Vec3 = [1.0, 0.0, 0.0];

/** Pinch distance streamed while the pinch control is held / released. */
export const PINCH_HELD = 0.02;
export const PINCH_RELEASED = 0.08;

/** Place the right-hand template rigidly at (pos, q) with the given pinch. */
export function handAt(pos: Vec3, q: Quat, pinch: number): HandPayload {
  if (pinch <= 0) throw new Error("pinch distance must be > 0");
  const world = (local: Vec3): Vec3 => {
    const r = quatRotate(q, local);
    return [pos[0] + r[0], pos[1] + r[1], pos[2] + r[2]];
  };
  const knuckle = (x: number): Vec3 => world([x, 0, 0]);
  const half = 0.5 * pinch;
  return {
    side: "right",
    wrist: { p: world(WRIST_LOCAL), q },
    knuckles: {
      index: knuckle(KNUCKLE_X.index),
      middle: knuckle(KNUCKLE_X.middle),
      ring: knuckle(KNUCKLE_X.ring),
      little: knuckle(KNUCKLE_X.little),
    },
    thumb_tip: world([
      PINCH_CENTER[0] + half * PINCH_DIR[0],
      PINCH_CENTER[1] + half * PINCH_DIR[1],
      PINCH_CENTER[2] + half * PINCH_DIR[2],
    ]),
    index_tip: world([
      PINCH_CENTER[0] - half * PINCH_DIR[0],
      PINCH_CENTER[1] - half * PINCH_DIR[1],
      PINCH_CENTER[2] - half * PINCH_DIR[2],
    ]),
  };
}

// --- steering state ---

/** Palm down, knuckle line along +X: the natural tabletop grasp pose. */
export const PALM_DOWN_RPY: Vec3 = [Math.PI, 0.0, 0.0];

/** How far past the workspace box the hand may be steered. Dragging
 * beyond a bound is the whole point of the red-wall feedback, so the
 * margin is generous; the clamp only keeps the hand on screen. */
export const STEER_MARGIN = 0.3;

export interface SteerVolume {
  min: Vec3;
  max: Vec3;
}

export interface SteerState {
  target: Vec3;
  rpy: Vec3;
  pinchHeld: boolean;
}

export function makeSteerState(start: Vec3): SteerState {
  return { target: [...start], rpy: [...PALM_DOWN_RPY], pinchHeld: false };
}

/** Pixels of pointer travel per meter of hand travel. */
const POINTER_GAIN = 1 / 600;
const SCROLL_GAIN = 1 / 2000;
const KEY_ANGLE_STEP = 0.1;

/** Drag steers in the robot's Y/Z plane: screen right is +Y, screen up is +Z. */
export function applyPointerDelta(state: SteerState, dxPx: number, dyPx: number): void {
  state.target[1] += dxPx * POINTER_GAIN;
  state.target[2] -= dyPx * POINTER_GAIN;
}

/** Wheel steers depth along X: scrolling up pushes the hand away. */
export function applyScroll(state: SteerState, deltaY: number): void {
  state.target[0] -= deltaY * SCROLL_GAIN;
}

/** Orientation nudges; returns false for keys this layer does not own. */
export function applyKey(state: SteerState, key: string): boolean {
  switch (key) {
    case "q":
      state.rpy[2] += KEY_ANGLE_STEP;
      return true;
    case "e":
      state.rpy[2] -= KEY_ANGLE_STEP;
      return true;
    case "r":
      state.rpy[1] += KEY_ANGLE_STEP;
      return true;
    case "f":
      state.rpy[1] -= KEY_ANGLE_STEP;
      return true;
    case "z":
      state.rpy[0] += KEY_ANGLE_STEP;
      return true;
    case "c":
      state.rpy[0] -= KEY_ANGLE_STEP;
      return true;
    case "0":
      state.rpy = [...PALM_DOWN_RPY];
      return true;
    default:
      return false;
  }
}

export function clampToVolume(state: SteerState, volume: SteerVolume | null): void {
  if (volume === null) return;
  for (const i of [0, 1, 2] as const) {
    const lo = volume.min[i] - STEER_MARGIN;
    const hi = volume.max[i] + STEER_MARGIN;
    state.target[i] = Math.min(hi, Math.max(lo, state.target[i]));
  }
}

// --- the 30 Hz streamer ---

export const FRAME_NS = 33_333_333;

/** Emits hand_frame envelopes from the steer state at a fixed cadence.
 *
 * tickOnce is pure given a clock value, so tests can drive it with
 * explicit timestamps; the browser wires it to setInterval + a send
 * callback.
 */
export class HandStreamer {
  readonly state: SteerState;
  volume: SteerVolume | null = null;
  private seq: number;

  constructor(start: Vec3, firstSeq = 2) {
    // seq 1 is the hello on the same socket
    this.state = makeSteerState(start);
    this.seq = firstSeq;
  }

  get nextSeq(): number {
    return this.seq;
  }

  tickOnce(tNs: number): Envelope {
    clampToVolume(this.state, this.volume);
    const q = quatFromRpy(this.state.rpy[0], this.state.rpy[1], this.state.rpy[2]);
    const pinch = this.state.pinchHeld ? PINCH_HELD : PINCH_RELEASED;
    const hand = handAt([...this.state.target], q, pinch);
    return makeEnvelope("hand_frame", this.seq++, tNs, { hands: [hand] });
  }
}

import { describe, expect, it } from "vitest";

import {
  FRAME_NS,
  HandStreamer,
  PALM_DOWN_RPY,
  PINCH_HELD,
  PINCH_RELEASED,
  STEER_MARGIN,
  applyKey,
  applyPointerDelta,
  applyScroll,
  clampToVolume,
  handAt,
  makeSteerState,
  quatFromRpy,
  quatMul,
  quatRotate,
} from "../src/input.js";
import type { HandFramePayload, HandPayload, Vec3 } from "../src/protocol.js";

const dist = (a: Vec3, b: Vec3) => Math.hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);

describe("quaternions", () => {
  it("identity rpy means palm up", () => {
    expect(quatFromRpy(0, 0, 0)).toEqual([1, 0, 0, 0]);
  });

  it("palm down is a half turn about x, canonical sign", () => {
    const q = quatFromRpy(Math.PI, 0, 0);
    expect(q[0]).toBeCloseTo(0, 15);
    expect(q[1]).toBeCloseTo(1, 15);
    expect(q[2]).toBe(0);
    expect(q[3]).toBe(0);
  });

  it("rotation preserves length and composes like the Hamilton product", () => {
    const a = quatFromRpy(0.3, -0.2, 0.7);
    const b = quatFromRpy(-1.1, 0.4, 0.1);
    const v: Vec3 = [0.2, -0.5, 0.3];
    expect(Math.hypot(...quatRotate(a, v))).toBeCloseTo(Math.hypot(...v), 12);
    const both = quatRotate(quatMul(a, b), v);
    const oneAtATime = quatRotate(a, quatRotate(b, v));
    for (let i = 0; i < 3; i++) expect(both[i]).toBeCloseTo(oneAtATime[i]!, 12);
  });
});

describe("hand template", () => {
  // fixture generated by the server-side synthetic stream generator
  // for pos [0.4, -0.1, 0.3], rpy [pi, 0.3, -0.2], pinch 0.05
  const oracle = {
    q: [0.014918919342161, 0.983831341052806, 0.098712394991922, 0.148691564262601],
    wrist_p: [0.382918354511918, -0.011794007994288, 0.294716027847556],
    knuckles: {
      index: [0.430897680998279, -0.093443912083763, 0.309557772761642],
      middle: [0.410299226999426, -0.097814637361254, 0.303185924253881],
      ring: [0.389700773000574, -0.102185362638746, 0.296814075746119],
      little: [0.369102319001721, -0.106556087916237, 0.290442227238358],
    },
    thumb_tip: [0.478576580979764, -0.135096475736408, 0.31174556564897],
    index_tip: [0.431761912800554, -0.145029942276161, 0.297264091767694],
  };

  it("reproduces the server-side template exactly", () => {
    const q = quatFromRpy(Math.PI, 0.3, -0.2);
    q.forEach((v, i) => expect(v).toBeCloseTo(oracle.q[i]!, 12));
    const hand = handAt([0.4, -0.1, 0.3], q, 0.05);
    const near = (got: Vec3, want: number[]) =>
      got.forEach((v, i) => expect(v).toBeCloseTo(want[i]!, 12));
    near(hand.wrist.p, oracle.wrist_p);
    near(hand.knuckles.index, oracle.knuckles.index);
    near(hand.knuckles.middle, oracle.knuckles.middle);
    near(hand.knuckles.ring, oracle.knuckles.ring);
    near(hand.knuckles.little, oracle.knuckles.little);
    near(hand.thumb_tip, oracle.thumb_tip);
    near(hand.index_tip, oracle.index_tip);
  });

  it("thumb-index distance equals the pinch value", () => {
    const q = quatFromRpy(Math.PI, 0, 0);
    for (const pinch of [PINCH_HELD, PINCH_RELEASED, 0.0437]) {
      const hand = handAt([0.45, -0.1, 0.28], q, pinch);
      expect(dist(hand.thumb_tip, hand.index_tip)).toBeCloseTo(pinch, 12);
    }
  });

  it("keeps the knuckle line along +x under a palm-down pose", () => {
    const hand = handAt([0.5, 0.1, 0.3], quatFromRpy(Math.PI, 0, 0), 0.08);
    expect(hand.knuckles.index[0]).toBeCloseTo(0.5 + 0.033, 12);
    expect(hand.knuckles.little[0]).toBeCloseTo(0.5 - 0.033, 12);
    expect(hand.knuckles.index[1]).toBeCloseTo(0.1, 12);
    expect(hand.knuckles.index[2]).toBeCloseTo(0.3, 12);
  });

  it("rejects a non-positive pinch", () => {
    expect(() => handAt([0, 0, 0], [1, 0, 0, 0], 0)).toThrowError(/pinch/);
  });
});

describe("steering", () => {
  it("drag moves in the y/z plane, wheel in depth", () => {
    const s = makeSteerState([0.45, -0.1, 0.28]);
    applyPointerDelta(s, 600, 0);
    expect(s.target[1]).toBeCloseTo(-0.1 + 1.0, 12);
    applyPointerDelta(s, 0, 600); // screen down lowers the hand
    expect(s.target[2]).toBeCloseTo(0.28 - 1.0, 12);
    applyScroll(s, -2000); // wheel up pushes away
    expect(s.target[0]).toBeCloseTo(0.45 + 1.0, 12);
  });

  it("keys nudge orientation and 0 restores palm down", () => {
    const s = makeSteerState([0, 0, 0]);
    expect(applyKey(s, "q")).toBe(true);
    expect(applyKey(s, "f")).toBe(true);
    expect(s.rpy[2]).toBeCloseTo(0.1, 12);
    expect(s.rpy[1]).toBeCloseTo(-0.1, 12);
    expect(applyKey(s, "x")).toBe(false);
    expect(applyKey(s, "0")).toBe(true);
    expect(s.rpy).toEqual(PALM_DOWN_RPY);
  });

  it("clamps to the workspace box plus the steering margin", () => {
    const volume = { min: [0.12, -0.55, 0.03] as Vec3, max: [0.75, 0.55, 0.65] as Vec3 };
    const s = makeSteerState([0.45, 0, 0.3]);
    s.target = [5, -5, 0.55 + 0.2]; // the z overshoot is within the margin
    clampToVolume(s, volume);
    expect(s.target[0]).toBe(0.75 + STEER_MARGIN);
    expect(s.target[1]).toBe(-0.55 - STEER_MARGIN);
    expect(s.target[2]).toBe(0.75);
    clampToVolume(s, null); // no model yet: anything goes
    expect(s.target[0]).toBe(0.75 + STEER_MARGIN);
  });
});

describe("hand streamer", () => {
  it("emits identical skeletons while the state is still", () => {
    const streamer = new HandStreamer([0.45, -0.1, 0.28]);
    const a = streamer.tickOnce(FRAME_NS);
    const b = streamer.tickOnce(2 * FRAME_NS);
    expect(a.type).toBe("hand_frame");
    expect(a.seq).toBe(2); // hello holds seq 1
    expect(b.seq).toBe(3);
    expect(b.t_ns - a.t_ns).toBe(FRAME_NS);
    expect(b.payload).toEqual(a.payload);
  });

  it("streams the pinch state across the gripper threshold", () => {
    const streamer = new HandStreamer([0.45, -0.1, 0.28]);
    const handOf = (p: unknown) => (p as HandFramePayload).hands[0] as HandPayload;
    const open = handOf(streamer.tickOnce(1).payload);
    expect(dist(open.thumb_tip, open.index_tip)).toBeCloseTo(PINCH_RELEASED, 12);
    streamer.state.pinchHeld = true;
    const held = handOf(streamer.tickOnce(2).payload);
    expect(dist(held.thumb_tip, held.index_tip)).toBeCloseTo(PINCH_HELD, 12);
    expect(PINCH_HELD).toBeLessThan(0.04); // below the close threshold
    expect(PINCH_RELEASED).toBeGreaterThan(0.045); // above the reopen threshold
  });

  it("applies the steer clamp when a volume is known", () => {
    const streamer = new HandStreamer([10, 0, 0.3]);
    streamer.volume = { min: [0.12, -0.55, 0.03] as Vec3, max: [0.75, 0.55, 0.65] as Vec3 };
    const env = streamer.tickOnce(1);
    const hand = (env.payload as HandFramePayload).hands[0] as HandPayload;
    // palm-down keeps knuckle x offsets rigid: middle knuckle x = target x + 0.011
    expect(hand.knuckles.middle[0]).toBeCloseTo(0.75 + STEER_MARGIN + 0.011, 12);
  });
});

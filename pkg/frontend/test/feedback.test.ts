import { describe, expect, it } from "vitest";

import { BASE_COLOR, WARN_YELLOW, rgbToHex, speedBannerVisible, tint, wallsFor } from "../src/feedback.js";
import type { ConstraintPayload, RobotStatePayload } from "../src/protocol.js";

const BOX = { min: [0.12, -0.55, 0.03] as [number, number, number], max: [0.75, 0.55, 0.65] as [number, number, number] };

function constraint(over: Partial<ConstraintPayload> = {}): ConstraintPayload {
  return { singularity_proximity: 0, workspace: [], ee_speed: 0, speed_violated: false, ...over };
}

describe("singularity tint", () => {
  it("is the base color at proximity 0", () => {
    expect(tint(0)).toEqual(BASE_COLOR);
  });

  it("is full yellow at proximity 1", () => {
    expect(tint(1)).toEqual(WARN_YELLOW);
  });

  it("blends linearly: (1-p)*base + p*yellow", () => {
    const p = 0.5;
    const c = tint(p);
    expect(c.r).toBeCloseTo((1 - p) * BASE_COLOR.r + p * WARN_YELLOW.r, 12);
    expect(c.g).toBeCloseTo((1 - p) * BASE_COLOR.g + p * WARN_YELLOW.g, 12);
    expect(c.b).toBeCloseTo((1 - p) * BASE_COLOR.b + p * WARN_YELLOW.b, 12);
  });

  it("clamps proximity outside [0, 1]", () => {
    expect(tint(-0.5)).toEqual(BASE_COLOR);
    expect(tint(7)).toEqual(WARN_YELLOW);
  });

  it("serializes to css hex", () => {
    expect(rgbToHex({ r: 1, g: 0.85, b: 0 })).toBe("#ffd900");
    expect(rgbToHex({ r: 0, g: 0, b: 0 })).toBe("#000000");
  });
});

describe("workspace walls", () => {
  it("puts the +X wall on the x_max plane, spanning the box", () => {
    const [wall] = wallsFor(constraint({ workspace: [{ face: "+X", depth: 0.05 }] }), BOX);
    expect(wall!.center[0]).toBe(BOX.max[0]);
    expect(wall!.center[1]).toBeCloseTo(0, 12);
    expect(wall!.center[2]).toBeCloseTo((BOX.min[2] + BOX.max[2]) / 2, 12);
    expect(wall!.axis).toBe(0);
    expect(wall!.sign).toBe(1);
    expect(wall!.size[0]).toBeCloseTo(BOX.max[1] - BOX.min[1], 12);
    expect(wall!.size[1]).toBeCloseTo(BOX.max[2] - BOX.min[2], 12);
  });

  it("puts the -Z wall on the z_min plane", () => {
    const [wall] = wallsFor(constraint({ workspace: [{ face: "-Z", depth: 0.01 }] }), BOX);
    expect(wall!.center[2]).toBe(BOX.min[2]);
    expect(wall!.axis).toBe(2);
    expect(wall!.sign).toBe(-1);
  });

  it("emits one wall per violated face", () => {
    const walls = wallsFor(
      constraint({ workspace: [{ face: "+X", depth: 0.1 }, { face: "-Y", depth: 0.2 }] }),
      BOX,
    );
    expect(walls.map((w) => w.face)).toEqual(["+X", "-Y"]);
  });

  it("is empty without a box or without violations", () => {
    expect(wallsFor(constraint({ workspace: [{ face: "+X", depth: 0.1 }] }), null)).toEqual([]);
    expect(wallsFor(constraint(), BOX)).toEqual([]);
  });
});

describe("slow-down banner", () => {
  const state = (violated: boolean): RobotStatePayload => ({
    arms: [
      {
        name: "right_arm",
        links: [{ name: "base_link", p: [0, 0, 0], q: [1, 0, 0, 0] }],
        q_cmd: [0],
        gripper: "open",
        ik_ok: true,
        constraint: constraint({ speed_violated: violated, ee_speed: violated ? 0.9 : 0.1 }),
      },
    ],
    recording: "idle",
    feedback_mode: "live",
  });

  it("shows while any arm is over the cap, and only then", () => {
    expect(speedBannerVisible(null)).toBe(false);
    expect(speedBannerVisible(state(false))).toBe(false);
    expect(speedBannerVisible(state(true))).toBe(true);
  });
});

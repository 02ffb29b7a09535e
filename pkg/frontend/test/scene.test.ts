import * as THREE from "three";
import { beforeEach, describe, expect, it } from "vitest";

import { BASE_COLOR, WARN_YELLOW, tint } from "../src/feedback.js";
import type { ModelDocument, RobotStatePayload, Vec3, WorkspaceHit } from "../src/protocol.js";
import { TwinScene } from "../src/scene.js";

const BOX = { min: [0.12, -0.55, 0.03] as Vec3, max: [0.75, 0.55, 0.65] as Vec3 };

function model(basePos: Vec3 = [0, 0, 0]): ModelDocument {
  return {
    arms: [
      {
        name: "right_arm",
        assigned_hand: "right",
        model_hash: "ff00",
        base_pose: { p: basePos, q: [1, 0, 0, 0] },
        model: {},
        workspace: BOX,
        anchor: [0.45, -0.1, 0.28],
      },
    ],
    anchor_radius: 0.08,
  };
}

function state(over: {
  proximity?: number;
  workspace?: WorkspaceHit[];
  gripper?: "open" | "closed";
  feedback?: "none" | "live";
} = {}): RobotStatePayload {
  return {
    arms: [
      {
        name: "right_arm",
        links: [
          { name: "base_link", p: [0, 0, 0.05], q: [1, 0, 0, 0] },
          { name: "upper", p: [0.2, 0, 0.3], q: [1, 0, 0, 0] },
          { name: "ee", p: [0.45, -0.1, 0.28], q: [0, 1, 0, 0] },
        ],
        q_cmd: [0, 0, 0, 0, 0, 0],
        gripper: over.gripper ?? "open",
        ik_ok: true,
        constraint: {
          singularity_proximity: over.proximity ?? 0,
          workspace: over.workspace ?? [],
          ee_speed: 0.1,
          speed_violated: false,
        },
      },
    ],
    recording: "idle",
    feedback_mode: over.feedback ?? "live",
  };
}

describe("twin scene", () => {
  let twin: TwinScene;

  beforeEach(() => {
    twin = new TwinScene();
    twin.buildRobot(model());
  });

  it("places joint spheres at the streamed link poses", () => {
    twin.applyState(state());
    const ee = twin.findObject("link:ee")!;
    expect(ee).not.toBeNull();
    expect(ee.position.toArray()).toEqual([0.45, -0.1, 0.28]);
    // wire (w, x, y, z) landed in three's (x, y, z, w) slots
    expect([ee.quaternion.x, ee.quaternion.y, ee.quaternion.z, ee.quaternion.w]).toEqual([1, 0, 0, 0]);
    const base = twin.findObject("link:base_link")!;
    expect(base.position.z).toBeCloseTo(0.05, 12);
  });

  it("spans bones between consecutive links", () => {
    twin.applyState(state());
    const arm = twin.findObject("arm:right_arm")!;
    const bones = arm.children.filter((c) => c instanceof THREE.Mesh && c.geometry.type === "CylinderGeometry");
    expect(bones).toHaveLength(2);
    const first = bones[0]!;
    const expected = Math.hypot(0.2 - 0, 0, 0.3 - 0.05);
    expect(first.scale.y).toBeCloseTo(expected, 12);
    expect(first.position.x).toBeCloseTo(0.1, 12);
  });

  it("tints the arm material by singularity proximity", () => {
    for (const p of [0, 0.5, 1]) {
      twin.applyState(state({ proximity: p }));
      const mat = twin.armMaterial("right_arm")!;
      const want = tint(p);
      expect(mat.color.r).toBeCloseTo(want.r, 12);
      expect(mat.color.g).toBeCloseTo(want.g, 12);
      expect(mat.color.b).toBeCloseTo(want.b, 12);
    }
    // the anchors are exact: base at 0, yellow at 1
    twin.applyState(state({ proximity: 0 }));
    expect(twin.armMaterial("right_arm")!.color.r).toBe(BASE_COLOR.r);
    twin.applyState(state({ proximity: 1 }));
    expect(twin.armMaterial("right_arm")!.color.g).toBe(WARN_YELLOW.g);
  });

  it("shrinks the end-effector joint while the gripper is closed", () => {
    twin.applyState(state({ gripper: "closed" }));
    expect(twin.findObject("link:ee")!.scale.x).toBeLessThan(1);
    twin.applyState(state({ gripper: "open" }));
    expect(twin.findObject("link:ee")!.scale.x).toBe(1);
  });

  it("raises a wall on the violated bound plane and clears it after", () => {
    twin.applyState(state({ workspace: [{ face: "+X", depth: 0.06 }] }));
    const wall = twin.findObject("wall:+X")!;
    expect(wall).not.toBeNull();
    const world = new THREE.Vector3();
    wall.getWorldPosition(world);
    expect(world.x).toBeCloseTo(BOX.max[0], 12);
    expect(wall.scale.x).toBeCloseTo(BOX.max[1] - BOX.min[1], 12);
    expect(wall.scale.y).toBeCloseTo(BOX.max[2] - BOX.min[2], 12);

    twin.applyState(state());
    expect(twin.findObject("wall:+X")).toBeNull();
  });

  it("offsets walls by the arm base pose", () => {
    const shifted = new TwinScene();
    shifted.buildRobot(model([0.1, 0.2, 0]));
    shifted.applyState(state({ workspace: [{ face: "-Z", depth: 0.01 }] }));
    const world = new THREE.Vector3();
    shifted.findObject("wall:-Z")!.getWorldPosition(world);
    expect(world.z).toBeCloseTo(BOX.min[2], 12); // base z offset is 0
    expect(world.x).toBeCloseTo(0.1 + (BOX.min[0] + BOX.max[0]) / 2, 12);
  });

  it("feedback none removes every robot node from the graph", () => {
    twin.applyState(state({ workspace: [{ face: "+X", depth: 0.06 }] }));
    expect(twin.robotNodeCount()).toBeGreaterThan(0);

    twin.applyState(state({ feedback: "none" }));
    expect(twin.robotNodeCount()).toBe(0);
    let meshes = 0;
    twin.scene.traverse((o) => {
      if (o instanceof THREE.Mesh && o.userData.robot) meshes += 1;
    });
    expect(meshes).toBe(0);

    twin.applyState(state({ feedback: "live", proximity: 0.5 }));
    expect(twin.robotNodeCount()).toBeGreaterThan(0);
    expect(twin.findObject("link:ee")).not.toBeNull();
    expect(twin.armMaterial("right_arm")!.color.r).toBeCloseTo(tint(0.5).r, 12);
  });

  it("setFeedbackMode none tears down even without a state", () => {
    twin.setFeedbackMode("none");
    expect(twin.robotNodeCount()).toBe(0);
    twin.setFeedbackMode("live");
    expect(twin.findObject("arm:right_arm")).not.toBeNull();
  });
});

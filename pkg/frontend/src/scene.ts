/** three.js scene graph for the twin.
 *
 * Renderer-free on purpose: everything here runs headless under node,
 * so tests can assert on object positions, material colors and node
 * counts. Link poses arrive in world frame and drive joint spheres
 * with cylinder bones between them; workspace walls are described in
 * the arm's base frame and live under a group placed at base_pose.
 *
 * Feedback mode none must leave no robot geometry behind, so it
 * removes the whole robot subtree from the scene instead of toggling
 * visibility; live rebuilds it from the stored model document.
 */

import * as THREE from "three";

import { BASE_COLOR, tint, wallsFor } from "./feedback.js";
import type { ArmStatePayload, FeedbackMode, ModelDocument, Quat, RobotStatePayload, Vec3 } from "./protocol.js";

const JOINT_RADIUS = 0.018;
const BONE_RADIUS = 0.012;

const sphereGeom = new THREE.SphereGeometry(JOINT_RADIUS, 16, 12);
const boneGeom = new THREE.CylinderGeometry(BONE_RADIUS, BONE_RADIUS, 1, 12);
const wallGeom = new THREE.PlaneGeometry(1, 1);

interface ArmNodes {
  group: THREE.Group;
  material: THREE.MeshStandardMaterial;
  joints: THREE.Mesh[];
  bones: THREE.Mesh[];
  walls: THREE.Group;
  workspace: { min: Vec3; max: Vec3 } | null;
}

function setQuat(obj: THREE.Object3D, q: Quat): void {
  // wire order is (w, x, y, z); three stores (x, y, z, w)
  obj.quaternion.set(q[1], q[2], q[3], q[0]);
}

export class TwinScene {
  readonly scene = new THREE.Scene();
  private model: ModelDocument | null = null;
  private robotRoot: THREE.Group | null = null;
  private arms = new Map<string, ArmNodes>();
  private mode: FeedbackMode = "live";

  constructor() {
    this.scene.background = new THREE.Color(0x15181d);
    const sun = new THREE.DirectionalLight(0xffffff, 2.2);
    sun.position.set(1.5, -1.0, 2.5);
    this.scene.add(sun);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.55));
    const grid = new THREE.GridHelper(2.0, 20, 0x39404c, 0x252a33);
    grid.rotation.x = Math.PI / 2; // the robot's up is +Z
    this.scene.add(grid);
  }

  get feedbackMode(): FeedbackMode {
    return this.mode;
  }

  /** Build (or rebuild) all robot geometry from the model document. */
  buildRobot(model: ModelDocument): void {
    this.model = model;
    this.teardownRobot();
    if (this.mode === "none") return;

    const root = new THREE.Group();
    root.name = "robot";
    root.userData.robot = true;
    for (const arm of model.arms) {
      const material = new THREE.MeshStandardMaterial({
        color: new THREE.Color(BASE_COLOR.r, BASE_COLOR.g, BASE_COLOR.b),
        roughness: 0.55,
      });
      const group = new THREE.Group();
      group.name = `arm:${arm.name}`;
      group.userData.robot = true;

      const walls = new THREE.Group();
      walls.name = `walls:${arm.name}`;
      walls.userData.robot = true;
      walls.position.set(...arm.base_pose.p);
      setQuat(walls, arm.base_pose.q);
      group.add(walls);

      root.add(group);
      this.arms.set(arm.name, {
        group,
        material,
        joints: [],
        bones: [],
        walls,
        workspace: arm.workspace,
      });
    }
    this.robotRoot = root;
    this.scene.add(root);
  }

  setFeedbackMode(mode: FeedbackMode): void {
    if (mode === this.mode) return;
    this.mode = mode;
    if (mode === "none") {
      this.teardownRobot();
    } else if (this.model !== null) {
      this.buildRobot(this.model);
    }
  }

  applyState(state: RobotStatePayload): void {
    this.setFeedbackMode(state.feedback_mode);
    if (this.mode === "none" || this.robotRoot === null) return;
    for (const armState of state.arms) {
      const nodes = this.arms.get(armState.name);
      if (nodes !== undefined) this.applyArm(nodes, armState);
    }
  }

  private applyArm(nodes: ArmNodes, arm: ArmStatePayload): void {
    while (nodes.joints.length < arm.links.length) {
      const joint = new THREE.Mesh(sphereGeom, nodes.material);
      joint.userData.robot = true;
      nodes.joints.push(joint);
      nodes.group.add(joint);
    }
    while (nodes.bones.length < arm.links.length - 1) {
      const bone = new THREE.Mesh(boneGeom, nodes.material);
      bone.userData.robot = true;
      nodes.bones.push(bone);
      nodes.group.add(bone);
    }

    arm.links.forEach((link, i) => {
      const joint = nodes.joints[i]!;
      joint.name = `link:${link.name}`;
      joint.position.set(...link.p);
      setQuat(joint, link.q);
    });
    for (let i = 0; i + 1 < arm.links.length; i++) {
      const a = new THREE.Vector3(...arm.links[i]!.p);
      const b = new THREE.Vector3(...arm.links[i + 1]!.p);
      const bone = nodes.bones[i]!;
      const span = b.clone().sub(a);
      const length = span.length();
      bone.visible = length > 1e-6;
      if (!bone.visible) continue;
      bone.position.copy(a).addScaledVector(span, 0.5);
      bone.quaternion.setFromUnitVectors(new THREE.Vector3(0, 1, 0), span.normalize());
      bone.scale.set(1, length, 1);
    }

    const c = tint(arm.constraint.singularity_proximity);
    nodes.material.color.setRGB(c.r, c.g, c.b);

    // the gripper pinches the end-effector joint visibly smaller
    const ee = nodes.joints[arm.links.length - 1];
    if (ee !== undefined) {
      const s = arm.gripper === "closed" ? 0.6 : 1.0;
      ee.scale.set(s, s, s);
    }

    this.rebuildWalls(nodes, arm);
  }

  private rebuildWalls(nodes: ArmNodes, arm: ArmStatePayload): void {
    for (const child of [...nodes.walls.children]) nodes.walls.remove(child);
    for (const quad of wallsFor(arm.constraint, nodes.workspace)) {
      const material = new THREE.MeshBasicMaterial({
        color: 0xe03131,
        transparent: true,
        opacity: 0.35,
        side: THREE.DoubleSide,
        depthWrite: false,
      });
      const wall = new THREE.Mesh(wallGeom, material);
      wall.name = `wall:${quad.face}`;
      wall.userData.robot = true;
      wall.position.set(...quad.center);
      wall.scale.set(quad.size[0], quad.size[1], 1);
      // the unit plane faces +Z; aim it along the violated axis
      const normal = new THREE.Vector3(0, 0, 0);
      normal.setComponent(quad.axis, quad.sign);
      wall.quaternion.setFromUnitVectors(new THREE.Vector3(0, 0, 1), normal);
      nodes.walls.add(wall);
    }
  }

  /** Robot geometry nodes currently in the scene graph. */
  robotNodeCount(): number {
    let n = 0;
    this.scene.traverse((obj) => {
      if (obj.userData.robot === true) n += 1;
    });
    return n;
  }

  findObject(name: string): THREE.Object3D | null {
    return this.scene.getObjectByName(name) ?? null;
  }

  armMaterial(name: string): THREE.MeshStandardMaterial | null {
    return this.arms.get(name)?.material ?? null;
  }

  private teardownRobot(): void {
    if (this.robotRoot !== null) {
      this.scene.remove(this.robotRoot);
      this.robotRoot = null;
    }
    for (const nodes of this.arms.values()) {
      for (const wall of nodes.walls.children) {
        ((wall as THREE.Mesh).material as THREE.Material).dispose();
      }
      nodes.material.dispose();
    }
    this.arms.clear();
  }
}

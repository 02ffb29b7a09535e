/** The three feedback channels, as pure data transforms.
 *
 * Everything here is renderer-agnostic so the exact values the user
 * sees (tint color, wall placement, banner state) can be asserted
 * without a GPU.
 */

import type { ConstraintPayload, Face, RobotStatePayload, Vec3 } from "./protocol.js";

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

/** Arm body color when fully healthy. */
export const BASE_COLOR: Rgb = { r: 0.42, g: 0.45, b: 0.5 };
/** Arm body color at a full singularity. */
export const WARN_YELLOW: Rgb = { r: 1.0, g: 0.85, b: 0.0 };

/** Linear blend toward yellow: proximity p gives (1-p)*base + p*yellow. */
export function tint(proximity: number, base: Rgb = BASE_COLOR, warn: Rgb = WARN_YELLOW): Rgb {
  const p = Math.min(1, Math.max(0, proximity));
  return {
    r: (1 - p) * base.r + p * warn.r,
    g: (1 - p) * base.g + p * warn.g,
    b: (1 - p) * base.b + p * warn.b,
  };
}

export function rgbToHex({ r, g, b }: Rgb): string {
  const c = (v: number) =>
    Math.round(Math.min(1, Math.max(0, v)) * 255)
      .toString(16)
      .padStart(2, "0");
  return `#${c(r)}${c(g)}${c(b)}`;
}

/** One translucent red quad, described in the arm's base frame. */
export interface WallQuad {
  face: Face;
  /** quad center on the bound plane */
  center: Vec3;
  /** outward axis index (0=x, 1=y, 2=z) and sign of the violated face */
  axis: 0 | 1 | 2;
  sign: 1 | -1;
  /** quad extents along the two in-plane axes */
  size: [number, number];
}

const FACE_AXIS: Record<Face, { axis: 0 | 1 | 2; sign: 1 | -1 }> = {
  "+X": { axis: 0, sign: 1 },
  "-X": { axis: 0, sign: -1 },
  "+Y": { axis: 1, sign: 1 },
  "-Y": { axis: 1, sign: -1 },
  "+Z": { axis: 2, sign: 1 },
  "-Z": { axis: 2, sign: -1 },
};

/** Wall quads for every violated workspace face, in base-frame coords. */
export function wallsFor(
  constraint: ConstraintPayload,
  box: { min: Vec3; max: Vec3 } | null,
): WallQuad[] {
  if (box === null) return [];
  const center: Vec3 = [
    (box.min[0] + box.max[0]) / 2,
    (box.min[1] + box.max[1]) / 2,
    (box.min[2] + box.max[2]) / 2,
  ];
  const span: Vec3 = [
    box.max[0] - box.min[0],
    box.max[1] - box.min[1],
    box.max[2] - box.min[2],
  ];
  return constraint.workspace.map(({ face }) => {
    const { axis, sign } = FACE_AXIS[face];
    const c: Vec3 = [...center];
    c[axis] = sign > 0 ? box.max[axis] : box.min[axis];
    const size: [number, number] =
      axis === 0 ? [span[1], span[2]] : axis === 1 ? [span[0], span[2]] : [span[0], span[1]];
    return { face, center: c, axis, sign, size };
  });
}

/** The "Slow Down" banner shows while any arm is over the speed cap. */
export function speedBannerVisible(state: RobotStatePayload | null): boolean {
  if (state === null) return false;
  return state.arms.some((arm) => arm.constraint.speed_violated);
}

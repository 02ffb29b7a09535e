/** DOM-free helpers behind the HUD: indicator text and status lines. */

import type { RecordingState, RobotStatePayload } from "./protocol.js";

export function recordingIndicator(recording: RecordingState): { label: string; className: string } {
  switch (recording) {
    case "recording":
      return { label: "● REC", className: "rec-active" };
    case "armed":
      return { label: "armed", className: "rec-armed" };
    case "idle":
      return { label: "idle", className: "rec-idle" };
  }
}

export function hudLines(state: RobotStatePayload | null): string[] {
  if (state === null) return ["waiting for robot state"];
  return state.arms.map((arm) => {
    const ik = arm.ik_ok ? "ik ok" : "ik holding";
    const speed = `${arm.constraint.ee_speed.toFixed(2)} m/s`;
    const hits = arm.constraint.workspace.map((h) => h.face).join(",");
    const bounds = hits ? ` out ${hits}` : "";
    return `${arm.name}: ${ik}, ${speed}, gripper ${arm.gripper}${bounds}`;
  });
}

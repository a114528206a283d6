/** Canvas skeleton view: orthographic side projection of the kinematic chain
 * plus object markers. Pure projection math is exported for tests. */

import type { RobotModel, Vec3 } from "./fk.js";
import type { StateFrame } from "./protocol.js";

export interface View {
  width: number;
  height: number;
  scale: number; // pixels per meter
  center: [number, number, number]; // world point mapped to canvas center
  yaw: number; // rotation about world z before projecting onto x-z
}

export function defaultView(width: number, height: number): View {
  return { width, height, scale: 280, center: [0.4, 0.0, 0.45], yaw: 0.4 };
}

/** World (x, y, z) -> canvas (px, py); x right, z up after yaw about z. */
export function project(p: Vec3, view: View): [number, number] {
  const dx = p[0] - view.center[0];
  const dy = p[1] - view.center[1];
  const dz = p[2] - view.center[2];
  const c = Math.cos(view.yaw);
  const s = Math.sin(view.yaw);
  const u = c * dx - s * dy;
  return [view.width / 2 + view.scale * u, view.height / 2 - view.scale * dz];
}

export function drawFrame(
  ctx: CanvasRenderingContext2D,
  model: RobotModel,
  frame: StateFrame,
  view: View,
): void {
  ctx.clearRect(0, 0, view.width, view.height);

  // Table line at z = 0.
  ctx.strokeStyle = "#666";
  ctx.lineWidth = 1;
  ctx.beginPath();
  const [, ty] = project([0, 0, 0], view);
  ctx.moveTo(0, ty);
  ctx.lineTo(view.width, ty);
  ctx.stroke();

  ctx.strokeStyle = "#8ecae6";
  ctx.lineWidth = 2;
  for (const [from, to] of model.segments(frame.q)) {
    const [x0, y0] = project(from, view);
    const [x1, y1] = project(to, view);
    ctx.beginPath();
    ctx.moveTo(x0, y0);
    ctx.lineTo(x1, y1);
    ctx.stroke();
  }

  const dot = (p: Vec3, color: string, r: number) => {
    const [x, y] = project(p, view);
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.arc(x, y, r, 0, 2 * Math.PI);
    ctx.fill();
  };
  dot(frame.obj_pos as Vec3, frame.grasped ? "#52b788" : "#e63946", 6);
  dot(frame.obj_pred as Vec3, "#ffb703", 3);
  dot(frame.palm_pose.slice(0, 3) as Vec3, "#219ebc", 4);
}

/** Pure view helpers: metric formatting, the mode badge, the randomization
 * progress bar, and between-frame interpolation for smooth display. The
 * interpolation never extrapolates past the newest frame. */

import type { StateFrame } from "./protocol.js";

export function formatSr(sr: number): string {
  return `SR ${Math.round(sr * 100)}%`;
}

export function formatMetrics(m: StateFrame["metrics"]): string {
  return `CS ${m.cs_mean.toFixed(2)} | CT ${m.ct_mean.toFixed(2)} s | ${formatSr(m.sr)}`;
}

export interface ModeBadge {
  label: string;
  active: boolean; // true while a transport phase (not policy control) runs
}

export function modeBadge(mode: StateFrame["sm_mode"]): ModeBadge {
  return { label: mode, active: mode !== "PolicyActive" };
}

/** Width in percent for the randomization progress bar. */
export function adrBarWidth(fraction: number): number {
  return Math.round(Math.min(Math.max(fraction, 0), 1) * 100);
}

function lerp(a: number[], b: number[], t: number): number[] {
  return a.map((x, i) => x + t * (b[i] - x));
}

/** Display pose between two received frames at parameter t in [0, 1];
 * t is clamped, so the view never runs ahead of received data. Discrete
 * fields (mode, grasp, metrics) snap to the newer frame at t >= 0.5. */
export function interpolateFrames(a: StateFrame, b: StateFrame, t: number): StateFrame {
  const s = Math.min(Math.max(t, 0), 1);
  const discrete = s < 0.5 ? a : b;
  return {
    ...discrete,
    tick: discrete.tick,
    q: lerp(a.q, b.q, s),
    palm_pose: [
      ...lerp(a.palm_pose.slice(0, 3), b.palm_pose.slice(0, 3), s),
      ...discrete.palm_pose.slice(3),
    ],
    obj_pos: lerp(a.obj_pos, b.obj_pos, s),
    obj_pred: lerp(a.obj_pred, b.obj_pred, s),
  };
}

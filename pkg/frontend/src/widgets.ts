/** Target widget model: palm position gizmo, palm orientation sliders, and
 * the five hand-coordinate sliders. Values are clamped client-side so every
 * emitted target frame carries all 11 components within bounds. */

import type { TargetFrame } from "./protocol.js";

export interface TargetWidgetState {
  palmPos: [number, number, number];
  palmRot: [number, number, number]; // rotation vector [rad]
  pca: [number, number, number, number, number];
  sendOnChange: boolean;
}

/** Reachable desk-scale palm box; matches the runtime's safe target volume. */
export const PALM_POS_LO: [number, number, number] = [0.3, -0.4, 0.1];
export const PALM_POS_HI: [number, number, number] = [0.8, 0.4, 0.7];
export const PALM_ROT_BOUND = Math.PI;

/** Hand-coordinate bounds, copied from the action-basis config. */
export const PCA_LO = [-2.41784977, -0.60850417, -0.40079387, -0.37003168, -0.39139128];
export const PCA_HI = [2.5986293, 0.61126447, 0.4166688, 0.37262738, 0.37071335];

function clamp(x: number, lo: number, hi: number): number {
  return Math.min(Math.max(x, lo), hi);
}

export function defaultWidget(): TargetWidgetState {
  return {
    palmPos: [0.55, 0.0, 0.4],
    palmRot: [0.0, 2.2, 0.0],
    pca: [0, 0, 0, 0, 0],
    sendOnChange: true,
  };
}

export function clampWidget(w: TargetWidgetState): TargetWidgetState {
  return {
    palmPos: w.palmPos.map((x, i) => clamp(x, PALM_POS_LO[i], PALM_POS_HI[i])) as [
      number, number, number,
    ],
    palmRot: w.palmRot.map((x) => clamp(x, -PALM_ROT_BOUND, PALM_ROT_BOUND)) as [
      number, number, number,
    ],
    pca: w.pca.map((x, i) => clamp(x, PCA_LO[i], PCA_HI[i])) as [
      number, number, number, number, number,
    ],
    sendOnChange: w.sendOnChange,
  };
}

export function targetFrame(w: TargetWidgetState): TargetFrame {
  const c = clampWidget(w);
  return { type: "target", palm: [...c.palmPos, ...c.palmRot], pca: [...c.pca] };
}

/** Wire protocol shared with the runtime: newline-free JSON text frames,
 * each a flat object with a `type` field. Inbound frames are validated
 * before they reach any view; outbound frames are validated before send. */

export interface StateMetrics {
  cs_mean: number;
  ct_mean: number;
  sr: number;
}

export interface StateFrame {
  type: "state";
  tick: number;
  q: number[]; // 23 joint positions [rad]
  palm_pose: number[]; // position + quaternion wxyz (7)
  obj_pos: number[];
  obj_pred: number[];
  grasped: boolean;
  sm_mode: "PolicyActive" | "LiftToBin" | "Deposit" | "ReturnHome";
  metrics: StateMetrics;
  adr_fraction: number;
}

export interface ErrorFrame {
  type: "error";
  message: string;
  field?: string;
}

export interface TargetFrame {
  type: "target";
  palm: number[]; // position + rotation vector (6)
  pca: number[]; // 5 hand coordinates
}

export interface ModeFrame {
  type: "mode";
  value: "policy" | "manual";
}

export interface GainFrame {
  type: "gain";
  name: "damping" | "pd_velocity_scale";
  value: number;
}

export type ServerFrame = StateFrame | ErrorFrame;
export type ClientFrame = TargetFrame | ModeFrame | GainFrame;

const SM_MODES = ["PolicyActive", "LiftToBin", "Deposit", "ReturnHome"];

function isFiniteNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

function isVector(x: unknown, n: number): x is number[] {
  return Array.isArray(x) && x.length === n && x.every(isFiniteNumber);
}

function isStateFrame(doc: Record<string, unknown>): doc is StateFrame & Record<string, unknown> {
  const m = doc.metrics as Record<string, unknown> | undefined;
  return (
    isFiniteNumber(doc.tick) &&
    isVector(doc.q, 23) &&
    isVector(doc.palm_pose, 7) &&
    isVector(doc.obj_pos, 3) &&
    isVector(doc.obj_pred, 3) &&
    typeof doc.grasped === "boolean" &&
    typeof doc.sm_mode === "string" &&
    SM_MODES.includes(doc.sm_mode) &&
    typeof m === "object" &&
    m !== null &&
    isFiniteNumber(m.cs_mean) &&
    isFiniteNumber(m.ct_mean) &&
    isFiniteNumber(m.sr) &&
    isFiniteNumber(doc.adr_fraction)
  );
}

/** Parse one inbound frame; null means the frame must be dropped. */
export function parseServerFrame(text: string): ServerFrame | null {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) return null;
  const obj = doc as Record<string, unknown>;
  if (obj.type === "state" && isStateFrame(obj)) return obj;
  if (obj.type === "error" && typeof obj.message === "string") {
    const out: ErrorFrame = { type: "error", message: obj.message };
    if (typeof obj.field === "string") out.field = obj.field;
    return out;
  }
  return null;
}

/** Schema check for outbound frames; returns a reason string or null if ok. */
export function validateClientFrame(frame: ClientFrame): string | null {
  switch (frame.type) {
    case "target":
      if (!isVector(frame.palm, 6)) return "target.palm must be 6 finite numbers";
      if (!isVector(frame.pca, 5)) return "target.pca must be 5 finite numbers";
      return null;
    case "mode":
      return frame.value === "policy" || frame.value === "manual"
        ? null
        : "mode.value must be policy or manual";
    case "gain":
      if (frame.name !== "damping" && frame.name !== "pd_velocity_scale")
        return "gain.name must be damping or pd_velocity_scale";
      return isFiniteNumber(frame.value) ? null : "gain.value must be a finite number";
    default:
      return "unknown frame type";
  }
}

export function encodeClientFrame(frame: ClientFrame): string {
  const reason = validateClientFrame(frame);
  if (reason !== null) throw new Error(`invalid outbound frame: ${reason}`);
  return JSON.stringify(frame);
}

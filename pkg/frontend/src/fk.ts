/** Forward kinematics over the shipped robot config (a read-only copy of the
 * runtime's kinematic chain) so the skeleton renders client-side without
 * streaming link poses. Rotations are row-major 3x3 matrices. */

export type Vec3 = [number, number, number];
export type Mat3 = number[]; // row-major, length 9

export interface RobotJoint {
  name: string;
  lo: number;
  hi: number;
  group: string;
}

export interface RobotLink {
  name: string;
  parent: string;
  translation: number[];
  rpy: number[];
  joint: string | null;
  axis: number[] | null;
}

export interface RobotConfig {
  joints: RobotJoint[];
  links: RobotLink[];
  task_frames: Record<string, string>;
}

export const IDENTITY: Mat3 = [1, 0, 0, 0, 1, 0, 0, 0, 1];

export function matMul(a: Mat3, b: Mat3): Mat3 {
  const out = new Array<number>(9);
  for (let i = 0; i < 3; i++)
    for (let j = 0; j < 3; j++) {
      let s = 0;
      for (let k = 0; k < 3; k++) s += a[3 * i + k] * b[3 * k + j];
      out[3 * i + j] = s;
    }
  return out;
}

export function matVec(a: Mat3, v: Vec3): Vec3 {
  return [
    a[0] * v[0] + a[1] * v[1] + a[2] * v[2],
    a[3] * v[0] + a[4] * v[1] + a[5] * v[2],
    a[6] * v[0] + a[7] * v[1] + a[8] * v[2],
  ];
}

export function rotationAboutAxis(axis: Vec3, angle: number): Mat3 {
  const [x, y, z] = axis;
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  const cc = 1 - c;
  return [
    c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s,
    y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s,
    z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc,
  ];
}

/** Extrinsic x-y-z (roll, pitch, yaw). */
export function rotationFromRpy(roll: number, pitch: number, yaw: number): Mat3 {
  const rx = rotationAboutAxis([1, 0, 0], roll);
  const ry = rotationAboutAxis([0, 1, 0], pitch);
  const rz = rotationAboutAxis([0, 0, 1], yaw);
  return matMul(rz, matMul(ry, rx));
}

interface Frame {
  rot: Mat3;
  pos: Vec3;
}

function compose(parent: Frame, rot: Mat3, pos: Vec3): Frame {
  const p = matVec(parent.rot, pos);
  return {
    rot: matMul(parent.rot, rot),
    pos: [parent.pos[0] + p[0], parent.pos[1] + p[1], parent.pos[2] + p[2]],
  };
}

export class RobotModel {
  readonly dof: number;
  private readonly parentIndex: number[];
  private readonly jointIndex: number[]; // per link, -1 if fixed
  private readonly fixedRot: Mat3[];
  private readonly linkIndex: Map<string, number>;

  constructor(readonly config: RobotConfig) {
    this.dof = config.joints.length;
    const jointByName = new Map(config.joints.map((j, i) => [j.name, i]));
    this.linkIndex = new Map(config.links.map((l, i) => [l.name, i]));
    this.parentIndex = config.links.map((l) =>
      l.parent === "base" ? -1 : this.linkIndex.get(l.parent)!,
    );
    this.jointIndex = config.links.map((l) =>
      l.joint === null || l.joint === undefined ? -1 : jointByName.get(l.joint)!,
    );
    this.fixedRot = config.links.map((l) =>
      rotationFromRpy(l.rpy[0], l.rpy[1], l.rpy[2]),
    );
  }

  /** World frame of every link, in declaration order. */
  fk(q: number[]): Frame[] {
    if (q.length !== this.dof) throw new Error(`expected ${this.dof} joint values`);
    const frames: Frame[] = [];
    for (let i = 0; i < this.config.links.length; i++) {
      const link = this.config.links[i];
      const parent =
        this.parentIndex[i] < 0
          ? { rot: IDENTITY, pos: [0, 0, 0] as Vec3 }
          : frames[this.parentIndex[i]];
      let frame = compose(parent, this.fixedRot[i], link.translation as Vec3);
      const j = this.jointIndex[i];
      if (j >= 0) {
        frame = {
          rot: matMul(frame.rot, rotationAboutAxis(link.axis as Vec3, q[j])),
          pos: frame.pos,
        };
      }
      frames.push(frame);
    }
    return frames;
  }

  framePosition(q: number[], name: string): Vec3 {
    const link = this.config.task_frames[name] ?? name;
    const i = this.linkIndex.get(link);
    if (i === undefined) throw new Error(`unknown frame '${name}'`);
    return this.fk(q)[i].pos;
  }

  /** Parent-to-child line segments for skeleton rendering. */
  segments(q: number[]): Array<[Vec3, Vec3]> {
    const frames = this.fk(q);
    const out: Array<[Vec3, Vec3]> = [];
    for (let i = 0; i < frames.length; i++) {
      const p = this.parentIndex[i];
      const from: Vec3 = p < 0 ? [0, 0, 0] : frames[p].pos;
      out.push([from, frames[i].pos]);
    }
    return out;
  }
}

// Forward kinematics from the server-published chain config.  The console
// does no kinematic math of its own beyond this: joint-frame origins for the
// arm polylines and the TCP pose, matching the server's FK within rendering
// tolerance.

export type Vec3 = [number, number, number];

export interface ChainLinkConfig {
  origin_xyz: Vec3;
  origin_rpy: Vec3;
  axis: Vec3;
}

export interface ChainConfig {
  name?: string;
  scale?: number;
  base_pose?: { xyz?: Vec3; rpy?: Vec3 };
  links: ChainLinkConfig[];
  gripper_offset?: Vec3;
}

type Mat3 = number[]; // row-major 9

function matMul(a: Mat3, b: Mat3): Mat3 {
  const out = new Array(9).fill(0);
  for (let i = 0; i < 3; i++) {
    for (let j = 0; j < 3; j++) {
      out[3 * i + j] =
        a[3 * i] * b[j] + a[3 * i + 1] * b[3 + j] + a[3 * i + 2] * b[6 + j];
    }
  }
  return out;
}

function matVec(a: Mat3, v: Vec3): Vec3 {
  return [
    a[0] * v[0] + a[1] * v[1] + a[2] * v[2],
    a[3] * v[0] + a[4] * v[1] + a[5] * v[2],
    a[6] * v[0] + a[7] * v[1] + a[8] * v[2],
  ];
}

function rotRpy(roll: number, pitch: number, yaw: number): Mat3 {
  const cr = Math.cos(roll), sr = Math.sin(roll);
  const cp = Math.cos(pitch), sp = Math.sin(pitch);
  const cy = Math.cos(yaw), sy = Math.sin(yaw);
  return [
    cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
    sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
    -sp, cp * sr, cp * cr,
  ];
}

function rotAxisAngle(axis: Vec3, angle: number): Mat3 {
  const [x, y, z] = axis;
  const c = Math.cos(angle), s = Math.sin(angle), C = 1 - c;
  return [
    c + x * x * C, x * y * C - z * s, x * z * C + y * s,
    y * x * C + z * s, c + y * y * C, y * z * C - x * s,
    z * x * C - y * s, z * y * C + x * s, c + z * z * C,
  ];
}

export interface FkOutput {
  points: Vec3[]; // joint-frame origins followed by the TCP position
  tcp: number[]; // [x, y, z, rx, ry, rz, rw]
}

export function fkPoints(chain: ChainConfig, q: number[]): FkOutput {
  if (q.length !== chain.links.length) {
    throw new Error(`joint vector length ${q.length} != ${chain.links.length}`);
  }
  const scale = chain.scale ?? 1.0;
  const baseRpy = chain.base_pose?.rpy ?? [0, 0, 0];
  let R = rotRpy(baseRpy[0], baseRpy[1], baseRpy[2]);
  let p: Vec3 = [...(chain.base_pose?.xyz ?? [0, 0, 0])] as Vec3;
  const points: Vec3[] = [];
  for (let i = 0; i < chain.links.length; i++) {
    const link = chain.links[i];
    const o = link.origin_xyz;
    const step = matVec(R, [o[0] * scale, o[1] * scale, o[2] * scale]);
    p = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
    R = matMul(matMul(R, rotRpy(...link.origin_rpy)), rotAxisAngle(link.axis, q[i]));
    points.push(p);
  }
  const g = chain.gripper_offset ?? [0, 0, 0];
  const tip = matVec(R, [g[0] * scale, g[1] * scale, g[2] * scale]);
  const tcp: Vec3 = [p[0] + tip[0], p[1] + tip[1], p[2] + tip[2]];
  points.push(tcp);
  return { points, tcp: [...tcp, ...quatFromMatrix(R)] };
}

function quatFromMatrix(R: Mat3): [number, number, number, number] {
  const m = (i: number, j: number) => R[3 * i + j];
  const t = m(0, 0) + m(1, 1) + m(2, 2);
  let x: number, y: number, z: number, w: number;
  if (t > 0) {
    const s = Math.sqrt(t + 1) * 2;
    w = 0.25 * s;
    x = (m(2, 1) - m(1, 2)) / s;
    y = (m(0, 2) - m(2, 0)) / s;
    z = (m(1, 0) - m(0, 1)) / s;
  } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
    const s = Math.sqrt(1 + m(0, 0) - m(1, 1) - m(2, 2)) * 2;
    w = (m(2, 1) - m(1, 2)) / s;
    x = 0.25 * s;
    y = (m(0, 1) + m(1, 0)) / s;
    z = (m(0, 2) + m(2, 0)) / s;
  } else if (m(1, 1) > m(2, 2)) {
    const s = Math.sqrt(1 + m(1, 1) - m(0, 0) - m(2, 2)) * 2;
    w = (m(0, 2) - m(2, 0)) / s;
    x = (m(0, 1) + m(1, 0)) / s;
    y = 0.25 * s;
    z = (m(1, 2) + m(2, 1)) / s;
  } else {
    const s = Math.sqrt(1 + m(2, 2) - m(0, 0) - m(1, 1)) * 2;
    w = (m(1, 0) - m(0, 1)) / s;
    x = (m(0, 2) + m(2, 0)) / s;
    y = (m(1, 2) + m(2, 1)) / s;
    z = 0.25 * s;
  }
  const n = Math.hypot(x, y, z, w);
  return [x / n, y / n, z / n, w / n];
}

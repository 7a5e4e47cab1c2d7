// Serial-chain forward kinematics over the robot model document.
//
// Chain semantics: each entry translates by its offset in the current frame,
// then rotates about its axis by the joint angle; entries with a null joint
// are fixed links. The skeleton renderer needs every intermediate origin,
// so the walk returns the whole point chain (last point = foot).

import type { ChainLinkDoc, Foot, RobotModelDoc, Vec3 } from "./types.js";

type Mat3 = [number, number, number, number, number, number, number, number, number];

const IDENTITY: Mat3 = [1, 0, 0, 0, 1, 0, 0, 0, 1];

function rotationAboutAxis(axis: Vec3, angle: number): Mat3 {
  const [ax, ay, az] = axis;
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  const cc = 1 - c;
  return [
    c + ax * ax * cc, ax * ay * cc - az * s, ax * az * cc + ay * s,
    ay * ax * cc + az * s, c + ay * ay * cc, ay * az * cc - ax * s,
    az * ax * cc - ay * s, az * ay * cc + ax * s, c + az * az * cc,
  ];
}

function matMul(a: Mat3, b: Mat3): Mat3 {
  const out = new Array(9) as Mat3;
  for (let r = 0; r < 3; r++) {
    for (let col = 0; col < 3; col++) {
      out[3 * r + col] =
        a[3 * r] * b[col] + a[3 * r + 1] * b[3 + col] + a[3 * r + 2] * b[6 + col];
    }
  }
  return out;
}

function matApply(m: Mat3, v: Vec3): Vec3 {
  return [
    m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
    m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
    m[6] * v[0] + m[7] * v[1] + m[8] * v[2],
  ];
}

/** Every link origin of one leg chain in the base frame; last entry is the foot. */
export function chainPoints(model: RobotModelDoc, foot: Foot, q: number[]): Vec3[] {
  const links: ChainLinkDoc[] = model.chains[foot];
  let rot = IDENTITY;
  let p: Vec3 = [0, 0, 0];
  const points: Vec3[] = [];
  for (const link of links) {
    const step = matApply(rot, link.offset);
    p = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
    points.push(p);
    if (link.joint !== null && link.joint !== undefined && link.axis) {
      rot = matMul(rot, rotationAboutAxis(link.axis, q[link.joint]));
    }
  }
  return points;
}

export function fkFoot(model: RobotModelDoc, foot: Foot, q: number[]): Vec3 {
  const points = chainPoints(model, foot, q);
  return points[points.length - 1];
}

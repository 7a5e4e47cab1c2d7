// Skeleton scene construction: pure geometry from a received frame and the
// robot model document. The canvas drawing in main.ts only strokes what
// this module returns, so headless tests can exercise the full pipeline.

import { chainPoints } from "./fk.js";
import type { FrameMessage, RobotModelDoc, Vec3 } from "./types.js";
import { FEET } from "./types.js";

export interface Camera {
  yaw: number;    // orbit around world z
  pitch: number;  // elevation
  distance: number;
  center: Vec3;
  viewWidth: number;
  viewHeight: number;
  focal: number;
}

export function defaultCamera(viewWidth: number, viewHeight: number): Camera {
  return {
    yaw: Math.PI / 5,
    pitch: 0.28,
    distance: 2.6,
    center: [0, 0, -0.45],
    viewWidth,
    viewHeight,
    focal: 1.9,
  };
}

export function project(camera: Camera, p: Vec3): [number, number] {
  const cy = Math.cos(camera.yaw);
  const sy = Math.sin(camera.yaw);
  const cp = Math.cos(camera.pitch);
  const sp = Math.sin(camera.pitch);
  const x = p[0] - camera.center[0];
  const y = p[1] - camera.center[1];
  const z = p[2] - camera.center[2];
  // orbit: yaw about z, then pitch, then push back by distance
  const x1 = cy * x + sy * y;
  const y1 = -sy * x + cy * y;
  const z1 = z;
  const y2 = cp * y1 - 0 * z1;
  const depth = camera.distance + cp * x1 + sp * z1;
  const up = cp * z1 - sp * x1;
  const scale = (camera.focal / Math.max(depth, 0.2)) * Math.min(camera.viewWidth, camera.viewHeight);
  return [camera.viewWidth / 2 + y2 * -scale, camera.viewHeight / 2 - up * scale];
}

export interface Segment {
  a: [number, number];
  b: [number, number];
  kind: "bone" | "ground" | "torso";
}

export interface Marker {
  at: [number, number];
  radius: number;
  kind: "joint" | "contact" | "swing" | "base";
}

export interface SkeletonScene {
  segments: Segment[];
  markers: Marker[];
}

/** Base pose accumulated client-side from the corrected commands (odometer). */
export interface BasePose {
  x: number;
  y: number;
  heading: number;
}

export function advanceBase(pose: BasePose, frame: FrameMessage, dt: number): BasePose {
  if (!frame.u_prime) return pose;
  const [vx, vy, wz] = frame.u_prime;
  const c = Math.cos(pose.heading);
  const s = Math.sin(pose.heading);
  return {
    x: pose.x + dt * (c * vx - s * vy),
    y: pose.y + dt * (s * vx + c * vy),
    heading: pose.heading + dt * wz,
  };
}

export function buildScene(
  model: RobotModelDoc,
  frame: FrameMessage,
  camera: Camera,
  base: BasePose = { x: 0, y: 0, heading: 0 },
): SkeletonScene {
  const segments: Segment[] = [];
  const markers: Marker[] = [];

  // world-fixed ground grid, expressed in the base frame so it streams past
  // as the integrated base pose advances (the skeleton walks in place)
  const g = model.h_ground;
  const spacing = 0.4;
  const reach = 0.8;
  const c = Math.cos(base.heading);
  const s = Math.sin(base.heading);
  const toLocal = (wx: number, wy: number): Vec3 => {
    const dx = wx - base.x;
    const dy = wy - base.y;
    return [c * dx + s * dy, -s * dx + c * dy, g];
  };
  const startX = Math.floor((base.x - reach) / spacing) * spacing;
  const startY = Math.floor((base.y - reach) / spacing) * spacing;
  for (let u = startX; u <= base.x + reach; u += spacing) {
    segments.push({
      a: project(camera, toLocal(u, base.y - reach)),
      b: project(camera, toLocal(u, base.y + reach)),
      kind: "ground",
    });
  }
  for (let u = startY; u <= base.y + reach; u += spacing) {
    segments.push({
      a: project(camera, toLocal(base.x - reach, u)),
      b: project(camera, toLocal(base.x + reach, u)),
      kind: "ground",
    });
  }

  const roots: Vec3[] = [];
  FEET.forEach((foot, i) => {
    const points = chainPoints(model, foot, frame.q_ref);
    roots.push(points[0]);
    let prev: Vec3 = [0, 0, 0];
    for (const point of points) {
      segments.push({ a: project(camera, prev), b: project(camera, point), kind: "bone" });
      markers.push({ at: project(camera, point), radius: 3, kind: "joint" });
      prev = point;
    }
    const foot2d = project(camera, points[points.length - 1]);
    markers.push({
      at: foot2d,
      radius: 6,
      kind: frame.contact[i] ? "contact" : "swing",
    });
  });
  segments.push({ a: project(camera, roots[0]), b: project(camera, roots[1]), kind: "torso" });
  segments.push({ a: project(camera, [0, 0, 0]), b: project(camera, [0, 0, 0.35]), kind: "torso" });
  markers.push({ at: project(camera, [0, 0, g]), radius: 4, kind: "base" });
  return { segments, markers };
}

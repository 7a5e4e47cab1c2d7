// Wire and document types shared across the console.

export type Vec3 = [number, number, number];

export interface ChainLinkDoc {
  offset: Vec3;
  axis?: Vec3;
  joint: number | null;
}

export interface RobotModelDoc {
  schema_version: number;
  name: string;
  joints: string[];
  chains: { L: ChainLinkDoc[]; R: ChainLinkDoc[] };
  q_stand: number[];
  nominal_scales: { vx: number; vy: number; wz: number };
  posture_ranges: { pitch: [number, number]; roll: [number, number]; height: [number, number] };
  h_ground: number;
}

export interface FrameMessage {
  type: "frame";
  t: number;
  phi: number;
  q_ref: number[];
  contact: [number, number];
  u_prime: number[] | null; // [vx, vy, wz, pitch, roll, height]
  slip_pre: number;
  slip_post: number;
  wall?: number;
}

export interface ErrorMessage {
  type: "error";
  code: string;
  detail: string;
}

export type ServerMessage = FrameMessage | ErrorMessage;

// Full six-channel command snapshot; never a delta.
export interface CommandState {
  vx: number;
  vy: number;
  wz: number;
  pitch: number;
  roll: number;
  height: number;
}

export type Foot = "L" | "R";
export const FEET: Foot[] = ["L", "R"];

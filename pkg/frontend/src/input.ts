// Command input: sliders, keyboard and gamepad merged into one full
// six-channel snapshot, scaled by the ranges the server advertises in its
// robot model document.

import type { CommandState, RobotModelDoc } from "./types.js";

export const DEAD_ZONE = 0.05;

export interface CommandRanges {
  vx: number; // full deflection maps to the nominal scale
  vy: number;
  wz: number;
  pitch: [number, number];
  roll: [number, number];
  height: [number, number];
  neutralHeight: number;
}

export function rangesFromModel(doc: RobotModelDoc): CommandRanges {
  return {
    vx: doc.nominal_scales.vx,
    vy: doc.nominal_scales.vy,
    wz: doc.nominal_scales.wz,
    pitch: doc.posture_ranges.pitch,
    roll: doc.posture_ranges.roll,
    height: doc.posture_ranges.height,
    neutralHeight: -doc.h_ground,
  };
}

export function applyDeadZone(value: number, deadZone: number = DEAD_ZONE): number {
  if (Math.abs(value) <= deadZone) return 0;
  // rescale so output still spans the full [-1, 1]
  const sign = value > 0 ? 1 : -1;
  return sign * (Math.abs(value) - deadZone) / (1 - deadZone);
}

/** Normalized [-1, 1] axes per channel. */
export interface AxisState {
  vx: number;
  vy: number;
  wz: number;
  pitch: number;
  roll: number;
  height: number;
}

export const IDLE_AXES: AxisState = { vx: 0, vy: 0, wz: 0, pitch: 0, roll: 0, height: 0 };

function spanScale(norm: number, range: [number, number], neutral: number): number {
  if (norm >= 0) return neutral + norm * (range[1] - neutral);
  return neutral + norm * (neutral - range[0]);
}

export function axesToCommand(axes: AxisState, ranges: CommandRanges): CommandState {
  return {
    vx: applyDeadZone(axes.vx) * ranges.vx,
    vy: applyDeadZone(axes.vy) * ranges.vy,
    wz: applyDeadZone(axes.wz) * ranges.wz,
    pitch: spanScale(applyDeadZone(axes.pitch), ranges.pitch, 0),
    roll: spanScale(applyDeadZone(axes.roll), ranges.roll, 0),
    height: spanScale(applyDeadZone(axes.height), ranges.height, ranges.neutralHeight),
  };
}

const KEY_AXES: Record<string, [keyof AxisState, number]> = {
  KeyW: ["vx", 1], KeyS: ["vx", -1],
  KeyA: ["vy", 1], KeyD: ["vy", -1],
  KeyQ: ["wz", 1], KeyE: ["wz", -1],
  ArrowUp: ["pitch", 1], ArrowDown: ["pitch", -1],
  ArrowLeft: ["roll", -1], ArrowRight: ["roll", 1],
  KeyR: ["height", 1], KeyF: ["height", -1],
};

interface GamepadLike {
  connected: boolean;
  axes: ReadonlyArray<number>;
  buttons: ReadonlyArray<{ pressed: boolean; value: number }>;
}

/**
 * Merges the three input devices. Gamepad wins when one is connected and
 * deflected; otherwise keyboard keys act as on/off axes; sliders supply the
 * base value. Output is always a complete snapshot.
 */
export class InputAggregator {
  private sliders: AxisState = { ...IDLE_AXES };
  private pressed = new Set<string>();

  constructor(private ranges: CommandRanges) {}

  setSlider(channel: keyof AxisState, norm: number): void {
    this.sliders[channel] = Math.max(-1, Math.min(1, norm));
  }

  keyEvent(code: string, down: boolean): boolean {
    if (!(code in KEY_AXES)) return false;
    if (down) this.pressed.add(code);
    else this.pressed.delete(code);
    return true;
  }

  private keyboardAxes(): AxisState {
    const axes = { ...IDLE_AXES };
    for (const code of this.pressed) {
      const [channel, direction] = KEY_AXES[code];
      axes[channel] += direction;
    }
    for (const key of Object.keys(axes) as (keyof AxisState)[]) {
      axes[key] = Math.max(-1, Math.min(1, axes[key]));
    }
    return axes;
  }

  private gamepadAxes(pads: ReadonlyArray<GamepadLike | null>): AxisState | null {
    const pad = pads.find((p) => p && p.connected);
    if (!pad) return null;
    const a = pad.axes;
    const button = (i: number) => (pad.buttons[i] ? pad.buttons[i].value : 0);
    return {
      vx: -(a[1] ?? 0),
      vy: -(a[0] ?? 0),
      wz: -(a[2] ?? 0),
      pitch: -(a[3] ?? 0),
      roll: 0,
      height: button(7) - button(6), // triggers raise/lower
    };
  }

  /** Current command snapshot from all devices (gamepad > keys > sliders per channel). */
  current(pads: ReadonlyArray<GamepadLike | null> = []): CommandState {
    const sliders = this.sliders;
    const keys = this.keyboardAxes();
    const pad = this.gamepadAxes(pads);
    const merged = { ...IDLE_AXES };
    for (const channel of Object.keys(merged) as (keyof AxisState)[]) {
      const fromPad = pad ? pad[channel] : 0;
      if (Math.abs(fromPad) > DEAD_ZONE) merged[channel] = fromPad;
      else if (keys[channel] !== 0) merged[channel] = keys[channel];
      else merged[channel] = sliders[channel];
    }
    return axesToCommand(merged, this.ranges);
  }
}

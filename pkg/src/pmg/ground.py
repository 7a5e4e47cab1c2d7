"""Ground-aware command correction.

Template mixing alone does not keep stance feet still: the blended base
velocity rarely cancels the leg-relative foot sweep, so the reference shows
foot slip and float. This module pins the feet flagged as in contact,
back-computes the base velocity, yaw rate and height that keep them
stationary and on the ground plane, and emits the corrected command vector.
Joint references are never modified.

Height convention: world z = 0 at the standing pelvis position, so the
ground plane sits at z = model.h_ground and the commanded absolute height h
places the pelvis at z = h - stand_height.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pmg import _kernels
from pmg.robot import FEET, RobotModel


@dataclass
class BaseCorrection:
    """Base-channel deltas that pin the current contact feet."""

    dv: np.ndarray  # (2,) m/s
    dw: float       # rad/s
    dh: float       # m

    @classmethod
    def zero(cls) -> "BaseCorrection":
        return cls(dv=np.zeros(2), dw=0.0, dh=0.0)


@dataclass
class OptimizedCommand:
    """Corrected command vector [v', wz', pitch, roll, h']."""

    v: np.ndarray  # (2,) m/s
    wz: float
    pitch: float
    roll: float
    height: float

    def as_list(self) -> list[float]:
        return [float(self.v[0]), float(self.v[1]), float(self.wz), float(self.pitch), float(self.roll), float(self.height)]


def _contact_states(model: RobotModel, frame) -> dict[str, np.ndarray]:
    """Leg FK (position, velocity, yaw rate) for each foot flagged in contact."""
    states = {}
    for foot, flag in zip(FEET, frame.contact):
        if not flag:
            continue
        offsets, axes, jidx = model.packed_chain(foot)
        states[foot] = _kernels.chain_fk_vel(offsets, axes, jidx, frame.q_ref, frame.qd_ref)
    return states


def pinned_base_velocity(model: RobotModel, frame) -> BaseCorrection:
    """Base deltas required so every contact foot is stationary and grounded.

    With contact set C: the required base velocity is -mean of the
    leg-relative foot velocities (horizontal), the required yaw rate is
    -mean of the leg yaw rates, and the height delta places the mean contact
    foot exactly on the ground plane. Empty C yields zero correction.
    """
    states = _contact_states(model, frame)
    if not states:
        return BaseCorrection.zero()
    vals = list(states.values())
    v_hat = -np.mean([s[3:5] for s in vals], axis=0)
    w_hat = -float(np.mean([s[6] for s in vals]))
    pelvis_z = frame.u_cmd.height - model.stand_height if frame.u_cmd.height is not None else 0.0
    foot_z = float(np.mean([s[2] for s in vals])) + pelvis_z
    return BaseCorrection(
        dv=v_hat - frame.base_v[:2],
        dw=w_hat - frame.base_w,
        dh=model.h_ground - foot_z,
    )


def slip_speed(model: RobotModel, frame, v_base_xy: np.ndarray) -> float:
    """Largest planar speed among contact feet under the given base velocity."""
    states = _contact_states(model, frame)
    if not states:
        return 0.0
    return max(float(np.hypot(v_base_xy[0] + s[3], v_base_xy[1] + s[4])) for s in states.values())


def passthrough_command(frame) -> OptimizedCommand:
    u = frame.u_cmd
    return OptimizedCommand(
        v=np.array([u.vx, u.vy]),
        wz=u.wz,
        pitch=u.pitch,
        roll=u.roll,
        height=float(u.height),
    )


def optimize_command(model: RobotModel, frame, nominal=None) -> OptimizedCommand:
    """Corrected command for one frame; pitch/roll pass through unchanged."""
    opt, _ = apply_gco(model, frame, nominal)
    return opt


def apply_gco(model: RobotModel, frame, nominal=None) -> tuple[OptimizedCommand, dict]:
    """Correct one frame and report slip diagnostics.

    Returns the optimized command plus a diagnostics dict with the planar
    contact-foot slip speed before and after correction, the applied
    correction, and the double-stance residual (half the disagreement of
    the two pinned feet; exactly zero correction is possible only with one).
    """
    cmd = nominal if nominal is not None else frame.u_cmd
    states = _contact_states(model, frame)
    height_cmd = float(cmd.height) if cmd.height is not None else model.stand_height
    if not states:
        correction = BaseCorrection.zero()
        opt = OptimizedCommand(
            v=frame.base_v[:2].copy(),
            wz=frame.base_w,
            pitch=cmd.pitch,
            roll=cmd.roll,
            height=height_cmd,
        )
        diag = {"slip_pre": 0.0, "slip_post": 0.0, "correction": correction, "double_stance_residual": 0.0}
        return opt, diag
    vals = list(states.values())
    n = len(vals)
    # scalar arithmetic: this runs every tick and the contact set has at
    # most two entries
    v_hat_x = -sum(float(s[3]) for s in vals) / n
    v_hat_y = -sum(float(s[4]) for s in vals) / n
    w_hat = -sum(float(s[6]) for s in vals) / n
    pelvis_z = height_cmd - model.stand_height
    foot_z = sum(float(s[2]) for s in vals) / n + pelvis_z
    bvx, bvy = float(frame.base_v[0]), float(frame.base_v[1])
    correction = BaseCorrection(
        dv=np.array([v_hat_x - bvx, v_hat_y - bvy]),
        dw=w_hat - frame.base_w,
        dh=model.h_ground - foot_z,
    )
    opt = OptimizedCommand(
        v=np.array([v_hat_x, v_hat_y]),
        wz=w_hat,
        pitch=cmd.pitch,
        roll=cmd.roll,
        height=height_cmd + correction.dh,
    )
    slip_pre = max(math.hypot(bvx + float(s[3]), bvy + float(s[4])) for s in vals)
    slip_post = max(math.hypot(v_hat_x + float(s[3]), v_hat_y + float(s[4])) for s in vals)
    if n == 2:
        residual = 0.5 * math.hypot(float(vals[0][3] - vals[1][3]), float(vals[0][4] - vals[1][4]))
    else:
        residual = 0.0
    diag = {
        "slip_pre": slip_pre,
        "slip_post": slip_post,
        "correction": correction,
        "double_stance_residual": residual,
    }
    return opt, diag


def integrate_base(frames, dt: float) -> np.ndarray:
    """Euler-integrate the corrected base commands into a world trajectory.

    Returns an (n, 4) array of (x, y, heading, height); row k is the pose at
    the end of frame k's interval. Velocities are heading-frame; frames
    without a correction fall back to their blended nominal base velocity.
    """
    out = np.zeros((len(frames), 4))
    x = y = theta = 0.0
    for k, frame in enumerate(frames):
        if frame.u_prime is not None:
            vx, vy = float(frame.u_prime.v[0]), float(frame.u_prime.v[1])
            wz = float(frame.u_prime.wz)
            h = float(frame.u_prime.height)
        else:
            vx, vy = float(frame.base_v[0]), float(frame.base_v[1])
            wz = float(frame.base_w)
            h = float(frame.u_cmd.height)
        c, s = np.cos(theta), np.sin(theta)
        x += dt * (c * vx - s * vy)
        y += dt * (s * vx + c * vy)
        theta += dt * wz
        out[k] = (x, y, theta, h)
    return out


def write_diagnostics(frames, path) -> None:
    """Diagnostic CSV: t, slip_speed_pre, slip_speed_post, dvx, dvy, dw, dh."""
    rows = []
    for f in frames:
        corr = f.correction if f.correction is not None else BaseCorrection.zero()
        rows.append(
            [
                f.t,
                f.slip_pre if f.slip_pre is not None else 0.0,
                f.slip_post if f.slip_post is not None else 0.0,
                corr.dv[0],
                corr.dv[1],
                corr.dw,
                corr.dh,
            ]
        )
    header = "t,slip_speed_pre,slip_speed_post,dvx,dvy,dw,dh"
    np.savetxt(path, np.array(rows), delimiter=",", header=header, comments="", fmt="%.17g")

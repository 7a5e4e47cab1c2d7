"""Shared fixtures: robot models and synthetic clip sets.

The walk clips are built by Newton IK against the package FK so that each
stance foot follows an exact constant-velocity ground path; that gives the
ground-correction tests a clip that is kinematically consistent with its
recorded base velocity (and lets tests introduce known inconsistencies).
"""

from __future__ import annotations

import numpy as np
import pytest

from pmg.clips import ClipSet, ContactWindow, MirrorMap, MotionClip, StaticClip
from pmg.robot import FEET, RobotModel, build_robot_model, ChainLink, fk_foot, fk_foot_velocity


# ---------------------------------------------------------------------------
# Models


def _link(offset, axis=None, joint=None):
    return ChainLink(np.asarray(offset, dtype=float), None if axis is None else np.asarray(axis, dtype=float), joint)


@pytest.fixture(scope="session")
def leg2_model() -> RobotModel:
    """One 2-link planar leg per side, 0.4 m + 0.4 m, pitch about -y."""
    chains = {
        "L": [_link((0, 0.1, 0), (0, -1, 0), 0), _link((0, 0, -0.4), (0, -1, 0), 1), _link((0, 0, -0.4))],
        "R": [_link((0, -0.1, 0), (0, -1, 0), 2), _link((0, 0, -0.4), (0, -1, 0), 3), _link((0, 0, -0.4))],
    }
    return build_robot_model(
        name="planar-biped",
        joint_names=["l_hip", "l_knee", "r_hip", "r_knee"],
        chains=chains,
        q_stand=np.zeros(4),
        nominal_scales={"vx": 0.5, "vy": 0.3, "wz": 1.0},
        posture_ranges={"pitch": (-0.3, 0.5), "roll": (-0.25, 0.25), "height": (0.6, 0.85)},
        h_ground=-0.8,
    )


def make_humanoid() -> RobotModel:
    """12 leg DoF humanoid: yaw/roll/pitch hip, knee, pitch/roll ankle per leg."""
    def leg(side: float, base: int):
        return [
            _link((0.0, side * 0.10, -0.05), (0, 0, 1), base + 0),
            _link((0, 0, 0), (1, 0, 0), base + 1),
            _link((0, 0, 0), (0, 1, 0), base + 2),
            _link((0, 0, -0.38), (0, 1, 0), base + 3),
            _link((0, 0, -0.38), (0, 1, 0), base + 4),
            _link((0, 0, 0), (1, 0, 0), base + 5),
            _link((0, 0, -0.06)),
        ]

    names = [
        f"{s}_{j}"
        for s in ("l", "r")
        for j in ("hip_yaw", "hip_roll", "hip_pitch", "knee", "ankle_pitch", "ankle_roll")
    ]
    q_stand = np.zeros(12)
    for base in (0, 6):
        q_stand[base + 2] = -0.25
        q_stand[base + 3] = 0.50
        q_stand[base + 4] = -0.25
    model = build_robot_model(
        name="humanoid12",
        joint_names=names,
        chains={"L": leg(+1.0, 0), "R": leg(-1.0, 6)},
        q_stand=q_stand,
        nominal_scales={"vx": 0.6, "vy": 0.4, "wz": 1.0},
        posture_ranges={"pitch": (-0.3, 0.5), "roll": (-0.25, 0.25), "height": (0.55, 0.9)},
        h_ground=-0.8,  # placeholder, replaced below by the true stand foot height
    )
    z = fk_foot(model, q_stand, "L")[2]
    lo = -z - 0.20
    hi = -z + 0.05
    return build_robot_model(
        name="humanoid12",
        joint_names=names,
        chains={"L": leg(+1.0, 0), "R": leg(-1.0, 6)},
        q_stand=q_stand,
        nominal_scales={"vx": 0.6, "vy": 0.4, "wz": 1.0},
        posture_ranges={"pitch": (-0.3, 0.5), "roll": (-0.25, 0.25), "height": (lo, hi)},
        h_ground=float(z),
    )


@pytest.fixture(scope="session")
def humanoid() -> RobotModel:
    return make_humanoid()


# ---------------------------------------------------------------------------
# IK-built consistent walk clips


def solve_leg_ik(model: RobotModel, foot: str, joints: list[int], target: np.ndarray, q_init: np.ndarray) -> np.ndarray:
    """Damped Newton on a joint subset so fk_foot(q) hits a 3-d target."""
    q = q_init.copy()
    for _ in range(60):
        err = target - fk_foot(model, q, foot)
        if np.max(np.abs(err)) < 1e-12:
            return q
        J = np.zeros((3, len(joints)))
        for c, j in enumerate(joints):
            e = np.zeros(model.dof)
            e[j] = 1.0
            J[:, c], _ = fk_foot_velocity(model, q, e, foot)
        dq, *_ = np.linalg.lstsq(J, err, rcond=None)
        q[joints] += np.clip(dq, -0.5, 0.5)
    raise RuntimeError(f"IK failed for foot {foot} target {target}")


def _quintic01(x: np.ndarray) -> np.ndarray:
    return x**3 * (10.0 - 15.0 * x + 6.0 * x**2)


def make_consistent_clip(
    model: RobotModel,
    channel: str,
    speed: float,
    n: int = 120,
    T: float = 0.9,
    sigma: float = 0.2,
    lift: float = 0.05,
) -> MotionClip:
    """One gait cycle whose stance feet track the ground at exactly ``speed``.

    During stance the foot moves backward (vx) or sideways (vy) through the
    base frame at constant velocity on the ground plane; swing returns it on
    a quintic with a sinusoidal lift. Joint angles come from 3-joint Newton
    IK (hip roll/pitch + knee), so the clip is consistent with a constant
    recorded base velocity of ``speed`` along its channel.
    """
    if channel not in ("vx", "vy"):
        raise ValueError("consistent clips support vx and vy")
    windows = {"L": ContactWindow(0.25, sigma), "R": ContactWindow(0.75, sigma)}
    stance_span = speed * T * 2.0 * sigma
    d = stance_span / 2.0
    frames_q = np.tile(model.q_stand, (n, 1))
    ik_joints = {"L": [1, 2, 3], "R": [7, 8, 9]}
    stand_pos = {f: fk_foot(model, model.q_stand, f) for f in FEET}
    axis = 0 if channel == "vx" else 1

    q_prev = {f: model.q_stand.copy() for f in FEET}
    for i in range(n):
        phi = i / n
        q = frames_q[i]
        for f in FEET:
            w = windows[f]
            rel = (phi - (w.mu - w.sigma)) % 1.0  # phase since touchdown
            target = stand_pos[f].copy()
            target[2] = model.h_ground
            if rel <= 2.0 * w.sigma:
                target[axis] += d - speed * T * rel
            else:
                sw = (rel - 2.0 * w.sigma) / (1.0 - 2.0 * w.sigma)
                target[axis] += -d + stance_span * _quintic01(np.array([sw]))[0]
                target[2] += lift * np.sin(np.pi * sw)
            solved = solve_leg_ik(model, f, ik_joints[f], target, q_prev[f])
            q[ik_joints[f]] = solved[ik_joints[f]]
            q_prev[f] = solved
    base_v = np.zeros((n, 3))
    base_v[:, axis] = speed
    qd = (np.roll(frames_q, -1, axis=0) - np.roll(frames_q, 1, axis=0)) * (n / (2.0 * T))
    return MotionClip(
        name=f"walk_{channel}",
        channel=channel,
        frames_q=frames_q,
        frames_qd=qd,
        base_v=base_v,
        base_w=np.zeros(n),
        contact=windows,
        T=T,
    )


def make_turn_clip(model: RobotModel, rate: float, n: int = 120, T: float = 0.8, sigma: float = 0.2) -> MotionClip:
    """Turn-in-place template: hip yaw sweep, small pitch bounce. Not
    kinematically exact; fine for mixing and envelope tests."""
    windows = {"L": ContactWindow(0.25, sigma), "R": ContactWindow(0.75, sigma)}
    phi = np.arange(n) / n
    frames_q = np.tile(model.q_stand, (n, 1))
    yaw_amp = 0.5 * rate * T * sigma
    frames_q[:, 0] += yaw_amp * np.sin(2 * np.pi * phi)
    frames_q[:, 6] += yaw_amp * np.sin(2 * np.pi * phi + np.pi)
    frames_q[:, 2] += 0.05 * np.sin(2 * np.pi * phi)
    frames_q[:, 8] += 0.05 * np.sin(2 * np.pi * phi + np.pi)
    qd = (np.roll(frames_q, -1, axis=0) - np.roll(frames_q, 1, axis=0)) * (n / (2.0 * T))
    return MotionClip(
        name="turn_wz",
        channel="wz",
        frames_q=frames_q,
        frames_qd=qd,
        base_v=np.zeros((n, 3)),
        base_w=np.full(n, rate),
        contact=windows,
        T=T,
    )


def make_static_clips(model: RobotModel) -> dict[str, StaticClip]:
    dof = model.dof
    pitch_vec = np.zeros(dof)
    pitch_vec[[2, 8]] = 1.0
    pitch_vec[[4, 10]] = -1.0
    roll_vec = np.zeros(dof)
    roll_vec[[1, 7]] = 1.0
    roll_vec[[5, 11]] = -1.0
    squat_vec = np.zeros(dof)  # joint change per meter of height drop
    squat_vec[[2, 8]] = -1.2
    squat_vec[[3, 9]] = 2.2
    squat_vec[[4, 10]] = -1.0
    h0 = model.stand_height
    lo, hi = model.posture_ranges["height"]

    def ramp(values, vec, neutral):
        return StaticClip(
            channel="",
            command_values=np.asarray(values, dtype=float),
            frames_q=np.array([model.q_stand + (v - neutral) * vec for v in values]),
            neutral=neutral,
        )

    pitch = ramp([-0.3, 0.0, 0.5], pitch_vec, 0.0)
    pitch.channel = "pitch"
    roll = ramp([-0.25, 0.0, 0.25], roll_vec, 0.0)
    roll.channel = "roll"
    height = StaticClip(
        channel="height",
        command_values=np.array([lo, h0, hi]),
        frames_q=np.array([model.q_stand + (h0 - v) * squat_vec for v in (lo, h0, hi)]),
        neutral=h0,
    )
    return {"pitch": pitch, "roll": roll, "height": height}


def make_clipset(model: RobotModel, sigma: float = 0.2) -> ClipSet:
    mirror_pairs = tuple((i, i + 6) for i in range(6))
    clipset = ClipSet(
        dynamic={
            "vx": make_consistent_clip(model, "vx", model.nominal_scales["vx"], sigma=sigma),
            "vy": make_consistent_clip(model, "vy", model.nominal_scales["vy"], sigma=sigma),
            "wz": make_turn_clip(model, model.nominal_scales["wz"], sigma=sigma),
        },
        static=make_static_clips(model),
        robot_ref=model.name,
        mirror=MirrorMap(pairs=mirror_pairs, flip=(0, 1, 5, 6, 7, 11)),
    )
    clipset.validate()
    return clipset


@pytest.fixture(scope="session")
def clipset(humanoid) -> ClipSet:
    return make_clipset(humanoid)


@pytest.fixture(scope="session")
def warm_kernels():
    from pmg import _kernels

    _kernels.warmup()
    return True


@pytest.fixture(scope="session")
def asset_dir(tmp_path_factory, humanoid, clipset):
    """Robot + clipset files on disk, as the CLI and server consume them."""
    from pmg.clips import save_clipset
    from pmg.robot import save_robot_model

    root = tmp_path_factory.mktemp("assets")
    save_robot_model(humanoid, root / "robot.json")
    save_clipset(clipset, root / "clips.json")
    return root

"""Command-conditioned gait synthesis.

A session turns a stream of 6-channel commands (vx, vy, wz, pitch, roll,
height) into whole-body joint reference frames at a fixed tick. Per tick:

1. clamp + slew-limit the raw command
2. per-channel magnitude factor, then interpolation against the stand pose
3. convex mixture of the per-channel motions, weighted by command magnitude
4. posture offset from the static templates
5. phase advance with the mixture-weighted cycle period
6. reference velocity by temporal differencing

The mixture assigns the small weight deficit left by the stabilizing epsilon
to the standing pose, so outputs are an exact convex combination of the
active templates and the stand pose for every command magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pmg import _kernels, ground
from pmg.clips import ClipSet, MotionClip, circular_distance
from pmg.robot import DYNAMIC_CHANNELS, FEET, STATIC_CHANNELS, RobotModel

DEFAULT_EPS = 1e-6
ZERO_COMMAND_THRESHOLD = 1e-4
DEFAULT_SLEW_RATE = 2.0  # command units per second, per channel


@dataclass
class CommandVector:
    """Velocity command (vx, vy, wz) plus posture command (pitch, roll, height).

    ``height`` is the absolute base height above ground; ``None`` means the
    model's standing height.
    """

    vx: float = 0.0
    vy: float = 0.0
    wz: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0
    height: float | None = None

    def resolved(self, model: RobotModel) -> np.ndarray:
        h = model.stand_height if self.height is None else self.height
        return np.array([self.vx, self.vy, self.wz, self.pitch, self.roll, h], dtype=float)


@dataclass
class PhaseState:
    """Normalized gait phase in [0, 1) and the period currently driving it."""

    phi: float = 0.0
    T_u: float = 0.0


@dataclass
class MixtureWeights:
    alpha: dict[str, float]  # per dynamic channel, in [0, 1]
    w: dict[str, float]      # per dynamic channel, sum < 1
    beta: dict[str, float]   # per static channel, in [0, 1]
    eps: float


@dataclass
class GaitFrame:
    """One generated tick of the reference trajectory."""

    t: float
    phi: float
    q_ref: np.ndarray
    qd_ref: np.ndarray
    contact: tuple[int, int]          # (L, R)
    r_d: dict[str, float]             # blended contact half-width per foot
    mu_d: dict[str, float]            # blended contact center per foot
    base_v: np.ndarray                # blended nominal base velocity, heading frame
    base_w: float                     # blended nominal yaw rate
    u_cmd: CommandVector              # clamped + slew-limited command echo
    u_prime: "ground.OptimizedCommand | None" = None
    slip_pre: float | None = None
    slip_post: float | None = None
    correction: "ground.BaseCorrection | None" = None
    double_stance_residual: float | None = None


def magnitude_factor(u: float, nominal_scale: float) -> float:
    """Normalized command magnitude, clipped to [0, 1]."""
    if not nominal_scale > 0:
        raise ValueError(f"nominal scale must be positive, got {nominal_scale}")
    return min(abs(u) / nominal_scale, 1.0)


def mixture_weights(u_d, eps: float = DEFAULT_EPS) -> tuple[float, float, float]:
    """Per-channel mixture weights |u_x| / (sum |u| + eps)."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    mags = [abs(float(u)) for u in u_d]
    denom = sum(mags) + eps
    return tuple(m / denom for m in mags)


def channel_motion(clip: MotionClip, alpha: float, phase: float, q_stand: np.ndarray) -> np.ndarray:
    """Blend one channel's template at a phase against the standing pose."""
    return alpha * clip.sample_q(phase) + (1.0 - alpha) * q_stand


@dataclass
class BlendResult:
    q_d: np.ndarray
    r_d: dict[str, float]
    mu_d: dict[str, float]
    T_u: float
    base_v: np.ndarray
    base_w: float


def blend_dynamic(model: RobotModel, clipset: ClipSet, weights: MixtureWeights, u_d, phase: float) -> BlendResult:
    """Convex mixture of the per-channel motions at a phase.

    Joint output: sum_x w_x * (alpha_x * q_x(phi) + (1 - alpha_x) * q_stand),
    with the weight deficit 1 - sum w assigned to the stand pose. Contact
    half-widths and periods blend linearly; contact centers blend by weighted
    circular mean (a linear sum is ill-defined across the phase wrap). Base
    velocities blend with the alpha scaling (the stand pose moves at zero).
    """
    dof = model.dof
    q_d = np.zeros(dof)
    base_v = np.zeros(3)
    base_w = 0.0
    T_u = 0.0
    stand_mass = 1.0
    r_d = {f: 0.0 for f in FEET}
    mu_cos = {f: 0.0 for f in FEET}
    mu_sin = {f: 0.0 for f in FEET}
    heaviest: tuple[float, MotionClip | None] = (0.0, None)
    for channel, u in zip(DYNAMIC_CHANNELS, u_d):
        w = weights.w[channel]
        if w <= 0.0:
            continue
        alpha = weights.alpha[channel]
        clip = clipset.resolve(channel, u)
        _kernels.lerp_row_axpy(q_d, clip.frames_q, phase, w * alpha)
        _kernels.lerp_row_axpy(base_v, clip.base_v, phase, w * alpha)
        base_w += w * alpha * _kernels.lerp_series(clip.base_w, phase)
        stand_mass -= w * alpha
        T_u += w * clip.T
        for foot in FEET:
            mu, sigma, cos_mu, sin_mu = clip.contact_trig(foot)
            r_d[foot] += w * sigma
            mu_cos[foot] += w * cos_mu
            mu_sin[foot] += w * sin_mu
        if w > heaviest[0]:
            heaviest = (w, clip)
    q_d += stand_mass * model.q_stand
    mu_d = {}
    for foot in FEET:
        norm = math.hypot(mu_cos[foot], mu_sin[foot])
        if norm > 1e-12:
            mu_d[foot] = (math.atan2(mu_sin[foot], mu_cos[foot]) / (2.0 * math.pi)) % 1.0
        elif heaviest[1] is not None:
            mu_d[foot] = heaviest[1].contact[foot].mu
        else:
            mu_d[foot] = 0.0
    return BlendResult(q_d=q_d, r_d=r_d, mu_d=mu_d, T_u=T_u, base_v=base_v, base_w=base_w)


def posture_offset(clipset: ClipSet, u_s, model: RobotModel) -> tuple[np.ndarray, dict[str, float]]:
    """Joint offset realizing the posture command (pitch, roll, height).

    Per channel: beta = |u - neutral| / (distance from neutral to the
    commanded-side range endpoint); the offset is beta * (template(u) -
    q_stand), summed over channels. Neutral commands contribute nothing.
    """
    q_s = np.zeros(model.dof)
    beta = {}
    for channel, value in zip(STATIC_CHANNELS, u_s):
        value = float(value)
        lo, hi = model.posture_ranges[channel]
        clip = clipset.static.get(channel)
        neutral = clip.neutral if clip is not None else (model.stand_height if channel == "height" else 0.0)
        span = (hi - neutral) if value >= neutral else (neutral - lo)
        b = 0.0 if span <= 0 else min(abs(value - neutral) / span, 1.0)
        beta[channel] = b
        if b == 0.0:
            continue
        if clip is None:
            raise KeyError(f"posture channel {channel!r} commanded but no static clip is loaded")
        q_s += b * (clip.sample(value) - model.q_stand)
    return q_s, beta


def advance_phase(state: PhaseState, dt: float, T_u: float) -> PhaseState:
    """Wrap the phase forward by dt / T_u."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not T_u > 0:
        raise ValueError(f"T_u must be positive, got {T_u}")
    return PhaseState(phi=(state.phi + dt / T_u) % 1.0, T_u=T_u)


class GaitSession:
    """A single generator instance: owns phase, slew state and the last frame.

    Sessions are single-threaded; the bound model and clip set are immutable
    and may be shared across concurrent sessions.
    """

    def __init__(
        self,
        model: RobotModel,
        clipset: ClipSet,
        dt: float = 0.01,
        gco: bool = True,
        slew_rate: float | dict | None = DEFAULT_SLEW_RATE,
        eps: float = DEFAULT_EPS,
        zero_threshold: float = ZERO_COMMAND_THRESHOLD,
        session_id: str = "",
        gco_filter_hz: float | None = None,
    ):
        if not 0.001 <= dt <= 0.1:
            raise ValueError(f"dt must be in [0.001, 0.1] s, got {dt}")
        clipset.bind_check(model)
        self.model = model
        self.clipset = clipset
        self.dt = dt
        self.gco = gco
        self.eps = eps
        self.zero_threshold = zero_threshold
        self.session_id = session_id
        self.gco_filter_hz = gco_filter_hz
        if slew_rate is None:
            self._slew = None
        elif isinstance(slew_rate, dict):
            self._slew = np.array([slew_rate.get(c, DEFAULT_SLEW_RATE) for c in DYNAMIC_CHANNELS + STATIC_CHANNELS])
        else:
            self._slew = np.full(6, float(slew_rate))
        self._cmd_limits = [
            (-2.0 * model.nominal_scales[c], 2.0 * model.nominal_scales[c]) for c in DYNAMIC_CHANNELS
        ] + [model.posture_ranges[c] for c in STATIC_CHANNELS]
        self.reset()

    def reset(self, phi: float = 0.0) -> None:
        self.phase = PhaseState(phi=phi, T_u=0.0)
        self._cmd = np.array([0.0, 0.0, 0.0, 0.0, 0.0, self.model.stand_height])
        self._target = self._cmd.copy()
        self._prev_q_ref: np.ndarray | None = None
        self._frame_index = 0
        self._posture_cache: tuple | None = None
        self._corr_state: np.ndarray | None = None

    def _clamp(self, raw: np.ndarray) -> np.ndarray:
        lims = self._cmd_limits
        return np.array([min(max(float(v), lo), hi) for v, (lo, hi) in zip(raw, lims)])

    def _apply_slew(self, target: np.ndarray) -> np.ndarray:
        if self._slew is None:
            self._cmd = target
            return self._cmd
        prev = self._cmd
        out = np.empty(6)
        for i in range(6):
            step = self._slew[i] * self.dt
            delta = float(target[i]) - float(prev[i])
            if delta > step:
                delta = step
            elif delta < -step:
                delta = -step
            out[i] = prev[i] + delta
        self._cmd = out
        return out

    def _posture(self, u_s: np.ndarray) -> tuple[np.ndarray, dict[str, float]]:
        key = (u_s[0], u_s[1], u_s[2])
        if self._posture_cache is not None and self._posture_cache[0] == key:
            return self._posture_cache[1], self._posture_cache[2]
        q_s, beta = posture_offset(self.clipset, u_s, self.model)
        self._posture_cache = (key, q_s, beta)
        return q_s, beta

    def step(self, cmd: CommandVector | None = None) -> GaitFrame:
        """Generate the next reference frame under the given raw command.

        ``None`` holds the previous command (zero-order hold).
        """
        if cmd is not None:
            self._target = self._clamp(cmd.resolved(self.model))
        # zero-order hold: keep slewing toward the last target
        u = self._apply_slew(self._target)
        u_d = (u[0], u[1], u[2])
        u_s = u[3:6]
        phi = self.phase.phi
        q_s, beta = self._posture(u_s)
        total_mag = abs(u_d[0]) + abs(u_d[1]) + abs(u_d[2])
        if total_mag < self.zero_threshold:
            # stand fallback: the mixture degenerates at zero command, so emit
            # the stand pose directly and freeze the phase
            q_ref = self.model.q_stand + q_s
            blend = BlendResult(
                q_d=self.model.q_stand,
                r_d={f: 0.5 for f in FEET},
                mu_d={f: phi for f in FEET},
                T_u=self.phase.T_u,
                base_v=np.zeros(3),
                base_w=0.0,
            )
            contact = (1, 1)
        else:
            alpha = {c: magnitude_factor(v, self.model.nominal_scales[c]) for c, v in zip(DYNAMIC_CHANNELS, u_d)}
            w = mixture_weights(u_d, self.eps)
            weights = MixtureWeights(alpha=alpha, w=dict(zip(DYNAMIC_CHANNELS, w)), beta=beta, eps=self.eps)
            blend = blend_dynamic(self.model, self.clipset, weights, u_d, phi)
            q_ref = blend.q_d + q_s
            contact = tuple(
                int(circular_distance(phi, blend.mu_d[f]) <= blend.r_d[f]) for f in FEET
            )
            self.phase = advance_phase(self.phase, self.dt, blend.T_u)
        if self._prev_q_ref is None:
            qd_ref = np.zeros(self.model.dof)
        else:
            qd_ref = (q_ref - self._prev_q_ref) / self.dt
        self._prev_q_ref = q_ref
        frame = GaitFrame(
            t=self._frame_index * self.dt,
            phi=phi,
            q_ref=q_ref,
            qd_ref=qd_ref,
            contact=contact,
            r_d=blend.r_d,
            mu_d=blend.mu_d,
            base_v=blend.base_v,
            base_w=blend.base_w,
            u_cmd=CommandVector(u[0], u[1], u[2], u[3], u[4], u[5]),
        )
        self._frame_index += 1
        self._attach_commands(frame)
        return frame

    def _attach_commands(self, frame: GaitFrame) -> None:
        if self.gco:
            opt, diag = ground.apply_gco(self.model, frame)
            if self.gco_filter_hz is not None:
                opt = self._filter_correction(opt)
            frame.u_prime = opt
            frame.slip_pre = diag["slip_pre"]
            frame.slip_post = diag["slip_post"]
            frame.correction = diag["correction"]
            frame.double_stance_residual = diag["double_stance_residual"]
        else:
            frame.u_prime = ground.passthrough_command(frame)
            pre = ground.slip_speed(self.model, frame, frame.base_v[:2])
            frame.slip_pre = pre
            frame.slip_post = pre
            frame.correction = None

    def _filter_correction(self, opt: "ground.OptimizedCommand") -> "ground.OptimizedCommand":
        # first-order low pass on the corrected channels; contact switching
        # otherwise steps u' discontinuously
        raw = np.array([opt.v[0], opt.v[1], opt.wz, opt.height])
        if self._corr_state is None:
            self._corr_state = raw
        else:
            a = 1.0 - math.exp(-2.0 * math.pi * self.gco_filter_hz * self.dt)
            self._corr_state = self._corr_state + a * (raw - self._corr_state)
        f = self._corr_state
        return ground.OptimizedCommand(v=f[:2].copy(), wz=f[2], pitch=opt.pitch, roll=opt.roll, height=f[3])


# ---------------------------------------------------------------------------
# Batch mode


def read_schedule(path) -> np.ndarray:
    """Command schedule CSV: t, vx, vy, wz, pitch, roll, height."""
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
    has_header = any(c.isalpha() for c in first.split(",")[0])
    data = np.loadtxt(path, delimiter=",", skiprows=1 if has_header else 0, ndmin=2)
    if data.shape[1] != 7:
        raise ValueError(f"schedule must have 7 columns (t + 6 channels), got {data.shape[1]}")
    if np.any(np.diff(data[:, 0]) < 0):
        raise ValueError("schedule timestamps must be non-decreasing")
    return data


def write_schedule(rows: np.ndarray, path) -> None:
    header = "t,vx,vy,wz,pitch,roll,height"
    np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.17g")


def generate_schedule(session: GaitSession, schedule: np.ndarray, duration: float | None = None) -> list[GaitFrame]:
    """Run a session over a command schedule with zero-order hold between rows."""
    if duration is None:
        duration = float(schedule[-1, 0])
    n_frames = int(round(duration / session.dt)) + 1
    frames = []
    row = 0
    for k in range(n_frames):
        t = k * session.dt
        while row + 1 < len(schedule) and schedule[row + 1, 0] <= t + 1e-12:
            row += 1
        c = schedule[row]
        cmd = CommandVector(vx=c[1], vy=c[2], wz=c[3], pitch=c[4], roll=c[5], height=c[6])
        frames.append(session.step(cmd))
    return frames


def write_trajectory(frames: list[GaitFrame], path) -> None:
    """Trajectory CSV: t, phi, q_ref[...], qd_ref[...], contactL, contactR."""
    if not frames:
        raise ValueError("no frames to write")
    dof = len(frames[0].q_ref)
    header = (
        "t,phi,"
        + ",".join(f"q_ref_{i}" for i in range(dof))
        + ","
        + ",".join(f"qd_ref_{i}" for i in range(dof))
        + ",contact_l,contact_r"
    )
    rows = np.array(
        [
            [f.t, f.phi, *f.q_ref, *f.qd_ref, float(f.contact[0]), float(f.contact[1])]
            for f in frames
        ]
    )
    np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.17g")


def read_trajectory(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)

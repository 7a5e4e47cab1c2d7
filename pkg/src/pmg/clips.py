"""Motion clip data model and preprocessing.

Dynamic clips hold exactly one gait cycle, phase-parameterized on [0, 1):
joint trajectories, base velocity, a per-foot circular contact window
{mu, sigma} and the cycle period T. Static clips map a posture command value
(pitch/roll/height) to a joint posture. Preprocessing turns raw contact-
annotated captures into cycle-aligned clips and smooths the wrap boundary.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from pmg import _kernels
from pmg.robot import DYNAMIC_CHANNELS, FEET, STATIC_CHANNELS, RobotModel
from pmg.schema import SchemaError, as_float, as_matrix, as_vector, require

CLIPSET_SCHEMA_VERSION = 1
DEFAULT_KERNEL_STD = 3.0


def circular_distance(a: float, b: float) -> float:
    """Distance between two phases on the unit circle, in [0, 0.5]."""
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


@dataclass(frozen=True)
class ContactWindow:
    """Circular stance window: center phase ``mu``, half-width ``sigma``."""

    mu: float
    sigma: float

    def validate(self, path: str = "contact") -> None:
        if not 0.0 <= self.mu < 1.0:
            raise SchemaError(f"{path}.mu", f"phase center must be in [0, 1), got {self.mu}")
        if not 0.0 < self.sigma < 0.5:
            raise SchemaError(f"{path}.sigma", f"half-width must be in (0, 0.5), got {self.sigma}")


@dataclass
class MotionClip:
    """One cycle of a phase-parameterized locomotion primitive."""

    name: str
    channel: str
    frames_q: np.ndarray   # (n_frames, dof), rad
    frames_qd: np.ndarray  # (n_frames, dof), rad/s
    base_v: np.ndarray     # (n_frames, 3), m/s, heading frame
    base_w: np.ndarray     # (n_frames,), rad/s
    contact: dict[str, ContactWindow]
    T: float               # cycle period, s

    @property
    def n_frames(self) -> int:
        return self.frames_q.shape[0]

    @property
    def dof(self) -> int:
        return self.frames_q.shape[1]

    def validate(self) -> None:
        if self.n_frames < 8:
            raise SchemaError(self.name, f"clip needs >= 8 frames, got {self.n_frames}")
        if not self.T > 0:
            raise SchemaError(f"{self.name}.T", f"cycle period must be positive, got {self.T}")
        for foot in FEET:
            if foot not in self.contact:
                raise SchemaError(f"{self.name}.contact", f"missing foot {foot}")
            self.contact[foot].validate(f"{self.name}.contact.{foot}")
        if self.frames_qd.shape != self.frames_q.shape:
            raise SchemaError(f"{self.name}.frames_qd", "shape mismatch with frames_q")
        if self.base_v.shape != (self.n_frames, 3) or self.base_w.shape != (self.n_frames,):
            raise SchemaError(f"{self.name}.base_v", "base velocity series length mismatch")

    def contact_trig(self, foot: str) -> tuple[float, float, float, float]:
        """(mu, sigma, cos 2*pi*mu, sin 2*pi*mu), cached per window object."""
        cache = getattr(self, "_trig_cache", None)
        if cache is None:
            cache = {}
            self._trig_cache = cache
        window = self.contact[foot]
        hit = cache.get(foot)
        if hit is None or hit[0] is not window:
            angle = 2.0 * np.pi * window.mu
            hit = (window, window.mu, window.sigma, float(np.cos(angle)), float(np.sin(angle)))
            cache[foot] = hit
        return hit[1], hit[2], hit[3], hit[4]

    def sample_q(self, phase: float) -> np.ndarray:
        """Joint vector at phase, circular linear interpolation between frames."""
        return _kernels.lerp_row(self.frames_q, phase % 1.0)

    def sample_qd(self, phase: float) -> np.ndarray:
        return _kernels.lerp_row(self.frames_qd, phase % 1.0)

    def sample_base(self, phase: float) -> tuple[np.ndarray, float]:
        phase = phase % 1.0
        return _kernels.lerp_row(self.base_v, phase), float(_kernels.lerp_series(self.base_w, phase))


@dataclass
class StaticClip:
    """Posture template indexed by command value instead of phase."""

    channel: str
    command_values: np.ndarray  # strictly monotone, includes the neutral value
    frames_q: np.ndarray        # (len(command_values), dof)
    neutral: float = 0.0

    @property
    def dof(self) -> int:
        return self.frames_q.shape[1]

    def validate(self) -> None:
        cv = self.command_values
        if cv.ndim != 1 or len(cv) < 2:
            raise SchemaError(f"static.{self.channel}.command_values", "need >= 2 command values")
        diffs = np.diff(cv)
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise SchemaError(f"static.{self.channel}.command_values", "must be strictly monotone")
        lo, hi = min(cv[0], cv[-1]), max(cv[0], cv[-1])
        if not lo - 1e-12 <= self.neutral <= hi + 1e-12:
            raise SchemaError(f"static.{self.channel}.command_values", f"neutral value {self.neutral} not covered by [{lo}, {hi}]")
        if self.frames_q.shape[0] != len(cv):
            raise SchemaError(f"static.{self.channel}.frames_q", "one frame per command value required")

    def sample(self, value: float) -> np.ndarray:
        """Posture at a command value, linear interpolation with endpoint clamp."""
        cv = self.command_values
        if cv[0] > cv[-1]:
            cv = cv[::-1]
            frames = self.frames_q[::-1]
        else:
            frames = self.frames_q
        value = float(np.clip(value, cv[0], cv[-1]))
        i = int(np.searchsorted(cv, value, side="right")) - 1
        i = min(max(i, 0), len(cv) - 2)
        span = cv[i + 1] - cv[i]
        f = (value - cv[i]) / span if span > 0 else 0.0
        return (1.0 - f) * frames[i] + f * frames[i + 1]


@dataclass(frozen=True)
class MirrorMap:
    """Left/right joint relabeling used to derive opposite-direction clips.

    ``pairs`` lists (i, j) joint indices swapped by the mirror; ``flip``
    lists joints whose sign is negated after the swap.
    """

    pairs: tuple[tuple[int, int], ...]
    flip: tuple[int, ...]

    def permutation(self, dof: int) -> tuple[np.ndarray, np.ndarray]:
        perm = np.arange(dof)
        for i, j in self.pairs:
            perm[i], perm[j] = j, i
        sign = np.ones(dof)
        sign[list(self.flip)] = -1.0
        return perm, sign


def mirror_clip(clip: MotionClip, mirror: MirrorMap) -> MotionClip:
    """Reflect a clip across the sagittal plane (swap feet, negate lateral motion)."""
    perm, sign = mirror.permutation(clip.dof)
    base_v = clip.base_v.copy()
    base_v[:, 1] *= -1.0
    return MotionClip(
        name=clip.name + "~mirror",
        channel=clip.channel,
        frames_q=clip.frames_q[:, perm] * sign,
        frames_qd=clip.frames_qd[:, perm] * sign,
        base_v=base_v,
        base_w=-clip.base_w,
        contact={"L": clip.contact["R"], "R": clip.contact["L"]},
        T=clip.T,
    )


@dataclass
class ClipSet:
    """The clip library a generator session binds against.

    Dynamic keys are channel names with an optional ``-`` suffix for the
    negative-direction variant (``vy-``). Negative commands resolve to the
    explicit variant, else to a mirrored base clip when a mirror map is
    declared, else to the base clip itself (magnitude-only template).
    """

    dynamic: dict[str, MotionClip]
    static: dict[str, StaticClip]
    robot_ref: str = ""
    mirror: MirrorMap | None = None
    _mirror_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dof(self) -> int:
        for clip in self.dynamic.values():
            return clip.dof
        for clip in self.static.values():
            return clip.dof
        raise ValueError("empty clip set")

    def validate(self) -> None:
        for key, clip in self.dynamic.items():
            base = key[:-1] if key.endswith("-") else key
            if base not in DYNAMIC_CHANNELS:
                raise SchemaError(f"dynamic.{key}", f"unknown channel, expected one of {DYNAMIC_CHANNELS}")
            clip.validate()
            if clip.dof != self.dof:
                raise SchemaError(f"dynamic.{key}", f"dof {clip.dof} != {self.dof}")
        for key, clip in self.static.items():
            if key not in STATIC_CHANNELS:
                raise SchemaError(f"static.{key}", f"unknown channel, expected one of {STATIC_CHANNELS}")
            clip.validate()
            if clip.dof != self.dof:
                raise SchemaError(f"static.{key}", f"dof {clip.dof} != {self.dof}")

    def bind_check(self, model: RobotModel) -> None:
        """Errors a session would hit at runtime, surfaced at bind time."""
        self.validate()
        if self.dof != model.dof:
            raise SchemaError("dynamic", f"clip dof {self.dof} != model dof {model.dof}")
        for channel in DYNAMIC_CHANNELS:
            if channel not in self.dynamic:
                raise SchemaError(f"dynamic.{channel}", "no clip for channel referenced by nominal_scales")

    def resolve(self, channel: str, sign: float) -> MotionClip:
        if sign < 0:
            variant = channel + "-"
            if variant in self.dynamic:
                return self.dynamic[variant]
            if self.mirror is not None and channel in ("vy", "wz"):
                if channel not in self._mirror_cache:
                    self._mirror_cache[channel] = mirror_clip(self.dynamic[channel], self.mirror)
                return self._mirror_cache[channel]
        if channel not in self.dynamic:
            raise KeyError(f"no clip for active channel {channel!r}")
        return self.dynamic[channel]


# ---------------------------------------------------------------------------
# Preprocessing


@dataclass
class RawCapture:
    """Contact-annotated joint capture, straight from a CSV table."""

    t: np.ndarray
    q: np.ndarray          # (n, dof)
    contact_l: np.ndarray  # (n,) bool
    contact_r: np.ndarray  # (n,) bool
    base_v: np.ndarray | None = None
    base_w: np.ndarray | None = None


def read_raw_capture(path, dof: int | None = None) -> RawCapture:
    """Read a raw capture CSV: t, q[0..dof), contactL, contactR[, vx, vy, vz, wz].

    A header row is detected and skipped. Without a header, ``dof`` decides
    whether trailing base-velocity columns are present.
    """
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
    has_header = any(c.isalpha() for c in first.split(",")[0])
    data = np.loadtxt(path, delimiter=",", skiprows=1 if has_header else 0, ndmin=2)
    ncols = data.shape[1]
    if dof is None:
        if has_header:
            names = [c.strip() for c in first.split(",")]
            dof = sum(1 for n in names if n.startswith("q"))
        else:
            dof = ncols - 3
    base = None
    if ncols == dof + 7:
        base = data[:, dof + 3 : dof + 7]
    elif ncols != dof + 3:
        raise SchemaError(str(path), f"{ncols} columns do not match dof={dof} with or without base velocity")
    return RawCapture(
        t=data[:, 0],
        q=data[:, 1 : dof + 1],
        contact_l=data[:, dof + 1] > 0.5,
        contact_r=data[:, dof + 2] > 0.5,
        base_v=base[:, :3] if base is not None else None,
        base_w=base[:, 3] if base is not None else None,
    )


def _touchdowns(contact: np.ndarray) -> np.ndarray:
    c = contact.astype(bool)
    return np.flatnonzero(~c[:-1] & c[1:]) + 1


def _stance_window(contact: np.ndarray, foot: str, name: str) -> ContactWindow:
    """Circular contact window of one foot over a single cycle."""
    n = len(contact)
    c = contact.astype(bool)
    if c.all() or not c.any():
        raise ValueError(f"{name}: foot {foot} has no {'swing' if c.all() else 'stance'} phase in the cycle")
    starts = np.flatnonzero(~np.roll(c, 1) & c)
    if len(starts) != 1:
        warnings.warn(f"{name}: foot {foot} has {len(starts)} stance intervals in one cycle; using the longest")
    best_start, best_len = 0, -1
    for s in starts:
        length = 0
        while c[(s + length) % n] and length < n:
            length += 1
        if length > best_len:
            best_start, best_len = s, length
    mu = (best_start + best_len / 2.0) / n % 1.0
    sigma = best_len / (2.0 * n)
    return ContactWindow(mu=mu, sigma=min(sigma, 0.5 - 1.0 / n))


def extract_cycle(
    raw: RawCapture,
    rate: float,
    name: str = "clip",
    channel: str = "vx",
    periodicity_tol: float = 0.1,
) -> MotionClip:
    """Clip a raw capture to exactly one gait cycle, anchored on left-foot touchdowns.

    The cycle spans the first left touchdown to the next one (exclusive); the
    contact window of each foot is summarized as its circular stance center
    and half-width. Joint velocities are recomputed by circular central
    differences, so a later boundary smoothing stays self-consistent.
    """
    tds = _touchdowns(raw.contact_l)
    if len(tds) < 2:
        raise ValueError(f"insufficient cycles: need >= 2 left-foot touchdowns, found {len(tds)}")
    start, end = int(tds[0]), int(tds[1])
    frames_q = raw.q[start:end].copy()
    n = frames_q.shape[0]
    if n < 8:
        raise ValueError(f"cycle of {n} frames is too short")
    T = n / rate
    mismatch = float(np.max(np.abs(raw.q[end % len(raw.q)] - frames_q[0]))) if end < len(raw.q) else 0.0
    boundary_jump = float(np.max(np.abs(frames_q[-1] - frames_q[0])))
    if boundary_jump > periodicity_tol:
        warnings.warn(f"{name}: cycle boundary joint mismatch {boundary_jump:.3f} rad exceeds {periodicity_tol}; smoothing recommended")
    clip = MotionClip(
        name=name,
        channel=channel,
        frames_q=frames_q,
        frames_qd=_circular_qd(frames_q, T),
        base_v=raw.base_v[start:end].copy() if raw.base_v is not None else np.zeros((n, 3)),
        base_w=raw.base_w[start:end].copy() if raw.base_w is not None else np.zeros(n),
        contact={
            "L": _stance_window(raw.contact_l[start:end], "L", name),
            "R": _stance_window(raw.contact_r[start:end], "R", name),
        },
        T=T,
    )
    clip.validate()
    return clip


def _circular_qd(frames_q: np.ndarray, T: float) -> np.ndarray:
    n = frames_q.shape[0]
    return (np.roll(frames_q, -1, axis=0) - np.roll(frames_q, 1, axis=0)) * (n / (2.0 * T))


def _gaussian_kernel(std: float) -> np.ndarray:
    half = max(1, int(np.ceil(4.0 * std)))
    x = np.arange(-half, half + 1, dtype=float)
    w = np.exp(-0.5 * (x / std) ** 2)
    return w / w.sum()


def smooth_boundary(clip: MotionClip, kernel_std: float = DEFAULT_KERNEL_STD) -> MotionClip:
    """Apply a circular Gaussian filter to the joint trajectories.

    Wrap-around filtering removes the touchdown-boundary discontinuity while
    leaving constants untouched (the kernel is normalized). Velocities are
    recomputed from the smoothed positions.
    """
    if not kernel_std > 0:
        raise ValueError(f"kernel_std must be positive, got {kernel_std}")
    kernel = _gaussian_kernel(kernel_std)
    half = len(kernel) // 2
    smoothed = np.zeros_like(clip.frames_q)
    for k, w in enumerate(kernel):
        smoothed += w * np.roll(clip.frames_q, half - k, axis=0)
    return replace(
        clip,
        frames_q=smoothed,
        frames_qd=_circular_qd(smoothed, clip.T),
    )


def contact_at_phase(clip: MotionClip, foot: str, phase: float) -> int:
    """1 if the foot's circular stance window covers the phase, else 0."""
    window = clip.contact[foot]
    return int(circular_distance(phase % 1.0, window.mu) <= window.sigma)


# ---------------------------------------------------------------------------
# Serialization


def clip_to_dict(clip: MotionClip) -> dict:
    return {
        "name": clip.name,
        "channel": clip.channel,
        "dof": clip.dof,
        "n_frames": clip.n_frames,
        "T": clip.T,
        "contact": {f: {"mu": clip.contact[f].mu, "sigma": clip.contact[f].sigma} for f in FEET},
        "frames_q": clip.frames_q.tolist(),
        "frames_qd": clip.frames_qd.tolist(),
        "base_v": clip.base_v.tolist(),
        "base_w": clip.base_w.tolist(),
    }


def clip_from_dict(doc: dict, path: str = "clip") -> MotionClip:
    dof = require(doc, "dof", path)
    contact_doc = require(doc, "contact", path)
    contact = {}
    for foot in FEET:
        w = require(contact_doc, foot, f"{path}.contact")
        contact[foot] = ContactWindow(
            mu=as_float(require(w, "mu", f"{path}.contact.{foot}"), f"{path}.contact.{foot}.mu"),
            sigma=as_float(require(w, "sigma", f"{path}.contact.{foot}"), f"{path}.contact.{foot}.sigma"),
        )
    clip = MotionClip(
        name=str(require(doc, "name", path)),
        channel=str(require(doc, "channel", path)),
        frames_q=as_matrix(require(doc, "frames_q", path), dof, f"{path}.frames_q"),
        frames_qd=as_matrix(require(doc, "frames_qd", path), dof, f"{path}.frames_qd"),
        base_v=as_matrix(require(doc, "base_v", path), 3, f"{path}.base_v"),
        base_w=np.asarray(require(doc, "base_w", path), dtype=float),
        contact=contact,
        T=as_float(require(doc, "T", path), f"{path}.T"),
    )
    clip.validate()
    return clip


def static_to_dict(clip: StaticClip) -> dict:
    return {
        "channel": clip.channel,
        "dof": clip.dof,
        "neutral": clip.neutral,
        "command_values": clip.command_values.tolist(),
        "frames_q": clip.frames_q.tolist(),
    }


def static_from_dict(doc: dict, path: str = "static") -> StaticClip:
    dof = require(doc, "dof", path)
    clip = StaticClip(
        channel=str(require(doc, "channel", path)),
        command_values=np.asarray(require(doc, "command_values", path), dtype=float),
        frames_q=as_matrix(require(doc, "frames_q", path), dof, f"{path}.frames_q"),
        neutral=as_float(doc.get("neutral", 0.0), f"{path}.neutral"),
    )
    clip.validate()
    return clip


def clipset_to_dict(clipset: ClipSet) -> dict:
    doc = {
        "schema_version": CLIPSET_SCHEMA_VERSION,
        "robot_ref": clipset.robot_ref,
        "dynamic": {k: clip_to_dict(c) for k, c in clipset.dynamic.items()},
        "static": {k: static_to_dict(c) for k, c in clipset.static.items()},
    }
    if clipset.mirror is not None:
        doc["mirror"] = {"pairs": [list(p) for p in clipset.mirror.pairs], "flip": list(clipset.mirror.flip)}
    return doc


def clipset_from_dict(doc: dict) -> ClipSet:
    dynamic_doc = require(doc, "dynamic", "")
    static_doc = doc.get("static", {})
    mirror = None
    if "mirror" in doc:
        m = doc["mirror"]
        mirror = MirrorMap(
            pairs=tuple((int(i), int(j)) for i, j in require(m, "pairs", "mirror")),
            flip=tuple(int(i) for i in m.get("flip", [])),
        )
    clipset = ClipSet(
        dynamic={k: clip_from_dict(v, f"dynamic.{k}") for k, v in dynamic_doc.items()},
        static={k: static_from_dict(v, f"static.{k}") for k, v in static_doc.items()},
        robot_ref=str(doc.get("robot_ref", "")),
        mirror=mirror,
    )
    clipset.validate()
    return clipset


def save_clipset(clipset: ClipSet, path) -> None:
    Path(path).write_text(json.dumps(clipset_to_dict(clipset), indent=1))


def load_clipset(path) -> ClipSet:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), f"not valid JSON: {exc}") from exc
    return clipset_from_dict(doc)


def save_clip(clip: MotionClip, path) -> None:
    Path(path).write_text(json.dumps(clip_to_dict(clip), indent=1))


def load_clip(path) -> MotionClip:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), f"not valid JSON: {exc}") from exc
    return clip_from_dict(doc)

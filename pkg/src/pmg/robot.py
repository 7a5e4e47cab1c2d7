"""Leg kinematic model: standing pose, command scales, foot FK and velocities.

The model is deliberately minimal: per-foot serial chains of revolute joints
(plus fixed links), the standing joint vector, nominal command scales and
posture ranges, and the ground height. All positions are expressed in the
base (pelvis) frame; composing with the floating base happens downstream.
Instances are immutable after load and safe to share across sessions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pmg import _kernels
from pmg.schema import (
    SchemaError,
    as_float,
    as_matrix,
    as_vector,
    check_schema_version,
    require,
)

FEET = ("L", "R")
DYNAMIC_CHANNELS = ("vx", "vy", "wz")
STATIC_CHANNELS = ("pitch", "roll", "height")

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ChainLink:
    """One chain element: translate by ``offset``, then rotate about ``axis``.

    ``joint`` indexes the model joint vector; ``None`` marks a fixed link
    (``axis`` unused), typically the terminal ankle-to-sole transform.
    """

    offset: np.ndarray
    axis: np.ndarray | None
    joint: int | None


@dataclass(frozen=True)
class FootState:
    """Foot position, linear velocity and yaw rate in the base frame."""

    position: np.ndarray
    linear_velocity: np.ndarray
    yaw_rate: float


@dataclass(frozen=True)
class RobotModel:
    name: str
    joint_names: tuple[str, ...]
    chains: dict[str, tuple[ChainLink, ...]]
    q_stand: np.ndarray
    nominal_scales: dict[str, float]
    posture_ranges: dict[str, tuple[float, float]]
    h_ground: float
    joint_limits: np.ndarray | None = None
    # packed per-foot (offsets, axes, jidx) arrays for the FK kernels
    _packed: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dof(self) -> int:
        return len(self.joint_names)

    @property
    def stand_height(self) -> float:
        """Neutral base height above ground (the height-command neutral)."""
        return -self.h_ground

    def packed_chain(self, foot: str):
        if foot not in self.chains:
            raise ValueError(f"unknown foot id {foot!r}, expected one of {sorted(self.chains)}")
        return self._packed[foot]

    def limit_violations(self, q: np.ndarray) -> np.ndarray:
        """Boolean mask of joints outside declared limits; all-False without limits."""
        if self.joint_limits is None:
            return np.zeros(self.dof, dtype=bool)
        return (q < self.joint_limits[:, 0]) | (q > self.joint_limits[:, 1])

    def to_dict(self) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "joints": list(self.joint_names),
            "chains": {
                foot: [
                    {
                        "offset": [float(v) for v in link.offset],
                        **({"axis": [float(v) for v in link.axis]} if link.axis is not None else {}),
                        "joint": link.joint,
                    }
                    for link in links
                ]
                for foot, links in self.chains.items()
            },
            "q_stand": [float(v) for v in self.q_stand],
            "nominal_scales": dict(self.nominal_scales),
            "posture_ranges": {k: [float(v[0]), float(v[1])] for k, v in self.posture_ranges.items()},
            "h_ground": float(self.h_ground),
        }
        if self.joint_limits is not None:
            doc["joint_limits"] = [[float(a), float(b)] for a, b in self.joint_limits]
        return doc


def _pack_chain(links) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = len(links)
    offsets = np.zeros((m, 3))
    axes = np.zeros((m, 3))
    jidx = np.full(m, -1, dtype=np.int64)
    for k, link in enumerate(links):
        offsets[k] = link.offset
        if link.joint is not None:
            axes[k] = link.axis
            jidx[k] = link.joint
    return offsets, axes, jidx


def build_robot_model(
    name: str,
    joint_names,
    chains: dict,
    q_stand,
    nominal_scales: dict,
    posture_ranges: dict,
    h_ground: float,
    joint_limits=None,
) -> RobotModel:
    """Assemble and validate a model from in-memory pieces."""
    joint_names = tuple(joint_names)
    dof = len(joint_names)
    q_stand = np.asarray(q_stand, dtype=float)
    if q_stand.shape != (dof,):
        raise SchemaError("q_stand", f"length {q_stand.shape} does not match {dof} joints")
    norm_chains: dict[str, tuple[ChainLink, ...]] = {}
    for foot, links in chains.items():
        seen: set[int] = set()
        out = []
        for k, link in enumerate(links):
            path = f"chains.{foot}[{k}]"
            offset = np.asarray(link.offset, dtype=float)
            if link.joint is None:
                out.append(ChainLink(offset, None, None))
                continue
            if not 0 <= link.joint < dof:
                raise SchemaError(f"{path}.joint", f"index {link.joint} out of range for {dof} joints")
            if link.joint in seen:
                raise SchemaError(f"{path}.joint", f"joint {link.joint} repeated in chain {foot}")
            seen.add(link.joint)
            axis = np.asarray(link.axis, dtype=float)
            if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
                raise SchemaError(f"{path}.axis", f"rotation axis must have unit norm, got {np.linalg.norm(axis):.12f}")
            out.append(ChainLink(offset, axis, link.joint))
        norm_chains[foot] = tuple(out)
    for channel in DYNAMIC_CHANNELS:
        scale = nominal_scales.get(channel)
        if scale is None:
            raise SchemaError(f"nominal_scales.{channel}", "missing required channel scale")
        if not scale > 0:
            raise SchemaError(f"nominal_scales.{channel}", f"must be strictly positive, got {scale}")
    for channel in STATIC_CHANNELS:
        lo, hi = posture_ranges.get(channel, (None, None))
        if lo is None:
            raise SchemaError(f"posture_ranges.{channel}", "missing required range")
        if not lo < hi:
            raise SchemaError(f"posture_ranges.{channel}", f"min {lo} must be < max {hi}")
    if joint_limits is not None:
        joint_limits = np.asarray(joint_limits, dtype=float)
        if joint_limits.shape != (dof, 2):
            raise SchemaError("joint_limits", f"expected shape ({dof}, 2), got {joint_limits.shape}")
    model = RobotModel(
        name=name,
        joint_names=joint_names,
        chains=norm_chains,
        q_stand=q_stand,
        nominal_scales={c: float(nominal_scales[c]) for c in DYNAMIC_CHANNELS},
        posture_ranges={c: (float(posture_ranges[c][0]), float(posture_ranges[c][1])) for c in STATIC_CHANNELS},
        h_ground=float(h_ground),
        joint_limits=joint_limits,
    )
    for foot, links in norm_chains.items():
        model._packed[foot] = _pack_chain(links)
    return model


def parse_robot_model(doc: dict) -> RobotModel:
    check_schema_version(doc, SCHEMA_VERSION)
    joints = require(doc, "joints", "")
    if not isinstance(joints, list) or not all(isinstance(j, str) for j in joints):
        raise SchemaError("joints", "expected a list of joint name strings")
    chains_doc = require(doc, "chains", "")
    chains: dict[str, list[ChainLink]] = {}
    for foot in FEET:
        entries = require(chains_doc, foot, "chains")
        if not isinstance(entries, list) or not entries:
            raise SchemaError(f"chains.{foot}", "expected a non-empty list of chain links")
        links = []
        for k, entry in enumerate(entries):
            path = f"chains.{foot}[{k}]"
            offset = as_vector(require(entry, "offset", path), 3, f"{path}.offset")
            joint = entry.get("joint")
            if joint is None:
                links.append(ChainLink(offset, None, None))
                continue
            axis = as_vector(require(entry, "axis", path), 3, f"{path}.axis")
            links.append(ChainLink(offset, axis, int(joint)))
        chains[foot] = links
    scales_doc = require(doc, "nominal_scales", "")
    scales = {c: as_float(require(scales_doc, c, "nominal_scales"), f"nominal_scales.{c}") for c in DYNAMIC_CHANNELS}
    ranges_doc = require(doc, "posture_ranges", "")
    ranges = {}
    for c in STATIC_CHANNELS:
        pair = as_vector(require(ranges_doc, c, "posture_ranges"), 2, f"posture_ranges.{c}")
        ranges[c] = (pair[0], pair[1])
    limits = doc.get("joint_limits")
    if limits is not None:
        limits = as_matrix(limits, 2, "joint_limits")
    return build_robot_model(
        name=str(doc.get("name", "robot")),
        joint_names=joints,
        chains=chains,
        q_stand=as_vector(require(doc, "q_stand", ""), len(joints), "q_stand"),
        nominal_scales=scales,
        posture_ranges=ranges,
        h_ground=as_float(require(doc, "h_ground", ""), "h_ground"),
        joint_limits=limits,
    )


def load_robot_model(path) -> RobotModel:
    """Load and validate a robot model document from a JSON file."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), f"not valid JSON: {exc}") from exc
    return parse_robot_model(doc)


def save_robot_model(model: RobotModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2))


def fk_foot(model: RobotModel, q: np.ndarray, foot: str) -> np.ndarray:
    """Foot position in the base frame for joint vector ``q``."""
    q = np.asarray(q, dtype=float)
    if q.shape != (model.dof,):
        raise ValueError(f"q has shape {q.shape}, model has {model.dof} joints")
    offsets, axes, jidx = model.packed_chain(foot)
    return _kernels.chain_fk(offsets, axes, jidx, q)


def fk_foot_velocity(model: RobotModel, q: np.ndarray, qd: np.ndarray, foot: str) -> tuple[np.ndarray, float]:
    """Leg-relative foot velocity and yaw rate (chain Jacobian applied to ``qd``).

    The base contribution is intentionally excluded; callers compose it with
    the base twist where needed.
    """
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    if q.shape != (model.dof,) or qd.shape != (model.dof,):
        raise ValueError(f"q/qd must have shape ({model.dof},)")
    offsets, axes, jidx = model.packed_chain(foot)
    out = _kernels.chain_fk_vel(offsets, axes, jidx, q, qd)
    return out[3:6].copy(), float(out[6])


def foot_state(model: RobotModel, q: np.ndarray, qd: np.ndarray, foot: str) -> FootState:
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    offsets, axes, jidx = model.packed_chain(foot)
    out = _kernels.chain_fk_vel(offsets, axes, jidx, q, qd)
    state = FootState(out[:3].copy(), out[3:6].copy(), float(out[6]))
    if not np.all(np.isfinite(out)):
        raise ValueError(f"non-finite foot state for foot {foot}")
    return state

"""Encoder zero-point calibration by motor/IMU consistency.

Mount deformation biases each joint's encoder by a constant offset z. The
estimate assumes the robot is posed so that its measured gravity direction
matches the simulated one (samples failing that gate are discarded); under
an achieved pose the simulated joint angle is the true one, so the
discrepancy q_sim - (r + z) is exactly the remaining offset error. Per
iteration the per-joint residual is aggregated by median across poses and
applied with damping.

Gravity observes pitch/roll-like axes only; joints declared unobservable
(e.g. yaw axes) are reported as such, never estimated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pmg.schema import SchemaError, as_float, as_vector, require


class CalibrationError(RuntimeError):
    pass


@dataclass
class PoseSample:
    """Readings collected while holding one default pose."""

    pose_id: int
    r: np.ndarray       # raw encoder readings, rad
    q_sim: np.ndarray   # simulated joint angles for the pose, rad
    s_real: np.ndarray  # measured projected gravity, unit-ish
    s_sim: np.ndarray   # simulated projected gravity

    def validate(self) -> None:
        if self.r.shape != self.q_sim.shape or self.r.ndim != 1:
            raise SchemaError(f"sample[{self.pose_id}]", "r and q_sim must be 1-d of equal length")
        for name, s in (("s_real", self.s_real), ("s_sim", self.s_sim)):
            if s.shape != (3,):
                raise SchemaError(f"sample[{self.pose_id}].{name}", "expected a 3-vector")
            norm = float(np.linalg.norm(s))
            if not 0.9 <= norm <= 1.1:
                raise SchemaError(f"sample[{self.pose_id}].{name}", f"gravity vector norm {norm:.3f} outside [0.9, 1.1]")


@dataclass
class ZeroCalibState:
    """Offset estimate plus the gate/damping/convergence configuration."""

    z: np.ndarray
    alpha: float = 0.5        # damping on the update
    tau: float = 0.02         # IMU gate threshold
    eps_conv: float = 0.001   # rad, per-joint convergence threshold on |alpha*delta|
    m_conv: int = 3           # consecutive iterations below eps_conv
    max_iters: int = 50
    observable: np.ndarray | None = None  # per-joint mask; None = all observable
    history: list[np.ndarray] = field(default_factory=list)  # applied steps alpha*delta

    def validate(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not self.tau > 0 or not self.eps_conv > 0:
            raise ValueError("tau and eps_conv must be positive")
        if self.m_conv < 1:
            raise ValueError(f"m_conv must be >= 1, got {self.m_conv}")
        if self.observable is not None and self.observable.shape != self.z.shape:
            raise ValueError("observable mask must match z")

    def observable_mask(self) -> np.ndarray:
        if self.observable is None:
            return np.ones(len(self.z), dtype=bool)
        return self.observable.astype(bool)

    def converged(self) -> bool:
        if len(self.history) < self.m_conv:
            return False
        mask = self.observable_mask()
        if not mask.any():
            return False
        return all(np.max(np.abs(step[mask])) < self.eps_conv for step in self.history[-self.m_conv :])


def imu_aligned(sample: PoseSample, tau: float) -> bool:
    """Gate of the pose: measured and simulated gravity agree within tau (closed)."""
    return float(np.linalg.norm(sample.s_real - sample.s_sim)) <= tau


def gate_samples(samples, tau: float) -> list[PoseSample]:
    return [s for s in samples if imu_aligned(s, tau)]


def residuals(samples, z: np.ndarray) -> np.ndarray:
    """Per-pose, per-joint offset residuals q_sim - (r + z) of gated samples."""
    if not samples:
        raise CalibrationError("no aligned poses")
    return np.array([s.q_sim - (s.r + z) for s in samples])


def aggregate(delta_matrix: np.ndarray) -> np.ndarray:
    """Median across poses per joint (even counts average the central pair)."""
    if delta_matrix.ndim != 2 or delta_matrix.shape[0] < 1:
        raise ValueError("need at least one pose row")
    return np.median(delta_matrix, axis=0)


def update(state: ZeroCalibState, delta: np.ndarray) -> ZeroCalibState:
    """Apply the damped update z += alpha * delta on observable joints."""
    state.validate()
    step = state.alpha * np.asarray(delta, dtype=float)
    mask = state.observable_mask()
    state.z = state.z + np.where(mask, step, 0.0)
    state.history.append(step)
    return state


@dataclass
class ZeroCalReport:
    z: np.ndarray
    iterations: int
    converged: bool
    accepted_per_iteration: list[int]
    flags: list[str] = field(default_factory=list)
    unobservable: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "z": self.z.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "accepted_per_iteration": self.accepted_per_iteration,
            "flags": self.flags,
            "unobservable": self.unobservable,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def calibrate(sampler, state: ZeroCalibState, min_poses: int = 3) -> ZeroCalReport:
    """Iterate gate -> residuals -> median -> damped update until convergence.

    ``sampler`` is called with the current offset estimate and must yield
    pose samples for that iteration (a fixed recorded set is fine: the
    residual definition re-evaluates it against the updated z).
    """
    state.validate()
    accepted_counts: list[int] = []
    flags: list[str] = []
    iterations = 0
    for _ in range(state.max_iters):
        iterations += 1
        samples = list(sampler(state.z.copy()))
        for s in samples:
            s.validate()
        if len({s.pose_id for s in samples}) < min_poses:
            raise CalibrationError(f"sampler must yield >= {min_poses} distinct poses per iteration, got {len(samples)}")
        accepted = gate_samples(samples, state.tau)
        accepted_counts.append(len(accepted))
        delta = aggregate(residuals(accepted, state.z))
        update(state, delta)
        if state.converged():
            break
    converged = state.converged()
    if not converged:
        flags.append(f"iteration cap {state.max_iters} reached without convergence")
    mask = state.observable_mask()
    return ZeroCalReport(
        z=state.z.copy(),
        iterations=iterations,
        converged=converged,
        accepted_per_iteration=accepted_counts,
        flags=flags,
        unobservable=[int(i) for i in np.flatnonzero(~mask)],
    )


# ---------------------------------------------------------------------------
# Offline sample files


def load_pose_samples(path) -> list[PoseSample]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), f"not valid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise SchemaError(str(path), "expected a list of pose samples")
    samples = []
    for k, entry in enumerate(doc):
        path_k = f"[{k}]"
        n = len(require(entry, "r", path_k))
        sample = PoseSample(
            pose_id=int(require(entry, "pose_id", path_k)),
            r=as_vector(entry["r"], n, f"{path_k}.r"),
            q_sim=as_vector(require(entry, "q_sim", path_k), n, f"{path_k}.q_sim"),
            s_real=as_vector(require(entry, "s_real", path_k), 3, f"{path_k}.s_real"),
            s_sim=as_vector(require(entry, "s_sim", path_k), 3, f"{path_k}.s_sim"),
        )
        sample.validate()
        samples.append(sample)
    return samples


def save_pose_samples(samples, path) -> None:
    doc = [
        {
            "pose_id": s.pose_id,
            "r": s.r.tolist(),
            "q_sim": s.q_sim.tolist(),
            "s_real": s.s_real.tolist(),
            "s_sim": s.s_sim.tolist(),
        }
        for s in samples
    ]
    Path(path).write_text(json.dumps(doc, indent=1))

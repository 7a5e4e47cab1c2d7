"""Single-joint PD actuator identification.

Records a (commanded, measured) position pair series from one motor, rolls
out a clamped-PD rotor simulation under the same commands, and searches the
simulator parameters (gains, reflected inertia, optionally damping and
Coulomb friction) that align the two trajectories. The search runs the
evolution strategy in normalized box coordinates; the last 20% of the
record is held out as a validation split.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pmg import _kernels
from pmg.cmaes import CmaesConfig, cmaes_minimize

PARAM_ORDER = ("kp", "kd", "inertia", "damping", "coulomb")
SENTINEL_LOSS = 1e12
STEP_EVENT_THRESHOLD = 0.05  # rad, command jump that counts as a step
DEFAULT_RATE = 500.0         # Hz, low-level control rate


@dataclass
class MotorParams:
    """Clamped-PD rotor model parameters."""

    kp: float                     # Nm/rad
    kd: float                     # Nm s/rad
    inertia: float                # kg m^2, rotor + reflected
    damping: float = 0.0          # Nm s/rad, viscous
    coulomb: float = 0.0          # Nm
    tau_max: float = math.inf     # Nm

    def validate(self) -> None:
        for name in ("kp", "kd", "inertia"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.tau_max > 0:
            raise ValueError(f"tau_max must be positive, got {self.tau_max}")

    def damping_ratio(self) -> float:
        return self.kd / (2.0 * math.sqrt(self.kp * self.inertia))

    def to_dict(self) -> dict:
        return {
            "kp": self.kp,
            "kd": self.kd,
            "inertia": self.inertia,
            "damping": self.damping,
            "coulomb": self.coulomb,
            "tau_max": None if math.isinf(self.tau_max) else self.tau_max,
        }


@dataclass
class ResponseRecord:
    """One excitation run: commanded and measured positions at a fixed rate."""

    dt: float
    q_cmd: np.ndarray
    q_meas: np.ndarray

    def validate(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.q_cmd.shape != self.q_meas.shape or self.q_cmd.ndim != 1:
            raise ValueError("q_cmd and q_meas must be 1-d series of equal length")
        if len(self.q_cmd) < 100:
            raise ValueError(f"record too short: {len(self.q_cmd)} samples, need >= 100")

    def step_events(self) -> np.ndarray:
        return np.flatnonzero(np.abs(np.diff(self.q_cmd)) > STEP_EVENT_THRESHOLD)


@dataclass
class Excitation:
    """Command series with labeled segments (step / quintic / sweep)."""

    t: np.ndarray
    q_cmd: np.ndarray
    segments: list[tuple[str, int, int]]

    def segment(self, kind: str) -> np.ndarray:
        for seg_kind, start, end in self.segments:
            if seg_kind == kind:
                return self.q_cmd[start:end]
        raise KeyError(f"no segment of kind {kind!r}")


def _quintic(x: np.ndarray) -> np.ndarray:
    # min-jerk interpolation: 0 -> 1 with zero end velocity/acceleration
    return x**3 * (10.0 - 15.0 * x + 6.0 * x**2)


def excitation(
    rate: float = DEFAULT_RATE,
    duration: float = 4.0,
    amplitudes=(0.2, 0.5),
    n_steps: int = 6,
    sweep_band: tuple[float, float] = (0.5, 8.0),
    seed: int = 0,
) -> Excitation:
    """Deterministic identification command: steps, quintic moves, sine sweep.

    Step levels cycle through +-each amplitude (shuffled by the seed), so the
    series attains the full commanded range; the sweep chirps linearly across
    ``sweep_band``.
    """
    if duration < 2.0:
        raise ValueError(f"excitation needs >= 2 s, got {duration}")
    if n_steps < 4:
        raise ValueError("need >= 4 step levels for >= 3 step events")
    rng = np.random.default_rng(seed)
    amplitudes = sorted(float(a) for a in amplitudes)
    n = int(round(duration * rate))
    t = np.arange(n) / rate
    q = np.zeros(n)
    segments: list[tuple[str, int, int]] = []

    n_step_seg = int(0.4 * n)
    n_quintic = int(0.2 * n)
    levels = []
    while len(levels) < n_steps:
        for a in amplitudes[::-1]:
            levels.extend([a, -a])
    levels = list(rng.permutation(levels[:n_steps]))
    hold = n_step_seg // n_steps
    for i, level in enumerate(levels):
        q[i * hold : (i + 1) * hold if i < n_steps - 1 else n_step_seg] = level
    segments.append(("step", 0, n_step_seg))

    start_level = levels[-1]
    half = n_quintic // 2
    x1 = np.linspace(0.0, 1.0, half, endpoint=False)
    q[n_step_seg : n_step_seg + half] = start_level + (-amplitudes[-1] - start_level) * _quintic(x1)
    x2 = np.linspace(0.0, 1.0, n_quintic - half, endpoint=False)
    q[n_step_seg + half : n_step_seg + n_quintic] = -amplitudes[-1] + amplitudes[-1] * _quintic(x2)
    segments.append(("quintic", n_step_seg, n_step_seg + n_quintic))

    sweep_start = n_step_seg + n_quintic
    ts = t[sweep_start:] - t[sweep_start]
    t_sw = ts[-1] if len(ts) else 0.0
    f0, f1 = sweep_band
    phase = 2.0 * np.pi * (f0 * ts + 0.5 * (f1 - f0) * ts**2 / max(t_sw, 1e-9))
    q[sweep_start:] = amplitudes[0] * np.sin(phase)
    segments.append(("sweep", sweep_start, n))

    return Excitation(t=t, q_cmd=q, segments=segments)


def simulate_motor(
    params: MotorParams,
    q_cmd: np.ndarray,
    dt: float,
    q0: float | None = None,
    qd0: float = 0.0,
) -> np.ndarray:
    """Semi-implicit Euler rollout of the clamped-PD rotor under ``q_cmd``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    params.validate()
    q_cmd = np.ascontiguousarray(q_cmd, dtype=float)
    if q0 is None:
        q0 = float(q_cmd[0])
    return _kernels.pd_motor_sim(
        q_cmd, dt, float(q0), float(qd0),
        params.kp, params.kd, params.inertia,
        params.damping, params.coulomb, params.tau_max,
    )


def alignment_loss(params: MotorParams, record: ResponseRecord, n_compare: int | None = None) -> float:
    """Sum of squared per-sample differences between simulated and measured response.

    Simulation starts at (q_meas[0], 0). A diverged (non-finite) rollout
    returns the sentinel ``SENTINEL_LOSS`` instead of propagating NaN into
    the optimizer.
    """
    record.validate()
    q_sim = simulate_motor(params, record.q_cmd, record.dt, q0=float(record.q_meas[0]), qd0=0.0)
    if n_compare is None:
        n_compare = len(q_sim)
    diff = q_sim[:n_compare] - record.q_meas[:n_compare]
    if not np.all(np.isfinite(diff)):
        return SENTINEL_LOSS
    return float(np.dot(diff, diff))


@dataclass
class IdentifyConfig:
    """Bounds and search budget for one joint identification."""

    bounds: dict[str, tuple[float, float]]
    popsize: int = 12
    max_evals: int = 6000
    target_loss: float | None = None
    seed: int = 0
    tau_max: float = math.inf     # fixed, not identified
    holdout_fraction: float = 0.2
    map_fn: object = None         # optional concurrent evaluator

    def param_names(self) -> list[str]:
        names = [p for p in PARAM_ORDER if p in self.bounds]
        for required in ("kp", "kd", "inertia"):
            if required not in names:
                raise ValueError(f"bounds must include {required!r}")
        for extra in self.bounds:
            if extra not in PARAM_ORDER:
                raise ValueError(f"unknown parameter {extra!r}, expected one of {PARAM_ORDER}")
        return names


@dataclass
class IdentificationReport:
    params: MotorParams
    param_names: list[str]
    loss_initial: float
    loss_final: float
    train_rms: float
    validation_rms: float
    n_evals: int
    generations: int
    flags: list[str] = field(default_factory=list)
    residual: np.ndarray | None = None
    step_events: list[int] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "param_names": self.param_names,
            "loss_initial": self.loss_initial,
            "loss_final": self.loss_final,
            "train_rms": self.train_rms,
            "validation_rms": self.validation_rms,
            "n_evals": self.n_evals,
            "generations": self.generations,
            "flags": self.flags,
            "step_events": [int(i) for i in self.step_events],
            "residual": self.residual.tolist() if self.residual is not None else None,
            "config": self.config,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def _params_from_vector(names, eta, tau_max: float) -> MotorParams:
    kwargs = dict(zip(names, (float(v) for v in eta)))
    return MotorParams(tau_max=tau_max, **kwargs)


def identify_joint(record: ResponseRecord, config: IdentifyConfig) -> IdentificationReport:
    """Fit the rotor model to a response record.

    The search runs in normalized [0, 1] box coordinates (the physical
    parameters span orders of magnitude). The last ``holdout_fraction`` of
    the record is excluded from the loss and reported as validation
    residual; a validation RMS above 5x the training RMS flags the result
    as overfit/unidentifiable.
    """
    record.validate()
    names = config.param_names()
    bounds = np.array([config.bounds[p] for p in names], dtype=float)
    n_total = len(record.q_cmd)
    n_train = max(2, int(round(n_total * (1.0 - config.holdout_fraction))))
    flags: list[str] = []
    step_events = record.step_events()
    config_echo = {
        "bounds": {p: list(config.bounds[p]) for p in names},
        "popsize": config.popsize,
        "max_evals": config.max_evals,
        "seed": config.seed,
        "holdout_fraction": config.holdout_fraction,
        "n_train": n_train,
    }

    mid = 0.5 * (bounds[:, 0] + bounds[:, 1])
    eta0 = _params_from_vector(names, mid, config.tau_max)
    loss_initial = alignment_loss(eta0, record, n_train)

    if len(step_events) < 3:
        flags.append("unidentifiable: fewer than 3 step events in q_cmd")
        return IdentificationReport(
            params=eta0,
            param_names=names,
            loss_initial=loss_initial,
            loss_final=loss_initial,
            train_rms=math.sqrt(loss_initial / n_train),
            validation_rms=math.nan,
            n_evals=0,
            generations=0,
            flags=flags,
            step_events=list(step_events),
            config=config_echo,
        )

    span = bounds[:, 1] - bounds[:, 0]

    def norm_loss(x: np.ndarray) -> float:
        eta = bounds[:, 0] + x * span
        return alignment_loss(_params_from_vector(names, eta, config.tau_max), record, n_train)

    # saturation plateaus make the landscape rugged; restart with a grown
    # population whenever the step size collapses short of the target
    best_x = np.full(len(names), 0.5)
    best_loss = math.inf
    n_evals = 0
    generations = 0
    attempt = 0
    while True:
        popsize = min(config.popsize * 2**attempt, 64)
        if config.max_evals - n_evals < popsize:
            break
        result = cmaes_minimize(
            norm_loss,
            CmaesConfig(
                x0=np.full(len(names), 0.5),
                sigma0=0.4,
                bounds=np.tile([0.0, 1.0], (len(names), 1)),
                popsize=popsize,
                max_evals=config.max_evals - n_evals,
                target_loss=config.target_loss,
                seed=config.seed + attempt,
            ),
            map_fn=config.map_fn,
        )
        n_evals += result.n_evals
        generations += result.generations
        if result.loss < best_loss:
            best_loss = result.loss
            best_x = result.x
        if result.stop != "sigma_collapse":
            break
        attempt += 1
    eta_star = _params_from_vector(names, bounds[:, 0] + best_x * span, config.tau_max)
    q_sim = simulate_motor(eta_star, record.q_cmd, record.dt, q0=float(record.q_meas[0]))
    residual = q_sim - record.q_meas
    train_rms = float(np.sqrt(np.mean(residual[:n_train] ** 2)))
    validation_rms = float(np.sqrt(np.mean(residual[n_train:] ** 2))) if n_train < n_total else math.nan
    # floor keeps the noiseless case (both residuals ~ machine epsilon) unflagged
    if validation_rms > 5.0 * max(train_rms, 1e-9):
        flags.append("overfit/unidentifiable: validation residual exceeds 5x training residual")
    if best_loss >= SENTINEL_LOSS:
        flags.append("divergent: best candidate hit the sentinel loss")
    return IdentificationReport(
        params=eta_star,
        param_names=names,
        loss_initial=loss_initial,
        loss_final=best_loss,
        train_rms=train_rms,
        validation_rms=validation_rms,
        n_evals=n_evals,
        generations=generations,
        flags=flags,
        residual=residual,
        step_events=list(step_events),
        config=config_echo,
    )


# ---------------------------------------------------------------------------
# File formats


def write_response_record(record: ResponseRecord, path) -> None:
    rows = np.column_stack([np.arange(len(record.q_cmd)) * record.dt, record.q_cmd, record.q_meas])
    np.savetxt(path, rows, delimiter=",", header="t,q_cmd,q_meas", comments="", fmt="%.17g")


def read_response_record(path) -> ResponseRecord:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
    has_header = any(c.isalpha() for c in first.split(",")[0])
    data = np.loadtxt(path, delimiter=",", skiprows=1 if has_header else 0, ndmin=2)
    if data.shape[1] != 3:
        raise ValueError(f"response record must have 3 columns (t, q_cmd, q_meas), got {data.shape[1]}")
    dts = np.diff(data[:, 0])
    if len(dts) == 0 or np.any(dts <= 0):
        raise ValueError("timestamps must be strictly increasing")
    record = ResponseRecord(dt=float(np.median(dts)), q_cmd=data[:, 1].copy(), q_meas=data[:, 2].copy())
    record.validate()
    return record


def read_bounds(path) -> dict[str, tuple[float, float]]:
    doc = json.loads(Path(path).read_text())
    out = {}
    for key, pair in doc.items():
        if key not in PARAM_ORDER:
            raise ValueError(f"unknown parameter {key!r} in bounds file, expected one of {PARAM_ORDER}")
        lo, hi = float(pair[0]), float(pair[1])
        if not lo < hi:
            raise ValueError(f"bounds for {key} must satisfy lower < upper")
        out[key] = (lo, hi)
    return out

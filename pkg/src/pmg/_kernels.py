"""Numerical hot-path kernels, JIT-compiled when numba is available.

The streaming generator budget is well under a millisecond per frame, which
rules out chains of small numpy allocations. Everything here operates on
packed float64 arrays. Set ``PMG_PURE_PYTHON=1`` to force the plain-python
fallback (slow, same results).
"""

from __future__ import annotations

import math
import os

import numpy as np

if os.environ.get("PMG_PURE_PYTHON"):
    NUMBA = False
else:
    try:
        from numba import njit

        NUMBA = True
    except ImportError:  # pragma: no cover
        NUMBA = False

if not NUMBA:
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def chain_fk(offsets, axes, jidx, q):
    """Foot position of a serial chain in the base frame.

    ``offsets[k]`` translates in the current frame, then the frame rotates by
    ``q[jidx[k]]`` about ``axes[k]``; entries with ``jidx[k] < 0`` are fixed
    links. The returned point is the origin of the final frame.
    """
    r00 = 1.0; r01 = 0.0; r02 = 0.0
    r10 = 0.0; r11 = 1.0; r12 = 0.0
    r20 = 0.0; r21 = 0.0; r22 = 1.0
    px = 0.0; py = 0.0; pz = 0.0
    for k in range(offsets.shape[0]):
        ox = offsets[k, 0]; oy = offsets[k, 1]; oz = offsets[k, 2]
        px += r00 * ox + r01 * oy + r02 * oz
        py += r10 * ox + r11 * oy + r12 * oz
        pz += r20 * ox + r21 * oy + r22 * oz
        j = jidx[k]
        if j >= 0:
            ax = axes[k, 0]; ay = axes[k, 1]; az = axes[k, 2]
            th = q[j]
            c = math.cos(th); s = math.sin(th); cc = 1.0 - c
            m00 = c + ax * ax * cc; m01 = ax * ay * cc - az * s; m02 = ax * az * cc + ay * s
            m10 = ay * ax * cc + az * s; m11 = c + ay * ay * cc; m12 = ay * az * cc - ax * s
            m20 = az * ax * cc - ay * s; m21 = az * ay * cc + ax * s; m22 = c + az * az * cc
            n00 = r00 * m00 + r01 * m10 + r02 * m20
            n01 = r00 * m01 + r01 * m11 + r02 * m21
            n02 = r00 * m02 + r01 * m12 + r02 * m22
            n10 = r10 * m00 + r11 * m10 + r12 * m20
            n11 = r10 * m01 + r11 * m11 + r12 * m21
            n12 = r10 * m02 + r11 * m12 + r12 * m22
            n20 = r20 * m00 + r21 * m10 + r22 * m20
            n21 = r20 * m01 + r21 * m11 + r22 * m21
            n22 = r20 * m02 + r21 * m12 + r22 * m22
            r00 = n00; r01 = n01; r02 = n02
            r10 = n10; r11 = n11; r12 = n12
            r20 = n20; r21 = n21; r22 = n22
    out = np.empty(3)
    out[0] = px; out[1] = py; out[2] = pz
    return out


@njit(cache=True)
def chain_fk_vel(offsets, axes, jidx, q, qd):
    """Foot position, linear velocity and yaw rate of a serial chain.

    Velocity is the chain Jacobian applied to ``qd``; yaw rate is the z row
    of the angular Jacobian applied to ``qd``. Returns a packed 7-vector
    ``[px, py, pz, vx, vy, vz, wz]``.
    """
    m = offsets.shape[0]
    jx = np.empty(m); jy = np.empty(m); jz = np.empty(m)
    axw = np.empty(m); ayw = np.empty(m); azw = np.empty(m)
    r00 = 1.0; r01 = 0.0; r02 = 0.0
    r10 = 0.0; r11 = 1.0; r12 = 0.0
    r20 = 0.0; r21 = 0.0; r22 = 1.0
    px = 0.0; py = 0.0; pz = 0.0
    for k in range(m):
        ox = offsets[k, 0]; oy = offsets[k, 1]; oz = offsets[k, 2]
        px += r00 * ox + r01 * oy + r02 * oz
        py += r10 * ox + r11 * oy + r12 * oz
        pz += r20 * ox + r21 * oy + r22 * oz
        j = jidx[k]
        if j >= 0:
            ax = axes[k, 0]; ay = axes[k, 1]; az = axes[k, 2]
            # joint origin and world-frame axis (invariant under own rotation)
            jx[k] = px; jy[k] = py; jz[k] = pz
            axw[k] = r00 * ax + r01 * ay + r02 * az
            ayw[k] = r10 * ax + r11 * ay + r12 * az
            azw[k] = r20 * ax + r21 * ay + r22 * az
            th = q[j]
            c = math.cos(th); s = math.sin(th); cc = 1.0 - c
            m00 = c + ax * ax * cc; m01 = ax * ay * cc - az * s; m02 = ax * az * cc + ay * s
            m10 = ay * ax * cc + az * s; m11 = c + ay * ay * cc; m12 = ay * az * cc - ax * s
            m20 = az * ax * cc - ay * s; m21 = az * ay * cc + ax * s; m22 = c + az * az * cc
            n00 = r00 * m00 + r01 * m10 + r02 * m20
            n01 = r00 * m01 + r01 * m11 + r02 * m21
            n02 = r00 * m02 + r01 * m12 + r02 * m22
            n10 = r10 * m00 + r11 * m10 + r12 * m20
            n11 = r10 * m01 + r11 * m11 + r12 * m21
            n12 = r10 * m02 + r11 * m12 + r12 * m22
            n20 = r20 * m00 + r21 * m10 + r22 * m20
            n21 = r20 * m01 + r21 * m11 + r22 * m21
            n22 = r20 * m02 + r21 * m12 + r22 * m22
            r00 = n00; r01 = n01; r02 = n02
            r10 = n10; r11 = n11; r12 = n12
            r20 = n20; r21 = n21; r22 = n22
    vx = 0.0; vy = 0.0; vz = 0.0; wz = 0.0
    for k in range(m):
        j = jidx[k]
        if j >= 0:
            dq = qd[j]
            dx = px - jx[k]; dy = py - jy[k]; dz = pz - jz[k]
            vx += dq * (ayw[k] * dz - azw[k] * dy)
            vy += dq * (azw[k] * dx - axw[k] * dz)
            vz += dq * (axw[k] * dy - ayw[k] * dx)
            wz += dq * azw[k]
    out = np.empty(7)
    out[0] = px; out[1] = py; out[2] = pz
    out[3] = vx; out[4] = vy; out[5] = vz
    out[6] = wz
    return out


@njit(cache=True)
def lerp_row(frames, phase):
    """Circular linear interpolation of a (n, d) frame matrix at phase in [0, 1)."""
    n = frames.shape[0]
    x = phase * n
    i = int(x) % n
    f = x - int(x)
    k = (i + 1) % n
    d = frames.shape[1]
    out = np.empty(d)
    for c in range(d):
        out[c] = (1.0 - f) * frames[i, c] + f * frames[k, c]
    return out


@njit(cache=True)
def lerp_row_axpy(out, frames, phase, coeff):
    """out += coeff * (circular interpolation of frames at phase)."""
    n = frames.shape[0]
    x = phase * n
    i = int(x) % n
    f = x - int(x)
    k = (i + 1) % n
    for c in range(frames.shape[1]):
        out[c] += coeff * ((1.0 - f) * frames[i, c] + f * frames[k, c])


@njit(cache=True)
def lerp_series(values, phase):
    """Circular linear interpolation of a (n,) series at phase in [0, 1)."""
    n = values.shape[0]
    x = phase * n
    i = int(x) % n
    f = x - int(x)
    k = (i + 1) % n
    return (1.0 - f) * values[i] + f * values[k]


@njit(cache=True)
def pd_motor_sim(q_cmd, dt, q0, qd0, kp, kd, inertia, damping, coulomb, tau_max):
    """Semi-implicit Euler rollout of a single rigid rotor under clamped PD torque.

    Torque model: clamp(kp*(q_cmd - q) - kd*qd, +-tau_max) - damping*qd
    - coulomb*sign(qd). Returns the simulated position series, same length
    as ``q_cmd``; sample 0 is the initial state.
    """
    n = q_cmd.shape[0]
    out = np.empty(n)
    q = q0
    qd = qd0
    out[0] = q
    for i in range(1, n):
        tau = kp * (q_cmd[i - 1] - q) - kd * qd
        if tau > tau_max:
            tau = tau_max
        elif tau < -tau_max:
            tau = -tau_max
        tau -= damping * qd
        if qd > 0.0:
            tau -= coulomb
        elif qd < 0.0:
            tau += coulomb
        qd += dt * tau / inertia
        q += dt * qd
        out[i] = q
    return out


def warmup() -> None:
    """Force-compile every kernel (first call otherwise pays JIT latency)."""
    offsets = np.zeros((2, 3))
    offsets[1, 2] = -1.0
    axes = np.zeros((2, 3))
    axes[0, 1] = 1.0
    jidx = np.array([0, -1], dtype=np.int64)
    q = np.zeros(1)
    chain_fk(offsets, axes, jidx, q)
    chain_fk_vel(offsets, axes, jidx, q, q)
    frames = np.zeros((8, 2))
    lerp_row(frames, 0.3)
    lerp_row_axpy(np.zeros(2), frames, 0.3, 1.0)
    lerp_series(np.zeros(8), 0.3)
    pd_motor_sim(np.zeros(4), 0.002, 0.0, 0.0, 50.0, 1.0, 0.05, 0.0, 0.0, np.inf)

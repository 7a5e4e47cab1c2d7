"""Parameterized motion generation and actuator calibration for bipedal robots.

Subsystems:

* ``pmg.robot``     -- leg kinematic model, forward kinematics, foot velocities
* ``pmg.clips``     -- motion clip data model and preprocessing
* ``pmg.generator`` -- command-conditioned gait synthesis sessions
* ``pmg.ground``    -- ground-aware command correction (stance-foot pinning)
* ``pmg.cmaes``     -- covariance matrix adaptation evolution strategy
* ``pmg.sysid``     -- single-joint PD actuator identification
* ``pmg.zerocal``   -- encoder zero-point calibration against IMU gravity
* ``pmg.server``    -- real-time streaming service
* ``pmg.cli``       -- the ``pmg`` command line tool
"""

__version__ = "0.1.0"

from pmg.robot import RobotModel, FootState, load_robot_model, fk_foot, fk_foot_velocity
from pmg.clips import MotionClip, StaticClip, ClipSet, extract_cycle, smooth_boundary, contact_at_phase
from pmg.generator import CommandVector, GaitFrame, GaitSession, PhaseState
from pmg.ground import BaseCorrection, OptimizedCommand, pinned_base_velocity, optimize_command, integrate_base
from pmg.cmaes import CmaesConfig, CmaesResult, cmaes_minimize
from pmg.sysid import MotorParams, ResponseRecord, excitation, simulate_motor, alignment_loss, identify_joint
from pmg.zerocal import ZeroCalibState, PoseSample, imu_aligned, residuals, aggregate, update, calibrate

__all__ = [
    "RobotModel", "FootState", "load_robot_model", "fk_foot", "fk_foot_velocity",
    "MotionClip", "StaticClip", "ClipSet", "extract_cycle", "smooth_boundary", "contact_at_phase",
    "CommandVector", "GaitFrame", "GaitSession", "PhaseState",
    "BaseCorrection", "OptimizedCommand", "pinned_base_velocity", "optimize_command", "integrate_base",
    "CmaesConfig", "CmaesResult", "cmaes_minimize",
    "MotorParams", "ResponseRecord", "excitation", "simulate_motor", "alignment_loss", "identify_joint",
    "ZeroCalibState", "PoseSample", "imu_aligned", "residuals", "aggregate", "update", "calibrate",
]

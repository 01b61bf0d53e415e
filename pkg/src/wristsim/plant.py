"""Simulated 1-DOF rotary device.

Rigid rotor with viscous damping and a stiff one-sided end stop, an
incremental encoder, and velocity from adjacent-sample differences run
through a second-order Butterworth low-pass.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels as K
from .errors import DomainError, StateError


@dataclass(frozen=True)
class PlantParams:
    inertia_j: float = 0.005  # kg m^2
    damping_b: float = 0.01  # N m s/rad
    limiter_deg: float = 60.0
    limiter_stiffness: float = 50.0  # N m/rad
    limiter_damping: float = 0.5  # N m s/rad
    encoder_counts_per_rev: int = 16384
    dt_s: float = 0.001
    filter_cutoff_hz: float = 10.0
    # damping terms of walls/PD act on this faster estimate; 10 Hz in the
    # loop destabilizes 30 N m/rad walls
    control_cutoff_hz: float = 50.0

    def __post_init__(self):
        nyquist = 0.5 / self.dt_s if self.dt_s > 0 else 0.0
        checks = {
            "inertia_j > 0": self.inertia_j > 0,
            "damping_b >= 0": self.damping_b >= 0,
            "dt_s > 0": self.dt_s > 0,
            "limiter_deg > 0": self.limiter_deg > 0,
            "encoder_counts_per_rev > 0": self.encoder_counts_per_rev > 0,
            "0 < filter_cutoff_hz < Nyquist": 0 < self.filter_cutoff_hz < nyquist,
            "0 < control_cutoff_hz < Nyquist": 0 < self.control_cutoff_hz < nyquist,
        }
        bad = [name for name, ok in checks.items() if not ok]
        if bad:
            raise DomainError(f"invalid plant parameters: {', '.join(bad)}")

    def as_vector(self) -> np.ndarray:
        v = np.empty(K.P_SIZE)
        v[K.P_INERTIA] = self.inertia_j
        v[K.P_DAMPING] = self.damping_b
        v[K.P_LIMIT_DEG] = self.limiter_deg
        v[K.P_LIMIT_K] = self.limiter_stiffness
        v[K.P_LIMIT_C] = self.limiter_damping
        v[K.P_COUNTS] = float(self.encoder_counts_per_rev)
        v[K.P_DT] = self.dt_s
        return v


@dataclass(frozen=True)
class PlantState:
    angle_deg: float = 0.0
    velocity_dps: float = 0.0
    t: float = 0.0


def step(state: PlantState, params: PlantParams, motor_torque: float, human_torque: float) -> PlantState:
    """Advance the rotor by one ``dt`` (semi-implicit Euler); torques in mNm."""
    values = (state.angle_deg, state.velocity_dps, state.t, motor_torque, human_torque)
    if not all(math.isfinite(v) for v in values):
        raise DomainError(f"non-finite plant input: {values}")
    a, v, t = K.plant_step(
        float(state.angle_deg), float(state.velocity_dps), float(state.t),
        float(motor_torque), float(human_torque), 1.0 / params.inertia_j, params.damping_b,
        params.limiter_deg, params.limiter_stiffness, params.limiter_damping, params.dt_s)
    return PlantState(a, v, t)


def limiter_torque(angle: float, velocity: float, params: PlantParams) -> float:
    return K.spring_wall(angle, velocity, -params.limiter_deg, params.limiter_deg,
                         params.limiter_stiffness, params.limiter_damping)


def encode_position(angle: float, counts_per_rev: int) -> float:
    """Angle floored onto the encoder grid, in degrees."""
    if counts_per_rev <= 0:
        raise DomainError("counts_per_rev must be positive")
    return K.quantize(float(angle), float(counts_per_rev))


def butterworth_lowpass(cutoff_hz: float, dt: float) -> np.ndarray:
    """Second-order Butterworth low-pass by bilinear transform with
    prewarping; returns ``[b0, b1, b2, a1, a2]`` (a0 normalized to 1)."""
    if not 0 < cutoff_hz < 0.5 / dt:
        raise DomainError(f"cutoff {cutoff_hz} Hz outside (0, Nyquist={0.5 / dt} Hz)")
    k = math.tan(math.pi * cutoff_hz * dt)
    norm = 1.0 + math.sqrt(2.0) * k + k * k
    b0 = k * k / norm
    return np.array([b0, 2.0 * b0, b0,
                     2.0 * (k * k - 1.0) / norm,
                     (1.0 - math.sqrt(2.0) * k + k * k) / norm])


@dataclass
class DerivativeFilter:
    """Adjacent-sample differentiator followed by a Butterworth low-pass.

    A second identical section differentiates the velocity estimate to give
    acceleration, which is only kept for logging.
    """

    cutoff_hz: float | None = None
    dt: float | None = None
    coef: np.ndarray | None = field(default=None, repr=False)
    state: np.ndarray = field(default_factory=lambda: np.zeros(K.F_SIZE), repr=False)
    accel_state: np.ndarray = field(default_factory=lambda: np.zeros(K.F_SIZE), repr=False)
    acceleration: float = 0.0

    def __post_init__(self):
        if self.cutoff_hz is not None and self.dt is not None:
            self.configure(self.cutoff_hz, self.dt)

    def configure(self, cutoff_hz: float, dt: float) -> "DerivativeFilter":
        self.coef = butterworth_lowpass(cutoff_hz, dt)
        self.cutoff_hz = cutoff_hz
        self.dt = dt
        self.reset()
        return self

    def reset(self) -> None:
        self.state[:] = 0.0
        self.accel_state[:] = 0.0
        self.acceleration = 0.0

    @property
    def ready(self) -> bool:
        return self.coef is not None


def estimate_velocity(filt: DerivativeFilter, quantized_angle: float, dt: float) -> float:
    if not filt.ready:
        raise StateError("derivative filter has not been configured")
    if not dt > 0:
        raise DomainError("dt must be positive")
    if not math.isclose(dt, filt.dt, rel_tol=1e-12):
        raise DomainError(f"filter was designed for dt={filt.dt}, got {dt}")
    inv_dt = 1.0 / dt
    v = K.derivative_step(filt.coef, filt.state, float(quantized_angle), inv_dt)
    filt.acceleration = K.derivative_step(filt.coef, filt.accel_state, v, inv_dt)
    return v


@dataclass
class Trajectory:
    """Sampled closed-loop run; ``segments`` maps a label to its row slice."""

    t: np.ndarray
    angle: np.ndarray  # encoder reading
    velocity: np.ndarray  # filtered estimate
    angle_true: np.ndarray
    velocity_true: np.ndarray
    motor: np.ndarray
    human: np.ndarray
    segments: dict[str, slice] = field(default_factory=dict)

    @classmethod
    def from_log(cls, log: np.ndarray, segments=None) -> "Trajectory":
        return cls(log[:, K.L_T], log[:, K.L_ANGLE], log[:, K.L_VEL_EST],
                   log[:, K.L_ANGLE_TRUE], log[:, K.L_VEL_TRUE],
                   log[:, K.L_MOTOR], log[:, K.L_HUMAN], dict(segments or {}))

    @classmethod
    def from_samples(cls, t, angle, velocity=None) -> "Trajectory":
        """Wrap plain samples; velocity defaults to the numerical gradient."""
        t = np.asarray(t, dtype=float)
        angle = np.asarray(angle, dtype=float)
        if velocity is None:
            velocity = np.gradient(angle, t) if len(t) > 1 else np.zeros_like(angle)
        velocity = np.asarray(velocity, dtype=float)
        zeros = np.zeros_like(t)
        return cls(t, angle, velocity, angle.copy(), velocity.copy(), zeros, zeros.copy())

    def __len__(self) -> int:
        return len(self.t)

    def rows(self, sl: slice) -> "Trajectory":
        return Trajectory(self.t[sl], self.angle[sl], self.velocity[sl],
                          self.angle_true[sl], self.velocity_true[sl],
                          self.motor[sl], self.human[sl])

    def segment(self, first: str, last: str | None = None) -> "Trajectory":
        """Rows of one named segment, or the contiguous span ``first..last``."""
        stop = self.segments[last or first].stop
        return self.rows(slice(self.segments[first].start, stop))


TRAJECTORY_COLUMNS = ("t_s", "angle_deg", "velocity_dps", "motor_torque_mnm", "human_torque_mnm")


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for row in zip(traj.t, traj.angle, traj.velocity, traj.motor, traj.human):
            w.writerow([repr(float(x)) for x in row])


def read_trajectory_csv(path: str | Path) -> dict[str, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.asarray(data[name], dtype=float) for name in TRAJECTORY_COLUMNS}

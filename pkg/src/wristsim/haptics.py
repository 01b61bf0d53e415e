"""Stimulus rendering primitives: walls, trajectories, torque ramps, homing.

All torques are returned in mNm. These are the reference implementations
of the control laws; the closed-loop kernel evaluates the same formulas.
"""
from __future__ import annotations

from dataclasses import dataclass

from . import kernels as K
from .errors import DomainError
from .plant import PlantState

WALL_STIFFNESS = 30.0  # N m/rad
WALL_DAMPING = 0.3  # N m s/rad
GAP_HALFWIDTH_DEG = 1.5
# viscous pull toward the gap's velocity; without it the light rotor
# ricochets between the moving walls
GAP_GUIDE_DAMPING = 0.1  # N m s/rad
TORQUE_RAMP_S = 0.5
HOME_KP = 2.0  # N m/rad
HOME_KD = 0.1  # N m s/rad


@dataclass(frozen=True)
class WallPair:
    lower_deg: float
    upper_deg: float
    stiffness: float = WALL_STIFFNESS
    damping: float = WALL_DAMPING

    def __post_init__(self):
        if self.lower_deg > self.upper_deg:
            raise DomainError("lower wall above upper wall")
        if not self.stiffness > 0:
            raise DomainError("wall stiffness must be positive")

    @property
    def center(self) -> float:
        return 0.5 * (self.lower_deg + self.upper_deg)

    @property
    def width(self) -> float:
        return self.upper_deg - self.lower_deg


@dataclass(frozen=True)
class TrajectorySpec:
    from_deg: float
    to_deg: float
    duration_s: float

    def __post_init__(self):
        if not self.duration_s > 0:
            raise DomainError("trajectory duration must be positive")


def wall_torque(angle: float, velocity: float, walls: WallPair) -> float:
    return K.spring_wall(float(angle), float(velocity), walls.lower_deg, walls.upper_deg,
                         walls.stiffness, walls.damping)


def smoothstep_angle(spec: TrajectorySpec, t: float) -> float:
    u = min(max(t / spec.duration_s, 0.0), 1.0)
    return spec.from_deg + (spec.to_deg - spec.from_deg) * K.smoothstep01(u)


def moving_gap(ref_velocity: float, gap_halfwidth: float, start: float, t: float,
               end: float | None = None, stiffness: float = WALL_STIFFNESS,
               damping: float = WALL_DAMPING) -> WallPair:
    """Wall pair whose center travels from ``start`` at ``ref_velocity``,
    stopping at ``end`` when given."""
    if not gap_halfwidth > 0:
        raise DomainError("gap half-width must be positive")
    center = start + ref_velocity * max(t, 0.0)
    if end is not None:
        center = min(center, end) if ref_velocity >= 0 else max(center, end)
    return WallPair(center - gap_halfwidth, center + gap_halfwidth, stiffness, damping)


def torque_ramp(target: float, ramp_s: float, t: float, release_s: float | None = None) -> float:
    """Linear ramp to ``target`` over ``ramp_s``, held until ``release_s``."""
    if not ramp_s > 0:
        raise DomainError("ramp duration must be positive")
    if release_s is not None and t >= release_s:
        return 0.0
    return target * K.torque_ramp01(t, ramp_s)


def home_torque(state: PlantState, home_deg: float, kp: float = HOME_KP, kd: float = HOME_KD) -> float:
    """PD pull toward ``home_deg``."""
    if not kp > 0 or kd < 0:
        raise DomainError("home controller needs kp > 0 and kd >= 0")
    return 1000.0 * (kp * (home_deg - state.angle_deg) - kd * state.velocity_dps) * K.D2R


def gravity_compensation(angle: float, offset_mnm: float = 0.0) -> float:
    # pronation axis is aligned with gravity; only a constant bias term remains
    return offset_mnm

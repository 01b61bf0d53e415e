"""The simulated testbed: plant + rendering controllers + simulated limb.

A :class:`Rig` owns one plant state and runs *programs*, lists of
:class:`Segment` objects compiled into parameter rows for the closed-loop
kernel. Each program returns a :class:`~wristsim.plant.Trajectory` whose
``segments`` name the rows each segment produced.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import haptics
from . import kernels as K
from .plant import PlantParams, PlantState, Trajectory, butterworth_lowpass

HUMAN_KP = 3.0  # N m/rad, limb stiffness while reproducing a movement
HUMAN_KD = 0.15


@dataclass
class Segment:
    name: str
    duration_s: float
    motor: np.ndarray
    human: np.ndarray


def _motor() -> np.ndarray:
    return np.zeros(K.M_SIZE)


def _human() -> np.ndarray:
    return np.zeros(K.H_SIZE)


@dataclass(frozen=True)
class Gains:
    wall_stiffness: float = haptics.WALL_STIFFNESS
    wall_damping: float = haptics.WALL_DAMPING
    gap_halfwidth: float = haptics.GAP_HALFWIDTH_DEG
    gap_guide_kd: float = haptics.GAP_GUIDE_DAMPING
    home_kp: float = haptics.HOME_KP
    home_kd: float = haptics.HOME_KD
    ramp_s: float = haptics.TORQUE_RAMP_S
    gravity_mnm: float = 0.0
    human_kp: float = HUMAN_KP
    human_kd: float = HUMAN_KD


def walls_to(name: str, start: float, target: float, duration: float, gains: Gains,
             hold_s: float = 0.0) -> Segment:
    """Zero-width wall pair riding a smoothstep from ``start`` to ``target``,
    then holding there for ``hold_s``."""
    m = _motor()
    m[K.M_REF_MODE] = 0.0
    m[K.M_REF_FROM] = start
    m[K.M_REF_TO] = target
    m[K.M_REF_PARAM] = duration
    m[K.M_WALL_K] = gains.wall_stiffness
    m[K.M_WALL_C] = gains.wall_damping
    m[K.M_GRAVITY] = gains.gravity_mnm
    return Segment(name, duration + hold_s, m, _human())


def hold_walls(name: str, center: float, duration: float, gains: Gains) -> Segment:
    return walls_to(name, center, center, 0.0, gains, hold_s=duration)


def home_pd(name: str, home: float, duration: float, gains: Gains) -> Segment:
    m = _motor()
    m[K.M_REF_FROM] = home
    m[K.M_REF_TO] = home
    m[K.M_PD_KP] = gains.home_kp
    m[K.M_PD_KD] = gains.home_kd
    m[K.M_GRAVITY] = gains.gravity_mnm
    return Segment(name, duration, m, _human())


def gap_ramp(name: str, start: float, end: float, velocity: float, gains: Gains,
             hold_s: float = 0.0) -> Segment:
    """Moving wall gap from ``start`` to ``end`` at ``velocity``, then parked."""
    m = _motor()
    m[K.M_REF_MODE] = 1.0
    m[K.M_REF_FROM] = start
    m[K.M_REF_TO] = end
    m[K.M_REF_PARAM] = velocity if end >= start else -abs(velocity)
    m[K.M_GAP_HALF] = gains.gap_halfwidth
    m[K.M_PD_KD] = gains.gap_guide_kd
    m[K.M_WALL_K] = gains.wall_stiffness
    m[K.M_WALL_C] = gains.wall_damping
    m[K.M_GRAVITY] = gains.gravity_mnm
    travel = abs(end - start) / abs(velocity)
    return Segment(name, travel + hold_s, m, _human())


def torque_pulse(name: str, target: float, hold_s: float, settle_s: float, home: float,
                 hold_offset: float, gains: Gains, feedforward: float = 1.0) -> Segment:
    """Motor ramps to ``target`` and holds, then releases; the limb resists
    around ``home + hold_offset``."""
    m = _motor()
    m[K.M_RAMP_TARGET] = target
    m[K.M_RAMP_S] = gains.ramp_s
    m[K.M_RAMP_RELEASE] = gains.ramp_s + hold_s
    m[K.M_GRAVITY] = gains.gravity_mnm
    h = _human()
    h[K.H_ACTIVE] = 1.0
    h[K.H_FROM] = home + hold_offset
    h[K.H_TO] = home + hold_offset
    h[K.H_KP] = gains.human_kp
    h[K.H_KD] = gains.human_kd
    h[K.H_FEEDFORWARD] = feedforward
    return Segment(name, gains.ramp_s + hold_s + settle_s, m, h)


def free_reach(name: str, start: float, target: float, duration: float, hold_s: float,
               gains: Gains, model: PlantParams | None = None) -> Segment:
    """Walls off; the simulated limb moves itself along a smoothstep.

    With ``model`` the limb adds inverse-dynamics feedforward for that
    rotor, so it tracks the smoothstep closely.
    """
    m = _motor()
    m[K.M_GRAVITY] = gains.gravity_mnm
    h = _human()
    h[K.H_ACTIVE] = 1.0
    h[K.H_FROM] = start
    h[K.H_TO] = target
    h[K.H_DURATION] = duration
    h[K.H_KP] = gains.human_kp
    h[K.H_KD] = gains.human_kd
    if model is not None:
        h[K.H_MODEL_INERTIA] = model.inertia_j
        h[K.H_MODEL_DAMPING] = model.damping_b
    return Segment(name, duration + hold_s, m, h)


@dataclass
class Rig:
    params: PlantParams = field(default_factory=PlantParams)
    gains: Gains = field(default_factory=Gains)

    def __post_init__(self):
        p = self.params
        self._plant = p.as_vector()
        self._coef = np.vstack([butterworth_lowpass(p.filter_cutoff_hz, p.dt_s),
                                butterworth_lowpass(p.control_cutoff_hz, p.dt_s)])
        self._state = np.zeros(3)
        self._filt = np.zeros((2, K.F_SIZE))

    @property
    def state(self) -> PlantState:
        return PlantState(*map(float, self._state))

    def reset(self, angle: float = 0.0) -> None:
        self._state[:] = (angle, 0.0, 0.0)
        self._filt[:] = 0.0

    def steps_for(self, duration: float) -> int:
        return max(int(round(duration / self.params.dt_s)), 0)

    def run(self, program: list[Segment]) -> Trajectory:
        steps = np.array([self.steps_for(s.duration_s) for s in program], dtype=np.int64)
        motors = np.vstack([s.motor for s in program])
        humans = np.vstack([s.human for s in program])
        log = np.empty((int(steps.sum()), K.L_SIZE))
        K.run_program(self._state, self._filt, self._plant, self._coef, motors, humans, steps, log)
        segments = {}
        start = 0
        for seg, n in zip(program, steps):
            segments[seg.name] = slice(start, start + int(n))
            start += int(n)
        return Trajectory.from_log(log, segments)

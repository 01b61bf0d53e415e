"""Virtual daily-living tasks: kettle pouring and door opening.

Both tasks are abstracted to their decision logic. The kettle integrates
a tilt-driven flow into a cup; the door is a button/rotation state machine.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from .errors import DomainError, SimulationTimeout, StateError


class KettleOutcome(str, enum.Enum):
    IN_PROGRESS = "InProgress"
    SUCCESS = "Success"
    OVERFILLED = "Overfilled"
    UNDERFILLED = "Underfilled"


@dataclass(frozen=True)
class KettleParams:
    tilt_threshold_deg: float = 20.0
    flow_gain: float = 0.02  # fill units per second per degree past threshold
    cup_capacity: float = 1.0
    target_band: tuple[float, float] = (0.7, 0.9)
    time_limit_s: float = 20.0
    dt_s: float = 0.01

    def __post_init__(self):
        low, high = self.target_band
        if not 0 < low < high <= self.cup_capacity:
            raise DomainError("need 0 < band low < band high <= cup capacity")
        if not self.flow_gain > 0:
            raise DomainError("flow_gain must be positive")
        if not (self.time_limit_s > 0 and self.dt_s > 0):
            raise DomainError("time limit and dt must be positive")


@dataclass(frozen=True)
class KettleState:
    fill: float = 0.0
    elapsed: float = 0.0
    outcome: KettleOutcome = KettleOutcome.IN_PROGRESS
    last_flow_s: float = 0.0


_TIME_EPS = 1e-9


def kettle_flow(tilt: float, params: KettleParams) -> float:
    return params.flow_gain * max(0.0, tilt - params.tilt_threshold_deg)


def kettle_step(state: KettleState, params: KettleParams, tilt: float, dt: float) -> KettleState:
    if state.outcome is not KettleOutcome.IN_PROGRESS:
        raise StateError(f"kettle trial already finished ({state.outcome.value})")
    if not dt > 0:
        raise DomainError("dt must be positive")
    flow = kettle_flow(tilt, params)
    fill = state.fill + flow * dt
    elapsed = state.elapsed + dt
    last_flow = elapsed if flow > 0 else state.last_flow_s
    low, high = params.target_band
    outcome = KettleOutcome.IN_PROGRESS
    if fill > high:
        outcome = KettleOutcome.OVERFILLED
    elif elapsed >= params.time_limit_s - _TIME_EPS:
        outcome = KettleOutcome.UNDERFILLED if fill < low else KettleOutcome.SUCCESS
    return KettleState(fill, elapsed, outcome, last_flow)


class DoorState(str, enum.Enum):
    START = "Start"
    KNOB_GRASPED = "KnobGrasped"
    KNOB_TURNED_LOCKED = "KnobTurnedLocked"
    KNOB_RELEASED = "KnobReleased"
    NEAR_KEY = "NearKey"
    KEY_GRASPED = "KeyGrasped"
    KEY_AT_KEYHOLE = "KeyAtKeyhole"
    KEY_INSERTED = "KeyInserted"
    DEADBOLT_UNLOCKED = "DeadboltUnlocked"
    KNOB_GRASPED_UNLOCKED = "KnobGraspedUnlocked"
    KNOB_TURNED_OPEN = "KnobTurnedOpen"
    DOOR_OPEN = "DoorOpen"


class DoorEvent(str, enum.Enum):
    BLUE = "BluePress"
    YELLOW = "YellowPress"
    ROTATE = "RotatePastThreshold"
    ROTATE_BACK = "RotateBack"


S, E = DoorState, DoorEvent
DOOR_TRANSITIONS: dict[tuple[DoorState, DoorEvent], DoorState] = {
    (S.START, E.BLUE): S.KNOB_GRASPED,
    (S.KNOB_GRASPED, E.ROTATE): S.KNOB_TURNED_LOCKED,
    (S.KNOB_TURNED_LOCKED, E.BLUE): S.KNOB_RELEASED,
    (S.KNOB_RELEASED, E.BLUE): S.NEAR_KEY,
    (S.NEAR_KEY, E.BLUE): S.KEY_GRASPED,
    (S.KEY_GRASPED, E.BLUE): S.KEY_AT_KEYHOLE,
    (S.KEY_AT_KEYHOLE, E.YELLOW): S.KEY_INSERTED,
    (S.KEY_INSERTED, E.ROTATE): S.DEADBOLT_UNLOCKED,
    (S.DEADBOLT_UNLOCKED, E.BLUE): S.KNOB_GRASPED_UNLOCKED,
    (S.KNOB_GRASPED_UNLOCKED, E.ROTATE): S.KNOB_TURNED_OPEN,
    (S.KNOB_TURNED_OPEN, E.YELLOW): S.DOOR_OPEN,
}
del S, E

OPTIMAL_DOOR_SEQUENCE: tuple[DoorEvent, ...] = tuple(ev for (_, ev) in DOOR_TRANSITIONS)
DOOR_ROTATION_THRESHOLD_DEG = 30.0


def door_transition(state: DoorState, event: DoorEvent) -> DoorState:
    """Next door state; events not enabled in ``state`` leave it unchanged."""
    return DOOR_TRANSITIONS.get((DoorState(state), DoorEvent(event)), DoorState(state))


def rotation_event(prev_deg: float, angle_deg: float,
                   threshold: float = DOOR_ROTATION_THRESHOLD_DEG) -> DoorEvent | None:
    """Event produced by moving the grip from ``prev_deg`` to ``angle_deg``."""
    if abs(prev_deg) < threshold <= abs(angle_deg):
        return DoorEvent.ROTATE
    if abs(angle_deg) < threshold <= abs(prev_deg):
        return DoorEvent.ROTATE_BACK
    return None


class AdlKind(str, enum.Enum):
    KETTLE = "kettle"
    DOOR = "door"


@dataclass(frozen=True)
class DoorParams:
    timeout_s: float = 600.0


@dataclass(frozen=True)
class LogRow:
    t_s: float
    input: str
    state: str
    fill: float | None = None


@dataclass
class AdlResult:
    kind: AdlKind
    outcome: str
    completion_time_s: float | None
    log: list[LogRow] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.outcome in (KettleOutcome.SUCCESS.value, DoorState.DOOR_OPEN.value)


class KettleController(Protocol):
    def __call__(self, state: KettleState, params: KettleParams) -> float: ...


class DoorController(Protocol):
    def __call__(self, state: DoorState, rng: np.random.Generator) -> tuple[DoorEvent, float]: ...


@dataclass
class PourController:
    """Tilt up to ``pour_tilt_deg``, hold until the cup looks full enough,
    then level off after a reaction delay."""

    pour_tilt_deg: float = 30.0
    stop_fill: float = 0.8
    ramp_s: float = 1.0
    reaction_s: float = 0.2
    _seen_at: float | None = field(default=None, init=False, repr=False)

    def __call__(self, state: KettleState, params: KettleParams) -> float:
        t = state.elapsed
        if self._seen_at is None and state.fill >= self.stop_fill:
            self._seen_at = t
        if self._seen_at is None or t < self._seen_at + self.reaction_s:
            return self.pour_tilt_deg * min(1.0, t / self.ramp_s)
        frac = (t - self._seen_at - self.reaction_s) / self.ramp_s
        return self.pour_tilt_deg * max(0.0, 1.0 - frac)


@dataclass
class ScriptedDoorController:
    """Issues the enabled event for each state; with probability
    ``slip_rate`` a random event is issued instead."""

    action_time_s: float = 1.0
    slip_rate: float = 0.0

    def __call__(self, state: DoorState, rng: np.random.Generator) -> tuple[DoorEvent, float]:
        events = list(DoorEvent)
        if self.slip_rate > 0 and rng.random() < self.slip_rate:
            return events[int(rng.integers(len(events)))], self.action_time_s
        for (s, ev) in DOOR_TRANSITIONS:
            if s is state:
                return ev, self.action_time_s
        return DoorEvent.ROTATE_BACK, self.action_time_s


def run_kettle(controller: Callable[[KettleState, KettleParams], float],
               params: KettleParams) -> AdlResult:
    state = KettleState()
    log = []
    while state.outcome is KettleOutcome.IN_PROGRESS:
        tilt = float(controller(state, params))
        state = kettle_step(state, params, tilt, params.dt_s)
        log.append(LogRow(state.elapsed, repr(tilt), state.outcome.value, state.fill))
    done = state.last_flow_s if state.outcome is KettleOutcome.SUCCESS else None
    return AdlResult(AdlKind.KETTLE, state.outcome.value, done, log)


def run_door(controller: Callable[[DoorState, np.random.Generator], tuple[DoorEvent, float]],
             params: DoorParams, rng: np.random.Generator) -> AdlResult:
    state = DoorState.START
    t = 0.0
    log = []
    while state is not DoorState.DOOR_OPEN:
        event, duration = controller(state, rng)
        if not duration >= 0:
            raise DomainError("action duration must be non-negative")
        t += duration
        if t > params.timeout_s:
            raise SimulationTimeout(f"door not opened within {params.timeout_s} s")
        state = door_transition(state, event)
        log.append(LogRow(t, DoorEvent(event).value, state.value))
    return AdlResult(AdlKind.DOOR, state.value, t, log)


def run_adl(kind: AdlKind | str, controller, params=None,
            rng: np.random.Generator | None = None) -> AdlResult:
    kind = AdlKind(kind)
    if kind is AdlKind.KETTLE:
        return run_kettle(controller, params or KettleParams())
    return run_door(controller, params or DoorParams(), rng or np.random.default_rng(0))


ADL_LOG_COLUMNS = ("t_s", "input", "state", "fill")


def write_adl_log(result: AdlResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ADL_LOG_COLUMNS)
        for r in result.log:
            w.writerow([repr(r.t_s), r.input, r.state, "" if r.fill is None else repr(r.fill)])


"""Adaptive staircase, JND extraction and simulated observers.

The staircase is a transformed up-down track: ``n_down`` consecutive
correct responses lower the comparison offset, one incorrect response
raises it. With equal up/down steps and ``n_down = 3`` it hovers around
the offset answered "different" 79.4% of the time.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import optimize, special

from .errors import DomainError, InsufficientDataError, StateError

TARGET_P = 0.5 ** (1.0 / 3.0)


class Response(str, enum.Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    IGNORED = "ignored"


class Direction(str, enum.Enum):
    NONE = "none"
    DESCENDING = "descending"
    ASCENDING = "ascending"


class Modality(str, enum.Enum):
    POSITION = "position"
    VELOCITY = "velocity"
    TORQUE = "torque"


@dataclass(frozen=True)
class StaircaseConfig:
    reference: float
    initial_delta: float
    step_down: float
    step_up: float
    delta_floor: float
    delta_ceiling: float
    n_down: int = 3
    max_trials: int = 50
    stop_reversals: int = 8
    jnd_reversals: int = 4

    def __post_init__(self):
        if not 0 < self.delta_floor <= self.initial_delta <= self.delta_ceiling:
            raise DomainError("need 0 < delta_floor <= initial_delta <= delta_ceiling")
        if not (self.step_down > 0 and self.step_up > 0):
            raise DomainError("step sizes must be positive")
        if self.n_down < 1 or self.max_trials < 1 or self.stop_reversals < self.jnd_reversals:
            raise DomainError("inconsistent staircase counts")


# initial offset, step, floor, ceiling per modality
STAIRCASE_DEFAULTS = {
    Modality.POSITION: (8.0, 1.0, 1.51, 20.0),
    Modality.VELOCITY: (16.0, 1.5, 0.5, 40.0),
    Modality.TORQUE: (150.0, 15.0, 5.0, 400.0),
}


def default_staircase(modality: Modality | str, reference: float, **overrides) -> StaircaseConfig:
    initial, step, floor, ceiling = STAIRCASE_DEFAULTS[Modality(modality)]
    kw = dict(reference=reference, initial_delta=initial, step_down=step, step_up=step,
              delta_floor=floor, delta_ceiling=ceiling)
    kw.update(overrides)
    return StaircaseConfig(**kw)


@dataclass(frozen=True)
class TraceRow:
    trial: int
    delta: float
    response: Response
    reversal: bool
    terminated_reason: str


@dataclass(frozen=True)
class StaircaseState:
    current_delta: float
    consecutive_correct: int = 0
    direction: Direction = Direction.NONE
    reversal_deltas: tuple[float, ...] = ()
    trials_completed: int = 0
    ignored_trials: int = 0
    terminated: str | None = None  # "reversals" | "max_trials"
    history: tuple[TraceRow, ...] = ()

    @classmethod
    def start(cls, config: StaircaseConfig) -> "StaircaseState":
        return cls(current_delta=config.initial_delta)


def staircase_update(state: StaircaseState, config: StaircaseConfig,
                     response: Response | str) -> StaircaseState:
    """Apply one response.

    A step that the floor (or ceiling) blocks counts as a reversal at the
    bound and reflects the direction, so a track pinned at the floor still
    accumulates reversals there.
    """
    if state.terminated:
        raise StateError(f"staircase already terminated ({state.terminated})")
    response = Response(response)
    delta = state.current_delta
    if response is Response.IGNORED:
        row = TraceRow(len(state.history) + 1, delta, response, False, "")
        return replace(state, ignored_trials=state.ignored_trials + 1,
                       history=state.history + (row,))

    reversals = list(state.reversal_deltas)
    direction = state.direction
    run = state.consecutive_correct
    reversed_here = False
    if response is Response.CORRECT:
        run += 1
        if run >= config.n_down:
            run = 0
            if delta <= config.delta_floor:
                reversals.append(delta)
                reversed_here = True
                direction = Direction.ASCENDING
            else:
                if direction is Direction.ASCENDING:
                    reversals.append(delta)
                    reversed_here = True
                delta = max(config.delta_floor, delta - config.step_down)
                direction = Direction.DESCENDING
    else:
        run = 0
        if delta >= config.delta_ceiling:
            reversals.append(delta)
            reversed_here = True
            direction = Direction.DESCENDING
        else:
            if direction is Direction.DESCENDING:
                reversals.append(delta)
                reversed_here = True
            delta = min(config.delta_ceiling, delta + config.step_up)
            direction = Direction.ASCENDING

    trials = state.trials_completed + 1
    terminated = None
    if len(reversals) >= config.stop_reversals:
        terminated = "reversals"
    elif trials >= config.max_trials:
        terminated = "max_trials"
    row = TraceRow(len(state.history) + 1, state.current_delta, response, reversed_here,
                   terminated or "")
    return StaircaseState(delta, run, direction, tuple(reversals), trials,
                          state.ignored_trials, terminated, state.history + (row,))


@dataclass(frozen=True)
class JndResult:
    jnd_abs: float
    weber_pct: float
    reversal_trace: tuple[float, ...]
    trials_used: int


def staircase_jnd(state: StaircaseState, config: StaircaseConfig) -> JndResult:
    """Median offset over the last ``jnd_reversals`` reversals."""
    k = config.jnd_reversals
    if len(state.reversal_deltas) < k:
        raise InsufficientDataError(
            f"{len(state.reversal_deltas)} reversals recorded, {k} needed for a JND")
    jnd = float(np.median(state.reversal_deltas[-k:]))
    return JndResult(jnd, 100.0 * jnd / config.reference, state.reversal_deltas,
                     state.trials_completed)


def write_trace_csv(state: StaircaseState, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "delta", "response", "reversal_flag", "terminated_reason"])
        for r in state.history:
            w.writerow([r.trial, repr(r.delta), r.response.value, int(r.reversal), r.terminated_reason])


@dataclass(frozen=True)
class Channel:
    """Sensory noise (stimulus units) and same/different criterion."""

    sigma: float
    criterion: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        if self.criterion < 0:
            raise DomainError("criterion must be non-negative")


@dataclass(frozen=True)
class ObserverModel:
    position: Channel = field(default_factory=lambda: Channel(2.0, 2.0))
    velocity: Channel = field(default_factory=lambda: Channel(6.0, 6.0))
    torque: Channel = field(default_factory=lambda: Channel(50.0, 50.0))
    lapse_rate: float = 0.0
    repro_bias_pos: float = 0.0
    repro_noise_pos: float = 0.0
    repro_bias_vel: float = 0.0
    repro_noise_vel: float = 0.0
    gauge_bias: float = 0.0
    gauge_noise_sd: float = 0.0
    hold_noise_sd: float = 0.0
    # daily-living task behaviour
    action_time_s: float = 1.0
    action_slip_rate: float = 0.0
    pour_tilt_deg: float = 30.0
    pour_reaction_s: float = 0.2
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 <= self.lapse_rate < 0.5:
            raise DomainError("lapse rate must be in [0, 0.5)")
        for name in ("repro_noise_pos", "repro_noise_vel", "gauge_noise_sd", "hold_noise_sd"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")
        if not (self.action_time_s > 0 and 0 <= self.action_slip_rate < 1):
            raise DomainError("need action_time_s > 0 and slip rate in [0, 1)")

    def channel(self, modality: Modality | str) -> Channel:
        return getattr(self, Modality(modality).value)

    def make_rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed)


def p_respond_different(delta: float, model: ObserverModel,
                        modality: Modality | str = Modality.POSITION) -> float:
    """Probability of a "different" report for a physical offset ``delta``.

    The internal difference is Normal(delta, 2 sigma^2); "different" when
    its magnitude exceeds the criterion; lapses are coin flips.
    """
    ch = model.channel(modality)
    sd = math.sqrt(2.0) * ch.sigma
    p = special.ndtr((delta - ch.criterion) / sd) + special.ndtr((-ch.criterion - delta) / sd)
    return float(0.5 * model.lapse_rate + (1.0 - model.lapse_rate) * p)


def convergence_point(model: ObserverModel, modality: Modality | str = Modality.POSITION,
                      p_target: float = TARGET_P) -> float:
    """Offset at which ``p_respond_different`` equals ``p_target``."""
    f = lambda d: p_respond_different(d, model, modality) - p_target  # noqa: E731
    if f(0.0) >= 0:
        return 0.0
    hi = max(model.channel(modality).sigma, model.channel(modality).criterion, 1e-12)
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            raise DomainError("target probability unreachable (lapse too high)")
    return float(optimize.brentq(f, 0.0, hi, xtol=1e-12))


def respond_2ifc(stim_ref: float, stim_cmp: float, model: ObserverModel,
                 rng: np.random.Generator, modality: Modality | str = Modality.POSITION,
                 order_ref_first: bool = True) -> Response:
    """Simulated same/different report; "different" is the correct answer.

    Random numbers are drawn in a fixed pattern so replays with the same
    generator state are identical.
    """
    if stim_cmp == stim_ref:
        raise DomainError("comparison must differ from reference")
    ch = model.channel(modality)
    lapse_u, guess_u = rng.random(2)
    first, second = (stim_ref, stim_cmp) if order_ref_first else (stim_cmp, stim_ref)
    n1, n2 = rng.normal(0.0, ch.sigma, 2)
    if lapse_u < model.lapse_rate:
        different = guess_u < 0.5
    else:
        different = abs((second + n2) - (first + n1)) > ch.criterion
    return Response.CORRECT if different else Response.INCORRECT


def reproduce_value(target: float, model: ObserverModel, rng: np.random.Generator,
                    modality: Modality | str = Modality.POSITION) -> float:
    """Intended reproduction of ``target`` (amplitude or ramp rate)."""
    if Modality(modality) is Modality.VELOCITY:
        bias, sd = model.repro_bias_vel, model.repro_noise_vel
    else:
        bias, sd = model.repro_bias_pos, model.repro_noise_pos
    return float(target + bias + rng.normal(0.0, sd)) if sd > 0 else float(target + bias)


def point_gauge(true_angle: float, model: ObserverModel, rng: np.random.Generator) -> float:
    """Protractor report, rounded half-up to a whole degree."""
    noise = rng.normal(0.0, model.gauge_noise_sd) if model.gauge_noise_sd > 0 else 0.0
    return float(math.floor(true_angle + model.gauge_bias + noise + 0.5))


def simulate_staircase(config: StaircaseConfig, model: ObserverModel, rng: np.random.Generator,
                       modality: Modality | str = Modality.POSITION) -> StaircaseState:
    """Run a track against the observer with no plant in the loop."""
    state = StaircaseState.start(config)
    while not state.terminated:
        first = bool(rng.random() < 0.5)
        r = respond_2ifc(config.reference, config.reference + state.current_delta,
                         model, rng, modality, first)
        state = staircase_update(state, config, r)
    return state

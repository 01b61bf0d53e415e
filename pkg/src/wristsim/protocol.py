"""Assessment session orchestration.

A session measures the comfortable range of motion, runs the gauge
matching block, then seven counterbalanced robotic blocks. Every
presentation is simulated through the closed-loop rig on a virtual clock.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from scipy.optimize import brentq

from . import adl, kernels as K, rig as R
from .core_types import ParticipantRecord, derive_reference_stimuli
from .errors import DomainError, FeatureError, InsufficientDataError, WristSimError
from .plant import PlantParams, Trajectory
from .psychophysics import (
    JndResult, Modality, ObserverModel, Response, StaircaseConfig, StaircaseState,
    default_staircase, point_gauge, reproduce_value, respond_2ifc, staircase_jnd,
    staircase_update, write_trace_csv,
)


class BlockKind(str, enum.Enum):
    GAUGE_MATCH = "GaugeMatch"
    POS_DISCRIM = "PosDiscrim"
    VEL_DISCRIM = "VelDiscrim"
    TORQUE_DISCRIM = "TorqueDiscrim"
    POS_ADJUST = "PosAdjust"
    VEL_ADJUST = "VelAdjust"
    KETTLE_ADL = "KettleADL"
    DOOR_ADL = "DoorADL"


DISCRIMINATION = (BlockKind.POS_DISCRIM, BlockKind.VEL_DISCRIM, BlockKind.TORQUE_DISCRIM)
ADJUSTMENT = (BlockKind.POS_ADJUST, BlockKind.VEL_ADJUST)
PSYCHOMETRIC = DISCRIMINATION + ADJUSTMENT
ADL_BLOCKS = (BlockKind.KETTLE_ADL, BlockKind.DOOR_ADL)

_MODALITY = {
    BlockKind.POS_DISCRIM: Modality.POSITION,
    BlockKind.VEL_DISCRIM: Modality.VELOCITY,
    BlockKind.TORQUE_DISCRIM: Modality.TORQUE,
}


@dataclass(frozen=True)
class TrialTiming:
    hold_s: float = 2.0
    inter_interval_s: float = 1.75
    move_s: float = 1.0  # smoothstep transit for position presentations
    settle_s: float = 1.0  # walls at home before each trial


@dataclass(frozen=True)
class SessionConfig:
    plant: PlantParams = field(default_factory=PlantParams)
    gains: R.Gains = field(default_factory=R.Gains)
    timing: TrialTiming = field(default_factory=TrialTiming)
    gauge_trials: int = 20
    adjust_trials: int = 21
    vel_adjust_range_dps: tuple[float, float] = (15.0, 90.0)
    torque_tolerance_deg: float = 5.0
    max_ignored: int = 50
    limiter_margin_deg: float = 2.0
    kettle: adl.KettleParams = field(default_factory=adl.KettleParams)
    kettle_trials: int = 3
    door: adl.DoorParams = field(default_factory=adl.DoorParams)
    counterbalance_seed: int = 0

    def __post_init__(self):
        lo, hi = self.vel_adjust_range_dps
        if not 0 < lo < hi:
            raise DomainError("velocity adjustment range must satisfy 0 < low < high")
        if self.gauge_trials < 2 or self.adjust_trials < 1 or self.max_ignored < 1:
            raise DomainError("trial counts must be positive (gauge needs two)")
        if not self.torque_tolerance_deg > 0:
            raise DomainError("torque tolerance must be positive")


def measure_crom(pron_limit: float, sup_limit: float,
                 neutral: float | None = None) -> tuple[float, float]:
    """``(neutral, cROM)`` from the two comfortable limits.

    ``neutral`` is the participant's declared resting angle; the midpoint
    of the limits stands in when none is declared.
    """
    if not pron_limit > sup_limit:
        raise DomainError(f"pronation limit {pron_limit} must exceed supination limit {sup_limit}")
    crom = pron_limit - sup_limit
    if neutral is None:
        neutral = 0.5 * (pron_limit + sup_limit)
    return float(neutral), float(crom)


@dataclass(frozen=True)
class ParticipantProfile:
    pid: int
    pron_limit_deg: float
    sup_limit_deg: float
    neutral_deg: float = 0.0
    age: float = 30.0
    gender: str = "U"
    handedness_li: float = 100.0
    emnsa: int = 8
    fma_hw: int = 30
    moca: int = 30

    @property
    def crom_deg(self) -> float:
        return measure_crom(self.pron_limit_deg, self.sup_limit_deg, self.neutral_deg)[1]


@dataclass(frozen=True)
class IntervalRecord:
    index: int
    role: str  # "reference" | "comparison"
    commanded: float
    measured: float
    onset_s: float
    hold_start_s: float
    hold_end_s: float
    breach: bool = False


@dataclass(frozen=True)
class DiscriminationTrial:
    trial: int
    delta: float
    reference_first: bool
    intervals: tuple[IntervalRecord, IntervalRecord]
    response: str
    reversal: bool
    note: str = ""

    def row(self) -> dict:
        out = {"trial": self.trial, "delta": self.delta,
               "reference_first": int(self.reference_first)}
        for iv in self.intervals:
            p = f"i{iv.index}_"
            out.update({p + "role": iv.role, p + "commanded": iv.commanded,
                        p + "measured": iv.measured, p + "onset_s": iv.onset_s,
                        p + "hold_start_s": iv.hold_start_s, p + "hold_end_s": iv.hold_end_s,
                        p + "breach": int(iv.breach)})
        out.update({"response": self.response, "reversal": int(self.reversal), "note": self.note})
        return out


@dataclass(frozen=True)
class AdjustmentTrial:
    trial: int
    target: float
    presented: float
    intended: float
    produced: float
    error: float
    note: str = ""

    def row(self) -> dict:
        return dict(trial=self.trial, target=self.target, presented=self.presented,
                    intended=self.intended, produced=self.produced, error=self.error,
                    note=self.note)


@dataclass(frozen=True)
class GaugeTrial:
    trial: int
    target: float
    actual: float
    reported: float
    error: float

    def row(self) -> dict:
        return dict(trial=self.trial, target=self.target, actual=self.actual,
                    reported=self.reported, error=self.error)


@dataclass(frozen=True)
class AdlTrial:
    trial: int
    outcome: str
    completion_time_s: float

    def row(self) -> dict:
        return dict(trial=self.trial, outcome=self.outcome,
                    completion_time_s=self.completion_time_s)


@dataclass
class BlockResult:
    kind: BlockKind
    measure: float | None
    trial_records: list
    complete: bool
    note: str = ""
    staircase: StaircaseState | None = None
    jnd: JndResult | None = None
    adl_results: list = field(default_factory=list)

    def __post_init__(self):
        if self.complete != (self.measure is not None):
            raise DomainError("a block has a measure exactly when it is complete")

    @property
    def trials_completed(self) -> int:
        if self.staircase is not None:
            return self.staircase.trials_completed
        return len(self.trial_records)

    @property
    def ignored_trials(self) -> int:
        return self.staircase.ignored_trials if self.staircase is not None else 0


# -- trajectory features ----------------------------------------------------

def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open index ranges where ``mask`` is true."""
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return list(zip(edges[::2], edges[1::2]))


def steady_state_angle(traj: Trajectory, threshold_dps: float = 2.0,
                       min_window_s: float = 0.5) -> float:
    """Mean angle over the last window where |velocity| stays under
    ``threshold_dps`` for at least ``min_window_s``."""
    t = traj.t
    if len(t) < 2:
        raise FeatureError("trajectory too short for a steady-state window")
    dt = float(np.median(np.diff(t)))
    for start, stop in reversed(_runs(np.abs(traj.velocity) < threshold_dps)):
        if (stop - start) * dt >= min_window_s - 1e-9:
            return float(np.mean(traj.angle[start:stop]))
    raise FeatureError(f"no window with |velocity| < {threshold_dps} dps lasting {min_window_s} s")


def _crossing(t: np.ndarray, angle: np.ndarray, level: float, start: int = 0) -> tuple[float, int]:
    """First upward crossing of ``level`` at or after ``start``, linearly interpolated."""
    idx = np.flatnonzero(angle[start:] >= level)
    if len(idx) == 0:
        raise FeatureError(f"trajectory never reaches {level:.3f}")
    k = start + int(idx[0])
    if k == 0 or angle[k] == level:
        return float(t[k]), k
    a0, a1 = angle[k - 1], angle[k]
    return float(t[k - 1] + (level - a0) / (a1 - a0) * (t[k] - t[k - 1])), k


def ramp_midrange_rate(traj: Trajectory, window: tuple[float, float] = (0.2, 0.8)) -> float:
    """Average rate between the ``window`` fractions of a rising ramp's amplitude.

    The ramp runs from the first sample (start plateau) to the last sample
    (end plateau).
    """
    lo, hi = window
    if not 0 <= lo < hi <= 1:
        raise DomainError("window must satisfy 0 <= low < high <= 1")
    t, angle = traj.t, traj.angle
    if len(t) < 3:
        raise FeatureError("trajectory too short for a ramp")
    a0, a1 = float(angle[0]), float(angle[-1])
    amp = a1 - a0
    if not amp > 0:
        raise FeatureError("no rising ramp: trajectory does not end above its start")
    level_lo, level_hi = a0 + lo * amp, a0 + hi * amp
    t_lo, k = _crossing(t, angle, level_lo)
    t_hi, _ = _crossing(t, angle, level_hi, k)
    if not t_hi > t_lo:
        raise FeatureError("degenerate ramp timing")
    return (level_hi - level_lo) / (t_hi - t_lo)


# -- presentations ----------------------------------------------------------

def _rig_at_home(profile: ParticipantProfile, config: SessionConfig) -> R.Rig:
    rg = R.Rig(config.plant, config.gains)
    rg.reset(profile.neutral_deg)
    return rg


def _interval(traj: Trajectory, name: str, dt: float, hold_s: float, index: int, role: str,
              commanded: float, measured: float, breach: bool = False) -> IntervalRecord:
    sl = traj.segments[name]
    onset = float(traj.t[sl.start])
    hold_end = onset + (sl.stop - sl.start) * dt
    return IntervalRecord(index, role, commanded, measured, onset, hold_end - hold_s, hold_end, breach)


def _position_limits(profile: ParticipantProfile, config: SessionConfig) -> tuple[float, float]:
    lim = config.plant.limiter_deg - config.limiter_margin_deg
    return max(profile.sup_limit_deg, -lim), min(profile.pron_limit_deg, lim)


def _discrim_staircase(kind: BlockKind, profile: ParticipantProfile,
                       config: SessionConfig) -> tuple[StaircaseConfig, float]:
    refs = derive_reference_stimuli(profile.crom_deg)
    modality = _MODALITY[kind]
    if modality is Modality.POSITION:
        ref = refs.pos_ref_deg
        sc = default_staircase(modality, ref)
        # keep the largest comparison inside the device range
        room = config.plant.limiter_deg - config.limiter_margin_deg - profile.neutral_deg - ref
        if room < sc.delta_ceiling:
            if room < sc.delta_floor:
                raise DomainError("reference position leaves no room for a comparison")
            sc = default_staircase(modality, ref, delta_ceiling=room,
                                   initial_delta=min(sc.initial_delta, room))
        return sc, ref
    ref = refs.vel_ref_dps if modality is Modality.VELOCITY else refs.torque_ref_mnm
    return default_staircase(modality, ref), ref


def _present_pair(rg: R.Rig, kind: BlockKind, stimuli: tuple[float, float],
                  offsets: tuple[float, float], profile: ParticipantProfile,
                  config: SessionConfig) -> Trajectory:
    g, tm, home = config.gains, config.timing, profile.neutral_deg
    ramp_end = home + derive_reference_stimuli(profile.crom_deg).pos_ref_deg
    prog = [R.hold_walls("settle", home, tm.settle_s, g)]
    for i, s in enumerate(stimuli, start=1):
        if kind is BlockKind.POS_DISCRIM:
            prog.append(R.walls_to(f"interval{i}", home, home + s, tm.move_s, g, hold_s=tm.hold_s))
            back_from = home + s
        elif kind is BlockKind.VEL_DISCRIM:
            prog.append(R.gap_ramp(f"interval{i}", home, ramp_end, s, g, hold_s=tm.hold_s))
            back_from = ramp_end
        else:
            prog.append(R.torque_pulse(f"interval{i}", s, tm.hold_s, 0.0, home, offsets[i - 1], g))
            back_from = home + offsets[i - 1]
        back = min(tm.move_s, tm.inter_interval_s)
        prog.append(R.walls_to(f"return{i}", back_from, home, back, g,
                               hold_s=tm.inter_interval_s - back))
    return rg.run(prog)


def _measure(kind: BlockKind, seg: Trajectory, home: float, config: SessionConfig) -> float:
    if kind is BlockKind.POS_DISCRIM:
        return steady_state_angle(seg) - home
    if kind is BlockKind.VEL_DISCRIM:
        return ramp_midrange_rate(seg)
    ramp = config.gains.ramp_s
    n_ramp = int(round(ramp / config.plant.dt_s))
    return float(np.mean(seg.motor[n_ramp:])) - config.gains.gravity_mnm


def run_discrimination_block(kind: BlockKind | str, profile: ParticipantProfile,
                             observer: ObserverModel, rng: np.random.Generator,
                             config: SessionConfig | None = None) -> BlockResult:
    kind = BlockKind(kind)
    if kind not in DISCRIMINATION:
        raise DomainError(f"{kind.value} is not a discrimination block")
    config = config or SessionConfig()
    modality = _MODALITY[kind]
    sc, ref = _discrim_staircase(kind, profile, config)
    home = profile.neutral_deg
    rg = _rig_at_home(profile, config)
    state = StaircaseState.start(sc)
    records = []
    while not state.terminated and state.ignored_trials < config.max_ignored:
        delta = state.current_delta
        ref_first = bool(rng.random() < 0.5)
        roles = ("reference", "comparison") if ref_first else ("comparison", "reference")
        stimuli = tuple(ref if r == "reference" else ref + delta for r in roles)
        offsets = (0.0, 0.0)
        if kind is BlockKind.TORQUE_DISCRIM and observer.hold_noise_sd > 0:
            offsets = tuple(rng.normal(0.0, observer.hold_noise_sd, 2))
        traj = _present_pair(rg, kind, stimuli, offsets, profile, config)
        intervals, note, breach_any = [], "", False
        measured = []
        for i in (1, 2):
            seg = traj.segment(f"interval{i}")
            breach = False
            if kind is BlockKind.TORQUE_DISCRIM:
                breach = bool(np.max(np.abs(seg.angle - home)) > config.torque_tolerance_deg)
            try:
                m = _measure(kind, seg, home, config)
            except FeatureError as exc:
                m, note, breach = math.nan, f"feature: {exc}", True
            breach_any |= breach
            measured.append(m)
            intervals.append(_interval(traj, f"interval{i}", config.plant.dt_s, config.timing.hold_s, i, roles[i - 1],
                                       stimuli[i - 1], m, breach))
        if breach_any:
            response = Response.IGNORED
            note = note or "tolerance breach"
        else:
            m_ref, m_cmp = (measured if ref_first else measured[::-1])
            response = respond_2ifc(m_ref, m_cmp, observer, rng, modality, ref_first)
        state = staircase_update(state, sc, response)
        reversal = state.history[-1].reversal
        records.append(DiscriminationTrial(len(records) + 1, delta, ref_first, tuple(intervals),
                                           response.value, reversal, note))
    try:
        jnd = staircase_jnd(state, sc)
    except InsufficientDataError as exc:
        why = str(exc) if state.terminated else f"stopped after {state.ignored_trials} ignored trials; {exc}"
        return BlockResult(kind, None, records, False, why, staircase=state)
    return BlockResult(kind, jnd.jnd_abs, records, True, state.terminated or "", state, jnd)


def smoothstep_midrange_fraction(window: tuple[float, float] = (0.2, 0.8)) -> float:
    """Fraction of the duration a smoothstep spends between the window levels."""
    s = lambda u, level: 3 * u * u - 2 * u ** 3 - level  # noqa: E731
    u_lo = brentq(s, 0.0, 1.0, args=(window[0],))
    u_hi = brentq(s, 0.0, 1.0, args=(window[1],))
    return u_hi - u_lo


_MID_FRACTION = smoothstep_midrange_fraction()


def run_adjustment_block(kind: BlockKind | str, profile: ParticipantProfile,
                         observer: ObserverModel, rng: np.random.Generator,
                         config: SessionConfig | None = None) -> BlockResult:
    kind = BlockKind(kind)
    if kind not in ADJUSTMENT:
        raise DomainError(f"{kind.value} is not an adjustment block")
    config = config or SessionConfig()
    g, tm, home = config.gains, config.timing, profile.neutral_deg
    rg = _rig_at_home(profile, config)
    room = _position_limits(profile, config)[1] - home
    if not room > 0:
        raise DomainError("no pronation room above the neutral angle")
    amp = min(derive_reference_stimuli(profile.crom_deg).pos_ref_deg, room)
    lo, hi = config.vel_adjust_range_dps
    records = []
    back = min(tm.move_s, tm.inter_interval_s)
    position = kind is BlockKind.POS_ADJUST
    modality = Modality.POSITION if position else Modality.VELOCITY
    for trial in range(1, config.adjust_trials + 1):
        if position:
            target = float(rng.uniform(0.1 * room, 0.9 * room))
            present = R.walls_to("present", home, home + target, tm.move_s, g, hold_s=tm.hold_s)
        else:
            target = float(rng.uniform(lo, hi))
            present = R.gap_ramp("present", home, home + amp, target, g, hold_s=0.5)
        shown_traj = rg.run([
            R.hold_walls("settle", home, tm.settle_s, g), present,
            R.walls_to("return", _segment_target(present), home, back, g,
                       hold_s=tm.inter_interval_s - back)])
        try:
            seg = shown_traj.segment("present")
            shown = steady_state_angle(seg) - home if position else ramp_midrange_rate(seg)
        except FeatureError as exc:
            records.append(AdjustmentTrial(trial, target, math.nan, math.nan, math.nan, math.nan,
                                           f"excluded: {exc}"))
            continue
        # the observer reproduces what it felt, not the command
        intended = reproduce_value(shown, observer, rng, modality)
        if position:
            intended = float(np.clip(intended, -room, room))
            reach = R.free_reach("reproduce", home, home + intended, tm.move_s, tm.hold_s, g,
                                 config.plant)
            end = home + intended
        else:
            intended = max(intended, 1.0)
            duration = 0.6 * amp / (_MID_FRACTION * intended)
            reach = R.free_reach("reproduce", home, home + amp, duration, 0.5, g, config.plant)
            end = home + amp
        made_traj = rg.run([reach, R.free_reach("home", end, home, tm.move_s, 0.0, g, config.plant)])
        note = ""
        try:
            seg = made_traj.segment("reproduce")
            made = steady_state_angle(seg) - home if position else ramp_midrange_rate(seg)
            err = abs(made - shown)
        except FeatureError as exc:
            made = err = math.nan
            note = f"excluded: {exc}"
        records.append(AdjustmentTrial(trial, target, shown, intended, made, err, note))
    errors = [r.error for r in records if not math.isnan(r.error)]
    if not errors:
        return BlockResult(kind, None, records, False, "no trial yielded a usable feature")
    return BlockResult(kind, float(np.mean(errors)), records, True)


def _segment_target(seg: R.Segment) -> float:
    return float(seg.motor[K.M_REF_TO])


def gauge_targets(profile: ParticipantProfile, n: int, config: SessionConfig) -> np.ndarray:
    """``n`` evenly spaced angles over the central 90% of the cROM, kept
    inside the device range."""
    margin = 0.05 * profile.crom_deg
    lo_lim, hi_lim = -(config.plant.limiter_deg - config.limiter_margin_deg), \
        config.plant.limiter_deg - config.limiter_margin_deg
    lo = max(profile.sup_limit_deg + margin, lo_lim)
    hi = min(profile.pron_limit_deg - margin, hi_lim)
    return np.linspace(lo, hi, n)


def run_gauge_block(profile: ParticipantProfile, observer: ObserverModel,
                    rng: np.random.Generator, config: SessionConfig | None = None) -> BlockResult:
    config = config or SessionConfig()
    g, tm, home = config.gains, config.timing, profile.neutral_deg
    targets = rng.permutation(gauge_targets(profile, config.gauge_trials, config))
    rg = _rig_at_home(profile, config)
    records = []
    for trial, target in enumerate(targets, start=1):
        target = float(target)
        traj = rg.run([R.hold_walls("settle", home, tm.settle_s, g),
                       R.walls_to("present", home, target, tm.move_s, g, hold_s=tm.hold_s),
                       R.walls_to("return", target, home, tm.move_s, g)])
        actual = steady_state_angle(traj.segment("present"))
        reported = point_gauge(actual, observer, rng)
        records.append(GaugeTrial(trial, target, actual, reported, abs(reported - actual)))
    return BlockResult(BlockKind.GAUGE_MATCH, float(np.mean([r.error for r in records])),
                       records, True)


def run_adl_block(kind: BlockKind | str, observer: ObserverModel, rng: np.random.Generator,
                  config: SessionConfig | None = None) -> BlockResult:
    kind = BlockKind(kind)
    config = config or SessionConfig()
    records, results = [], []
    if kind is BlockKind.KETTLE_ADL:
        low, high = config.kettle.target_band
        for trial in range(1, config.kettle_trials + 1):
            tilt = observer.pour_tilt_deg + float(rng.normal(0.0, 1.0))
            # aim low in the band; flow keeps running while the kettle levels off
            ctl = adl.PourController(pour_tilt_deg=tilt, stop_fill=low + 0.25 * (high - low),
                                     reaction_s=observer.pour_reaction_s)
            res = adl.run_adl(adl.AdlKind.KETTLE, ctl, config.kettle)
            results.append(res)
            done = res.completion_time_s
            records.append(AdlTrial(trial, res.outcome, math.nan if done is None else done))
        times = [r.completion_time_s for r in records if r.outcome == adl.KettleOutcome.SUCCESS.value]
        if not times:
            return BlockResult(kind, None, records, False, "no successful pour", adl_results=results)
        return BlockResult(kind, float(np.mean(times)), records, True, adl_results=results)
    if kind is BlockKind.DOOR_ADL:
        ctl = adl.ScriptedDoorController(observer.action_time_s, observer.action_slip_rate)
        try:
            res = adl.run_adl(adl.AdlKind.DOOR, ctl, config.door, rng)
        except WristSimError as exc:
            return BlockResult(kind, None, [], False, str(exc))
        records.append(AdlTrial(1, res.outcome, res.completion_time_s))
        return BlockResult(kind, res.completion_time_s, records, True, adl_results=[res])
    raise DomainError(f"{kind.value} is not an ADL block")


# -- ordering and sessions --------------------------------------------------

def counterbalance_order(participant_index: int, seed: int = 0) -> list[BlockKind]:
    """Gauge matching, two psychometric blocks, the first ADL, then the
    second ADL and the third psychometric block in either order, then the
    last two psychometric blocks.

    Psychometric blocks follow a cyclic rotation of a seeded base order, so
    over consecutive indices every block visits every psychometric slot
    equally often.
    """
    if participant_index < 0:
        raise DomainError("participant index must be non-negative")
    base = [PSYCHOMETRIC[i] for i in np.random.default_rng(seed).permutation(len(PSYCHOMETRIC))]
    n = len(base)
    psych = [base[(j + participant_index) % n] for j in range(n)]
    adls = list(ADL_BLOCKS) if (participant_index + seed) % 2 == 0 else list(ADL_BLOCKS[::-1])
    middle = [adls[1], psych[2]]
    if (participant_index // 2 + seed) % 2 == 1:
        middle.reverse()
    return [BlockKind.GAUGE_MATCH, psych[0], psych[1], adls[0], *middle, psych[3], psych[4]]


@dataclass
class SessionResult:
    profile: ParticipantProfile
    order: list[BlockKind]
    blocks: dict[BlockKind, BlockResult]
    record: ParticipantRecord
    errors: list[str] = field(default_factory=list)


def _measure_or_nan(blocks: dict, kind: BlockKind) -> float:
    b = blocks.get(kind)
    return float(b.measure) if b is not None and b.complete else math.nan


def run_block(kind: BlockKind, profile: ParticipantProfile, observer: ObserverModel,
              rng: np.random.Generator, config: SessionConfig) -> BlockResult:
    if kind is BlockKind.GAUGE_MATCH:
        return run_gauge_block(profile, observer, rng, config)
    if kind in DISCRIMINATION:
        return run_discrimination_block(kind, profile, observer, rng, config)
    if kind in ADJUSTMENT:
        return run_adjustment_block(kind, profile, observer, rng, config)
    return run_adl_block(kind, observer, rng, config)


def run_session(profile: ParticipantProfile, observer: ObserverModel,
                config: SessionConfig | None, rng: np.random.Generator) -> SessionResult:
    config = config or SessionConfig()
    order = counterbalance_order(profile.pid - 1 if profile.pid > 0 else 0, config.counterbalance_seed)
    seeds = rng.integers(0, 2**63 - 1, size=len(order))
    blocks: dict[BlockKind, BlockResult] = {}
    errors = []
    for kind, s in zip(order, seeds):
        try:
            res = run_block(kind, profile, observer, np.random.default_rng(int(s)), config)
        except WristSimError as exc:
            res = BlockResult(kind, None, [], False, f"error: {exc}")
        if not res.complete:
            errors.append(f"{kind.value}: {res.note}")
        blocks[kind] = res
    refs = derive_reference_stimuli(profile.crom_deg)
    jndp = _measure_or_nan(blocks, BlockKind.POS_DISCRIM)
    jndv = _measure_or_nan(blocks, BlockKind.VEL_DISCRIM)
    jndt = _measure_or_nan(blocks, BlockKind.TORQUE_DISCRIM)
    record = ParticipantRecord(
        pid=profile.pid, age=float(profile.age), gender=profile.gender,
        handedness_li=float(profile.handedness_li), emnsa=profile.emnsa, fma_hw=profile.fma_hw,
        moca=profile.moca, neutral_deg=float(profile.neutral_deg), crom_deg=profile.crom_deg,
        meg_deg=_measure_or_nan(blocks, BlockKind.GAUGE_MATCH),
        jndp_deg=jndp, kp_pct=100.0 * jndp / refs.pos_ref_deg,
        jndv_dps=jndv, kv_pct=100.0 * jndv / refs.vel_ref_dps,
        jndt_mnm=jndt, kt_pct=100.0 * jndt / refs.torque_ref_mnm,
        mep_deg=_measure_or_nan(blocks, BlockKind.POS_ADJUST),
        mev_dps=_measure_or_nan(blocks, BlockKind.VEL_ADJUST),
        tk_s=_measure_or_nan(blocks, BlockKind.KETTLE_ADL),
        td_s=_measure_or_nan(blocks, BlockKind.DOOR_ADL),
    )
    return SessionResult(profile, order, blocks, record, errors)


def _write_rows(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def write_session(result: SessionResult, directory: str | Path) -> Path:
    """Persist per-block trial logs, staircase traces and ADL logs."""
    from .core_types import write_participants

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_participants([result.record], d / "participant.csv")
    for pos, kind in enumerate(result.order):
        block = result.blocks[kind]
        stem = f"{pos:02d}_{kind.value}"
        _write_rows([r.row() for r in block.trial_records], d / f"{stem}.csv")
        if block.staircase is not None:
            write_trace_csv(block.staircase, d / f"{stem}_staircase.csv")
        for i, res in enumerate(block.adl_results, start=1):
            adl.write_adl_log(res, d / f"{stem}_log{i}.csv")
    with open(d / "blocks.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["position", "kind", "complete", "measure", "note"])
        for pos, kind in enumerate(result.order):
            b = result.blocks[kind]
            w.writerow([pos, kind.value, int(b.complete), "" if b.measure is None else repr(b.measure), b.note])
    return d


# -- populations and Monte Carlo --------------------------------------------

def make_population(n: int, rng: np.random.Generator) -> list[tuple[ParticipantProfile, ObserverModel]]:
    """``n`` heterogeneous simulated participants."""
    from .psychophysics import Channel

    out = []
    for pid in range(1, n + 1):
        u = rng.uniform
        profile = ParticipantProfile(
            pid=pid, pron_limit_deg=round(u(50, 58), 1), sup_limit_deg=round(-u(50, 58), 1),
            neutral_deg=round(u(-3, 5), 1), age=float(round(u(20, 60))),
            gender=str(rng.choice(["F", "M"])), handedness_li=round(u(40, 100), 1),
            emnsa=8, fma_hw=30, moca=int(rng.integers(25, 31)))
        ps, vs, ts = u(0.8, 4.0), u(2.0, 10.0), u(20.0, 80.0)
        observer = ObserverModel(
            position=Channel(ps, ps * u(0.5, 1.5)), velocity=Channel(vs, vs * u(0.5, 1.5)),
            torque=Channel(ts, ts * u(0.5, 1.5)), lapse_rate=u(0.0, 0.05),
            repro_bias_pos=rng.normal(0, 2), repro_noise_pos=u(2, 8),
            repro_bias_vel=rng.normal(0, 3), repro_noise_vel=u(5, 20),
            gauge_bias=rng.normal(0, 3), gauge_noise_sd=u(4, 12), hold_noise_sd=u(0.5, 2.0),
            action_time_s=u(1.5, 6.0), action_slip_rate=u(0.0, 0.3),
            pour_tilt_deg=u(26, 30), pour_reaction_s=u(0.1, 0.3),
            rng_seed=int(rng.integers(0, 2**31)))
        out.append((profile, observer))
    return out


@dataclass(frozen=True)
class MonteCarloSummary:
    kind: BlockKind
    runs: int
    target: float  # offset answered "different" 79.4% of the time
    median_jnd: float
    q25: float
    q75: float
    incomplete: int
    mean_trials: float

    @property
    def ratio(self) -> float:
        return self.median_jnd / self.target if self.target > 0 else math.nan

    @property
    def bias(self) -> float:
        return self.median_jnd - self.target


def _mc_one(args) -> tuple[float, int]:
    kind, profile, observer, config, seed = args
    res = run_discrimination_block(kind, profile, observer, np.random.default_rng(seed), config)
    return (res.measure if res.complete else math.nan), len(res.trial_records)


def discrimination_montecarlo(kind: BlockKind | str, profile: ParticipantProfile,
                              observer: ObserverModel, runs: int, seed: int,
                              config: SessionConfig | None = None, workers: int = 1) -> MonteCarloSummary:
    """Repeat a discrimination block ``runs`` times with independent streams."""
    from .psychophysics import convergence_point

    kind = BlockKind(kind)
    config = config or SessionConfig()
    seeds = np.random.SeedSequence([seed, list(BlockKind).index(kind)]).spawn(runs)
    jobs = [(kind, profile, observer, config, s) for s in seeds]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_mc_one, jobs, chunksize=max(1, runs // (4 * workers))))
    else:
        results = [_mc_one(j) for j in jobs]
    jnds = np.array([r[0] for r in results])
    done = jnds[~np.isnan(jnds)]
    q25, med, q75 = np.percentile(done, [25, 50, 75]) if done.size else (math.nan,) * 3
    target = convergence_point(observer, _MODALITY[kind])
    return MonteCarloSummary(kind, runs, target, float(med), float(q25), float(q75),
                             int(np.isnan(jnds).sum()), float(np.mean([r[1] for r in results])))

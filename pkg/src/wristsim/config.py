"""Run configuration from a flat ``key = value`` text file.

Blank lines and ``#`` comments are ignored. Recognized keys:

``seed``, ``runs``, ``participants``, ``workers``
    integers
``modalities``
    comma list drawn from ``position, velocity, torque``
``observer.<field>``
    observer channel and noise parameters; a comma list defines a grid
    axis for Monte Carlo runs (``observer.velocity_sigma = 3, 6, 9``).
    Channel fields are ``{position,velocity,torque}_{sigma,criterion}``.
``plant.<field>``
    any numeric field of :class:`~wristsim.plant.PlantParams`
``session.<field>``
    scalar fields of :class:`~wristsim.protocol.SessionConfig`
``profile.<field>``
    ``pron_limit_deg``, ``sup_limit_deg``, ``neutral_deg`` of the Monte
    Carlo participant
"""
from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaError
from .plant import PlantParams
from .protocol import BlockKind, ParticipantProfile, SessionConfig
from .psychophysics import Channel, ObserverModel

MODES = ("simulate", "analyze", "reproduce-paper", "montecarlo", "validate")
MODALITY_BLOCKS = {
    "position": BlockKind.POS_DISCRIM,
    "velocity": BlockKind.VEL_DISCRIM,
    "torque": BlockKind.TORQUE_DISCRIM,
}
_CHANNEL_KEYS = {f"{m}_{p}" for m in MODALITY_BLOCKS for p in ("sigma", "criterion")}
_OBSERVER_SCALARS = {
    f.name for f in dataclasses.fields(ObserverModel)
    if f.name not in MODALITY_BLOCKS and f.name != "rng_seed"
}
_PLANT_KEYS = {f.name: f.type for f in dataclasses.fields(PlantParams)}
_SESSION_KEYS = {
    "gauge_trials": int, "adjust_trials": int, "torque_tolerance_deg": float,
    "max_ignored": int, "limiter_margin_deg": float, "kettle_trials": int,
    "counterbalance_seed": int,
}
_PROFILE_KEYS = ("pron_limit_deg", "sup_limit_deg", "neutral_deg")


@dataclass
class RunConfig:
    mode: str = "reproduce-paper"
    seed: int = 0
    runs: int = 500
    participants: int = 11
    workers: int = 1
    modalities: tuple[str, ...] = ("position", "velocity", "torque")
    observer: dict[str, tuple[float, ...]] = field(default_factory=dict)
    plant: dict[str, float] = field(default_factory=dict)
    session: dict[str, float] = field(default_factory=dict)
    profile: dict[str, float] = field(default_factory=dict)
    input: Path | None = None
    out: Path = Path("wristsim-out")

    def plant_params(self) -> PlantParams:
        kw = {k: (int(v) if k == "encoder_counts_per_rev" else v) for k, v in self.plant.items()}
        return PlantParams(**kw)

    def session_config(self) -> SessionConfig:
        kw = {k: _SESSION_KEYS[k](v) for k, v in self.session.items()}
        return SessionConfig(plant=self.plant_params(), **kw)

    def mc_profile(self) -> ParticipantProfile:
        kw = {"pron_limit_deg": 55.0, "sup_limit_deg": -55.0, "neutral_deg": 0.0}
        kw.update(self.profile)
        return ParticipantProfile(pid=1, **kw)

    def observer_grid(self) -> list[dict[str, float]]:
        """Every combination of the observer axes (one empty point if none)."""
        keys = sorted(self.observer)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.observer[k] for k in keys))]

    def n_grid_points(self) -> int:
        return len(self.observer_grid())


def observer_from(point: dict[str, float], base: ObserverModel | None = None) -> ObserverModel:
    base = base or ObserverModel()
    kw: dict = {}
    for modality in MODALITY_BLOCKS:
        ch: Channel = getattr(base, modality)
        sigma = point.get(f"{modality}_sigma", ch.sigma)
        crit = point.get(f"{modality}_criterion", ch.criterion)
        if (sigma, crit) != (ch.sigma, ch.criterion):
            kw[modality] = Channel(sigma, crit)
    kw.update({k: v for k, v in point.items() if k in _OBSERVER_SCALARS})
    return dataclasses.replace(base, **kw)


def _number(raw: str, lineno: int, key: str, kind=float):
    try:
        return kind(raw)
    except ValueError:
        raise SchemaError(f"line {lineno}: {key}: expected {kind.__name__}, got {raw!r}") from None


def _scalar(values: list[str], lineno: int, key: str) -> str:
    if len(values) != 1:
        raise SchemaError(f"line {lineno}: {key} takes a single value")
    return values[0]


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = dataclasses.replace(base) if base else RunConfig()
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemaError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise SchemaError(f"line {lineno}: empty key or value")
        if key in seen:
            raise SchemaError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        values = [v.strip() for v in value.split(",")]
        if any(not v for v in values):
            raise SchemaError(f"line {lineno}: {key}: empty list element")
        prefix, _, name = key.partition(".")
        if key in ("seed", "runs", "participants", "workers"):
            n = _number(_scalar(values, lineno, key), lineno, key, int)
            if key != "seed" and n < 1:
                raise SchemaError(f"line {lineno}: {key} must be >= 1")
            setattr(cfg, key, n)
        elif key == "modalities":
            bad = [v for v in values if v not in MODALITY_BLOCKS]
            if bad:
                raise SchemaError(f"line {lineno}: unknown modality {bad[0]!r}")
            cfg.modalities = tuple(values)
        elif prefix == "observer" and (name in _CHANNEL_KEYS or name in _OBSERVER_SCALARS):
            cfg.observer = {**cfg.observer, name: tuple(_number(v, lineno, key) for v in values)}
        elif prefix == "plant" and name in _PLANT_KEYS:
            cfg.plant = {**cfg.plant, name: _number(_scalar(values, lineno, key), lineno, key)}
        elif prefix == "session" and name in _SESSION_KEYS:
            cfg.session = {**cfg.session, name: _number(_scalar(values, lineno, key), lineno, key,
                                                        _SESSION_KEYS[name])}
        elif prefix == "profile" and name in _PROFILE_KEYS:
            cfg.profile = {**cfg.profile, name: _number(_scalar(values, lineno, key), lineno, key)}
        else:
            raise SchemaError(f"line {lineno}: unknown key {key!r}")
    return cfg


def load_config(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return parse_config(text, base)
    except SchemaError as exc:
        raise SchemaError(f"{path}: {exc}") from None

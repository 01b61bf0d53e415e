"""Participant schema, reference stimuli and fixture I/O.

Degrees, degrees/second, millinewton-meters and seconds are the units
everywhere outside the plant integrator. Pronation is positive.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, SchemaError

POSITION_REF_FRACTION = 0.30
VELOCITY_REF_DPS = 60.0
TORQUE_REF_MNM = 500.0
WEBER_TOLERANCE = 0.02


@dataclass(frozen=True)
class ReferenceSet:
    pos_ref_deg: float
    vel_ref_dps: float
    torque_ref_mnm: float


def derive_reference_stimuli(crom: float) -> ReferenceSet:
    """Reference stimuli for the three discrimination blocks.

    Position reference is 30% of the comfortable range of motion in
    pronation; velocity and torque references are fixed.
    """
    if not (crom > 0 and math.isfinite(crom)):
        raise DomainError(f"cROM must be positive and finite, got {crom!r}")
    return ReferenceSet(POSITION_REF_FRACTION * crom, VELOCITY_REF_DPS, TORQUE_REF_MNM)


@dataclass(frozen=True)
class ParticipantRecord:
    pid: int
    age: float
    gender: str
    handedness_li: float
    emnsa: int
    fma_hw: int
    moca: int
    neutral_deg: float
    crom_deg: float
    meg_deg: float
    jndp_deg: float
    kp_pct: float
    jndv_dps: float
    kv_pct: float
    jndt_mnm: float
    kt_pct: float
    mep_deg: float
    mev_dps: float
    tk_s: float
    td_s: float


FIELD_NAMES: tuple[str, ...] = tuple(f.name for f in fields(ParticipantRecord))
INT_FIELDS = frozenset({"pid", "emnsa", "fma_hw", "moca"})
STR_FIELDS = frozenset({"gender"})
POSITIVE_MEASURES = (
    "meg_deg", "jndp_deg", "jndv_dps", "jndt_mnm", "mep_deg", "mev_dps", "tk_s", "td_s",
)

# display label -> record field, in the column order the correlation tables use
MEASURES: dict[str, str] = {
    "Handedness": "handedness_li",
    "emNSA": "emnsa",
    "FMA-HW": "fma_hw",
    "MoCA": "moca",
    "MEg": "meg_deg",
    "JNDp": "jndp_deg",
    "Kp": "kp_pct",
    "JNDv": "jndv_dps",
    "Kv": "kv_pct",
    "JNDt": "jndt_mnm",
    "Kt": "kt_pct",
    "MEp": "mep_deg",
    "MEv": "mev_dps",
    "Tk": "tk_s",
    "Td": "td_s",
    "Neutral": "neutral_deg",
    "cROM": "crom_deg",
    "Age": "age",
}
CORRELATION_MEASURES = (
    "Handedness", "emNSA", "FMA-HW", "MoCA", "MEg", "JNDp", "JNDv", "JNDt",
    "MEp", "MEv", "Tk", "Td",
)


@dataclass(frozen=True)
class Violation:
    field: str
    bound: str
    value: float

    def __str__(self) -> str:
        return f"{self.field}: {self.value!r} violates {self.bound}"


def weber_expected(rec: ParticipantRecord) -> dict[str, float]:
    """Weber fractions (%) implied by the record's JNDs and references."""
    refs = derive_reference_stimuli(rec.crom_deg) if rec.crom_deg > 0 else None
    pos_ref = refs.pos_ref_deg if refs else math.nan
    return {
        "kp_pct": 100.0 * rec.jndp_deg / pos_ref,
        "kv_pct": 100.0 * rec.jndv_dps / VELOCITY_REF_DPS,
        "kt_pct": 100.0 * rec.jndt_mnm / TORQUE_REF_MNM,
    }


def validate_participant(rec: ParticipantRecord) -> list[Violation]:
    out: list[Violation] = []

    def bounded(name: str, lo: float, hi: float) -> None:
        v = getattr(rec, name)
        if not (lo <= v <= hi):
            out.append(Violation(name, f"[{lo:g}, {hi:g}]", v))

    bounded("handedness_li", -100, 100)
    bounded("emnsa", 0, 8)
    bounded("fma_hw", 0, 30)
    bounded("moca", 0, 30)
    if not rec.crom_deg > 0:
        out.append(Violation("crom_deg", "> 0", rec.crom_deg))
    for name in POSITIVE_MEASURES:
        v = getattr(rec, name)
        if not v > 0:
            out.append(Violation(name, "> 0", v))
    if rec.crom_deg > 0:
        for name, expected in weber_expected(rec).items():
            actual = getattr(rec, name)
            if not abs(actual - expected) <= WEBER_TOLERANCE:
                out.append(Violation(
                    name, f"Weber consistency |{name} - {expected:.4f}| <= {WEBER_TOLERANCE}", actual))
    return out


def _parse_value(name: str, raw: str, line: int):
    raw = raw.strip()
    if name in STR_FIELDS:
        return raw
    try:
        if name in INT_FIELDS:
            return int(raw)
        return float(raw)
    except ValueError:
        raise SchemaError(f"line {line}: field {name!r} has non-numeric value {raw!r}") from None


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_participants(source: str | Path | io.TextIOBase) -> list[ParticipantRecord]:
    """Parse a participant table; the header must name every record field."""
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return read_participants(fh)
    reader = csv.DictReader(source)
    header = reader.fieldnames or []
    missing = [f for f in FIELD_NAMES if f not in header]
    if missing:
        raise SchemaError(f"missing column {missing[0]!r}" + (
            f" (and {len(missing) - 1} more)" if len(missing) > 1 else ""))
    records = []
    for row in reader:
        line = reader.line_num
        records.append(ParticipantRecord(
            **{f: _parse_value(f, row[f] or "", line) for f in FIELD_NAMES}))
    if not records:
        raise SchemaError("participant table has no rows")
    return records


def write_participants(records: Iterable[ParticipantRecord], dest: str | Path | io.TextIOBase) -> None:
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            write_participants(records, fh)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(FIELD_NAMES)
    for rec in records:
        row = asdict(rec)
        writer.writerow([_format_value(row[f]) for f in FIELD_NAMES])


def load_fixture() -> list[ParticipantRecord]:
    """The bundled 11-participant table (clinical, range-of-motion and robotic scores)."""
    text = resources.files("wristsim.data").joinpath("participants.csv").read_text()
    return read_participants(io.StringIO(text))


def columns(records: Sequence[ParticipantRecord], labels: Iterable[str]) -> dict[str, np.ndarray]:
    """Measure columns keyed by display label."""
    out = {}
    for label in labels:
        try:
            name = MEASURES[label]
        except KeyError:
            raise SchemaError(f"unknown measure {label!r}") from None
        out[label] = np.array([float(getattr(r, name)) for r in records])
    return out

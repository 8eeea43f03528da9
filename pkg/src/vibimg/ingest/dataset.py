"""Label schemes, dataset manifests and balanced train/test assembly."""

from __future__ import annotations

import enum
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..signal import (
    DEFAULT_SAMPLE_RATE_HZ,
    DEFAULT_SEGMENT_LENGTH,
    FAULT_DIAMETERS_IN,
    Condition,
    Segment,
    SignalRecord,
    segment_record,
)
from .mat import drive_end_variables, read_mat
from .readers import read_csv, read_raw_f64le


class Scheme(enum.Enum):
    FOUR_CLASS = "four"
    TEN_CLASS = "ten"

    @property
    def n_classes(self) -> int:
        return 4 if self is Scheme.FOUR_CLASS else 10

    @classmethod
    def parse(cls, text) -> "Scheme":
        if isinstance(text, Scheme):
            return text
        key = str(text).strip().lower()
        if key in ("four", "4", "fourclass"):
            return cls.FOUR_CLASS
        if key in ("ten", "10", "tenclass"):
            return cls.TEN_CLASS
        raise ValueError(f"unknown label scheme {text!r} (expected four|ten)")


@dataclass(frozen=True, order=True)
class FaultLabel:
    scheme: Scheme
    value: int

    def __post_init__(self):
        if not 1 <= self.value <= self.scheme.n_classes:
            raise ValueError(f"label {self.value} outside 1..{self.scheme.n_classes}")

    @property
    def index(self) -> int:
        """Zero-based class index used by the network."""
        return self.value - 1


_FOUR = {
    Condition.HEALTHY: 1,
    Condition.BALL: 2,
    Condition.INNER_RACE: 3,
    Condition.OUTER_RACE: 4,
}
_TEN_BASE = {Condition.BALL: 2, Condition.INNER_RACE: 5, Condition.OUTER_RACE: 8}


def diameter_rank(diameter: float) -> int:
    for i, d in enumerate(FAULT_DIAMETERS_IN):
        if math.isclose(diameter, d, abs_tol=1e-6):
            return i
    raise ValueError(f"unknown fault diameter {diameter!r} (expected one of {FAULT_DIAMETERS_IN})")


def label_for(condition: Condition, fault_diameter_in: float | None, scheme: Scheme) -> FaultLabel:
    if condition is not Condition.HEALTHY:
        if fault_diameter_in is None:
            raise ValueError(f"{condition.value} needs a fault diameter")
        rank = diameter_rank(fault_diameter_in)
    if scheme is Scheme.FOUR_CLASS:
        return FaultLabel(scheme, _FOUR[condition])
    if condition is Condition.HEALTHY:
        return FaultLabel(scheme, 1)
    return FaultLabel(scheme, _TEN_BASE[condition] + rank)


@dataclass(frozen=True)
class DatasetSplit:
    train: list
    test: list
    seed: int
    scheme: Scheme = Scheme.FOUR_CLASS

    def class_counts(self, part: str = "train") -> dict[int, int]:
        counts: dict[int, int] = defaultdict(int)
        for _, label in getattr(self, part):
            counts[label.value] += 1
        return dict(sorted(counts.items()))


def assemble_dataset(
    records,
    scheme: Scheme,
    segments_per_class_per_rpm: int = 120,
    seed: int = 0,
    *,
    rpms=None,
    segment_length: int = DEFAULT_SEGMENT_LENGTH,
    train_fraction: float = 0.8,
) -> DatasetSplit:
    """Build a class-balanced, seeded, stratified train/test split.

    Each (class, rpm) cell contributes exactly ``segments_per_class_per_rpm``
    segments. When several records feed one cell (the diameters of a fault
    location under the four-class scheme), segments are drawn from them in
    turn so every source is equally represented.
    """
    if segments_per_class_per_rpm < 1:
        raise ValueError("segments_per_class_per_rpm must be >= 1")
    frac = Fraction(train_fraction).limit_denominator(1000)
    if not 0 < frac < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)

    wanted_rpms = None if rpms is None else {int(r) for r in rpms}
    cells: dict[tuple[int, int], list[SignalRecord]] = defaultdict(list)
    for rec in records:
        if wanted_rpms is not None and rec.rpm not in wanted_rpms:
            continue
        label = label_for(rec.condition, rec.fault_diameter_in, scheme)
        cells[(label.value, rec.rpm)].append(rec)

    present_rpms = sorted(wanted_rpms if wanted_rpms is not None else {rpm for _, rpm in cells})
    if not present_rpms:
        raise ValueError("no records match the requested rpm subset")

    by_class: dict[int, list[Segment]] = defaultdict(list)
    deficits = []
    for cls in range(1, scheme.n_classes + 1):
        for rpm in present_rpms:
            sources = sorted(
                cells.get((cls, rpm), []),
                key=lambda r: (r.fault_diameter_in or 0.0),
            )
            pools = []
            for rec in sources:
                if len(rec) < segment_length:
                    continue
                segs = segment_record(rec, segment_length)
                pools.append([segs[i] for i in rng.permutation(len(segs))])
            available = sum(len(p) for p in pools)
            if available < segments_per_class_per_rpm:
                deficits.append(
                    f"class {cls} at {rpm} rpm: need {segments_per_class_per_rpm} segments, have {available}"
                )
                continue
            by_class[cls].extend(_interleave(pools)[:segments_per_class_per_rpm])
    if deficits:
        raise ValueError("insufficient segments: " + "; ".join(deficits))

    train, test = [], []
    for cls in sorted(by_class):
        items = by_class[cls]
        order = rng.permutation(len(items))
        n_train = math.ceil(len(items) * frac)
        label = FaultLabel(scheme, cls)
        train.extend((items[i], label) for i in order[:n_train])
        test.extend((items[i], label) for i in order[n_train:])
    train = [train[i] for i in rng.permutation(len(train))]
    test = [test[i] for i in rng.permutation(len(test))]
    return DatasetSplit(train, test, seed, scheme)


def _interleave(pools):
    out = []
    for i in range(max((len(p) for p in pools), default=0)):
        out.extend(p[i] for p in pools if i < len(p))
    return out


# -- manifests --------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    condition: Condition
    fault_diameter_in: float | None
    rpm: int

    def line(self, base: Path | None = None) -> str:
        p = self.path
        if base is not None:
            try:
                p = p.relative_to(base)
            except ValueError:
                pass
        dia = "" if self.fault_diameter_in is None else f"{self.fault_diameter_in:g}"
        return f"{p.as_posix()},{self.condition.value},{dia},{self.rpm}"


def parse_manifest(text: str, base: Path | None = None) -> list[ManifestEntry]:
    """Parse ``path,condition,diameter,rpm`` lines; ``#`` starts a comment."""
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise ValueError(f"manifest line {lineno}: expected 4 comma-separated fields, got {len(parts)}")
        path, cond, dia, rpm = parts
        if lineno == 1 and path.lower() == "path":
            continue
        try:
            condition = Condition.parse(cond)
            diameter = None if dia.lower() in ("", "nan", "-", "none") else float(dia)
            rpm_val = int(rpm)
        except ValueError as exc:
            raise ValueError(f"manifest line {lineno}: {exc}") from None
        p = Path(path)
        if base is not None and not p.is_absolute():
            p = base / p
        entries.append(ManifestEntry(p, condition, diameter, rpm_val))
    return entries


def read_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    return parse_manifest(path.read_text(), base=path.parent)


def write_manifest(path, entries) -> None:
    path = Path(path)
    path.write_text("".join(e.line(path.parent) + "\n" for e in entries))


def load_record(entry: ManifestEntry, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> SignalRecord:
    """Read the file behind a manifest entry, choosing the parser by suffix."""
    buf = entry.path.read_bytes()
    meta = dict(
        sample_rate_hz=sample_rate_hz,
        rpm=entry.rpm,
        condition=entry.condition,
        fault_diameter_in=entry.fault_diameter_in,
    )
    suffix = entry.path.suffix.lower()
    if suffix == ".mat":
        candidates = drive_end_variables(read_mat(buf))
        if not candidates:
            raise ValueError(f"{entry.path}: no *_DE_time variable found")
        if len(candidates) > 1:
            warnings.warn(f"{entry.path}: several drive-end variables, using {candidates[0].name}", stacklevel=2)
        return SignalRecord(candidates[0].data, **meta)
    if suffix in (".csv", ".txt"):
        try:
            return read_csv(buf, **meta)
        except ValueError as exc:
            raise ValueError(f"{entry.path}: {exc}") from None
    return read_raw_f64le(buf, **meta)


def load_manifest_records(path, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> list[SignalRecord]:
    return [load_record(e, sample_rate_hz) for e in read_manifest(path)]

"""Vibration records, segmentation, normalization and a synthetic bearing rig."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_SAMPLE_RATE_HZ = 12_000.0
DEFAULT_SEGMENT_LENGTH = 1000
MOTOR_SPEEDS_RPM = (1730, 1750, 1772, 1797)
FAULT_DIAMETERS_IN = (0.007, 0.014, 0.021)


class Condition(enum.Enum):
    HEALTHY = "Healthy"
    BALL = "Ball"
    INNER_RACE = "InnerRace"
    OUTER_RACE = "OuterRace"

    @classmethod
    def parse(cls, text: str) -> "Condition":
        key = text.strip().replace("_", "").replace(" ", "").lower()
        for cond in cls:
            if cond.value.lower() == key or cond.name.replace("_", "").lower() == key:
                return cond
        aliases = {"normal": cls.HEALTHY, "ir": cls.INNER_RACE, "or": cls.OUTER_RACE, "b": cls.BALL}
        if key in aliases:
            return aliases[key]
        raise ValueError(f"unknown condition {text!r}")


@dataclass(frozen=True)
class Provenance:
    """Where a record (and every segment cut from it) came from."""

    rpm: int
    condition: Condition
    fault_diameter_in: float | None = None
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self):
        if self.rpm <= 0:
            raise ValueError("rpm must be positive")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        healthy = self.condition is Condition.HEALTHY
        if healthy and self.fault_diameter_in is not None:
            raise ValueError("healthy records carry no fault diameter")
        if not healthy:
            if self.fault_diameter_in is None:
                raise ValueError(f"{self.condition.value} record needs a fault diameter")
            if self.fault_diameter_in < 0:
                raise ValueError("fault diameter must be >= 0")


@dataclass(frozen=True)
class SignalRecord:
    """One continuous accelerometer recording (units of g)."""

    samples: np.ndarray
    sample_rate_hz: float
    rpm: int
    condition: Condition
    fault_diameter_in: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if arr.size == 0:
            raise ValueError("record has no samples")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        # validates the metadata invariants
        self.provenance

    @property
    def provenance(self) -> Provenance:
        return Provenance(self.rpm, self.condition, self.fault_diameter_in, self.sample_rate_hz)

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class Segment:
    samples: np.ndarray
    source: Provenance
    index: int

    def __len__(self):
        return self.samples.size


def segment_record(record: SignalRecord, length: int = DEFAULT_SEGMENT_LENGTH) -> list[Segment]:
    """Cut a record into consecutive, non-overlapping windows.

    The trailing partial window is dropped, so a record of ``N`` samples
    yields ``N // length`` segments.
    """
    if length < 2:
        raise ValueError("segment length must be >= 2")
    n = len(record)
    if n < length:
        raise ValueError(f"insufficient samples: record has {n}, segment needs {length}")
    src = record.provenance
    count = n // length
    windows = record.samples[: count * length].reshape(count, length)
    return [Segment(windows[i], src, i) for i in range(count)]


def minmax_normalize(samples, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Affinely map ``[min, max]`` of ``samples`` onto ``[lo, hi]``.

    A constant input maps to ``lo`` everywhere.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot normalize an empty sequence")
    xmin = x.min()
    span = x.max() - xmin
    if span == 0:
        return np.full(x.shape, float(lo))
    # divide first: (hi - lo) / span overflows when span is subnormal
    out = lo + ((x - xmin) / span) * (hi - lo)
    # pin the extremes against rounding
    return np.clip(out, lo, hi)


# Characteristic defect frequencies of a 6205-2RS deep groove bearing,
# as multiples of shaft speed.
DEFECT_ORDERS = {
    Condition.BALL: 4.7135,
    Condition.INNER_RACE: 5.4152,
    Condition.OUTER_RACE: 3.5848,
}


@dataclass(frozen=True)
class SynthConfig:
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    rpm: float = 1797.0
    impulse_rate_hz: dict = field(default_factory=dict)
    ring_freq_hz: float = 3000.0
    ring_decay: float = 600.0
    impulse_amp: float = 1.0
    noise_sigma: float = 0.05
    seed: int = 0
    shaft_amp: float = 0.2
    reference_diameter_in: float = 0.007

    def __post_init__(self):
        if self.sample_rate_hz <= 0 or self.rpm <= 0 or self.ring_freq_hz <= 0:
            raise ValueError("rates must be positive")
        if self.ring_decay <= 0:
            raise ValueError("ring_decay must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")
        for cond, rate in self.impulse_rate_hz.items():
            if rate <= 0:
                raise ValueError(f"impulse rate for {cond} must be positive")

    @classmethod
    def for_rpm(cls, rpm: float, seed: int = 0, **kw) -> "SynthConfig":
        """Config whose impulse rates are the bearing's defect orders at ``rpm``."""
        shaft_hz = rpm / 60.0
        rates = {c: order * shaft_hz for c, order in DEFECT_ORDERS.items()}
        return cls(rpm=rpm, impulse_rate_hz=rates, seed=seed, **kw)

    def rate_for(self, condition: Condition) -> float:
        if condition in self.impulse_rate_hz:
            return self.impulse_rate_hz[condition]
        return DEFECT_ORDERS[condition] * self.rpm / 60.0


def synth_signal(
    config: SynthConfig,
    condition: Condition,
    duration_s: float,
    fault_diameter_in: float | None = None,
) -> SignalRecord:
    """Generate a synthetic drive-end vibration record.

    Every condition shares the same shaft sinusoid and noise draw for a given
    seed; faults add a train of exponentially decaying ring-downs whose
    spacing is the condition's impulse rate and whose amplitude scales
    linearly with the fault diameter.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    fs = config.sample_rate_hz
    n = int(round(duration_s * fs))
    if n < 1:
        raise ValueError("duration shorter than one sample")
    t = np.arange(n) / fs
    x = config.shaft_amp * np.sin(2 * np.pi * (config.rpm / 60.0) * t)
    if config.noise_sigma > 0:
        rng = np.random.default_rng(config.seed)
        x = x + rng.normal(0.0, config.noise_sigma, n)

    if condition is Condition.HEALTHY:
        fault_diameter_in = None
    else:
        if fault_diameter_in is None:
            fault_diameter_in = config.reference_diameter_in
        amp = config.impulse_amp * fault_diameter_in / config.reference_diameter_in
        if amp != 0:
            x = x + amp * _impulse_train(n, fs, config.rate_for(condition), config.ring_freq_hz, config.ring_decay)

    rpm = int(round(config.rpm))
    return SignalRecord(x, fs, rpm, condition, fault_diameter_in)


def _impulse_train(n, fs, rate_hz, ring_hz, decay):
    # each ring-down is cut once it has decayed below 1e-6
    tail = min(n, int(math.ceil(fs * math.log(1e6) / decay)) + 1)
    tau = np.arange(tail) / fs
    kernel = np.exp(-decay * tau) * np.sin(2 * np.pi * ring_hz * tau)
    out = np.zeros(n)
    period = fs / rate_hz
    k = 0
    while True:
        start = int(round(k * period))
        if start >= n:
            break
        stop = min(n, start + tail)
        out[start:stop] += kernel[: stop - start]
        k += 1
    return out

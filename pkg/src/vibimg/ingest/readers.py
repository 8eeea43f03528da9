from __future__ import annotations

import numpy as np

from ..signal import DEFAULT_SAMPLE_RATE_HZ, Condition, SignalRecord


def read_csv(
    buf: bytes,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    rpm: int = 1797,
    condition: Condition = Condition.HEALTHY,
    fault_diameter_in: float | None = None,
) -> SignalRecord:
    """Parse one real value per line. A non-numeric first line is a header."""
    text = buf.decode("ascii") if isinstance(buf, (bytes, bytearray)) else buf
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            if lineno == 1:
                continue
            raise ValueError(f"line {lineno}: cannot parse {line!r} as a number") from None
    if not values:
        raise ValueError("CSV contains no samples")
    return SignalRecord(np.array(values), sample_rate_hz, rpm, condition, fault_diameter_in)


def read_raw_f64le(
    buf: bytes,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    rpm: int = 1797,
    condition: Condition = Condition.HEALTHY,
    fault_diameter_in: float | None = None,
) -> SignalRecord:
    if len(buf) % 8:
        raise ValueError(f"raw stream length {len(buf)} is not a multiple of 8 bytes")
    samples = np.frombuffer(buf, dtype="<f8").astype(np.float64)
    return SignalRecord(samples, sample_rate_hz, rpm, condition, fault_diameter_in)


def write_raw_f64le(samples) -> bytes:
    return np.asarray(samples, dtype="<f8").tobytes()

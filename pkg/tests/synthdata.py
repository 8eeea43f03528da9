"""Synthetic bearing records shared by the harness-level tests."""

import numpy as np

from vibimg.cli import synth_plan
from vibimg.signal import DEFAULT_SAMPLE_RATE_HZ, SynthConfig, synth_signal


def synth_records(classes=4, rpms=(1797,), segments=120, seed=0, noise=0.05):
    """One record per (rpm, class row), long enough for ``segments`` 1000-sample windows."""
    duration = segments * 1000 / DEFAULT_SAMPLE_RATE_HZ
    records = []
    for i, (rpm, (cond, dia)) in enumerate((r, row) for r in rpms for row in synth_plan(classes)):
        file_seed = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        cfg = SynthConfig.for_rpm(rpm, seed=file_seed, noise_sigma=noise)
        records.append(synth_signal(cfg, cond, duration, dia))
    return records

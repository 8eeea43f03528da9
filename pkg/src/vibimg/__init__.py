"""Bearing vibration segments to images, a small CNN classifier, and latency accounting."""

from .encoders import EncodedImage, Method, encode
from .signal import Condition, Segment, SignalRecord, SynthConfig, segment_record, synth_signal

__version__ = "0.1.0"

__all__ = [
    "Condition",
    "EncodedImage",
    "Method",
    "Segment",
    "SignalRecord",
    "SynthConfig",
    "encode",
    "segment_record",
    "synth_signal",
]

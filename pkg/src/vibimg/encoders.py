"""Time-series to image encodings.

Five encodings turn a vibration segment into a square image:

* pixel strength: the first ``M*M`` samples, scaled to [0, 1], laid out row-major
* GASF: Gramian angular summation field, ``cos(phi_i + phi_j)``
* MTF: Markov transition field over quantile bins
* recurrence plot: unthresholded pairwise distances ``|x_i - x_j|``
* GAF-MTF: GASF and MTF stacked as two channels

All arithmetic is float64. ``EncodedImage.as_input`` hands the network float32.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass

import numpy as np

from .signal import Segment, minmax_normalize


class Method(enum.Enum):
    PIXEL = "pixel"
    GASF = "gasf"
    MTF = "mtf"
    RECURRENCE = "rp"
    GAF_MTF = "gafmtf"

    @classmethod
    def parse(cls, text) -> "Method":
        if isinstance(text, Method):
            return text
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            valid = "|".join(m.value for m in cls)
            raise ValueError(f"unknown encoding method {text!r} (valid: {valid})") from None

    @property
    def default_side(self) -> int:
        return 31 if self is Method.PIXEL else 256

    @property
    def channels(self) -> int:
        return 2 if self is Method.GAF_MTF else 1


DEFAULT_MTF_BINS = 8


@dataclass(frozen=True, eq=False)
class EncodedImage:
    data: np.ndarray  # (channels, side, side) float64
    method: Method
    encode_time_ns: int = 0

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def side(self) -> int:
        return self.data.shape[1]

    @property
    def encode_time_ms(self) -> float:
        return self.encode_time_ns / 1e6

    def as_input(self) -> np.ndarray:
        return self.data.astype(np.float32)


def _samples(segment) -> np.ndarray:
    if isinstance(segment, Segment):
        return segment.samples
    return np.asarray(segment, dtype=np.float64).reshape(-1)


def select_window(samples, n: int, window: str = "prefix") -> np.ndarray:
    """Pick ``n`` samples from a segment, either the leading ones or evenly spaced ones."""
    x = _samples(samples)
    if n < 1:
        raise ValueError("image side must be positive")
    if x.size < n:
        raise ValueError(f"segment has {x.size} samples, encoding needs {n}")
    if window == "prefix":
        return x[:n]
    if window == "decimate":
        idx = np.round(np.linspace(0, x.size - 1, n)).astype(np.intp)
        return x[idx]
    raise ValueError(f"unknown window mode {window!r}")


# -- kernels (no timing, no wrapping) --------------------------------------


def pixel_strength_matrix(x: np.ndarray, side: int) -> np.ndarray:
    return minmax_normalize(x, 0.0, 1.0).reshape(side, side)


def gasf_matrix(x: np.ndarray) -> np.ndarray:
    # cos(a+b) = cos a cos b - sin a sin b with cos(phi) = x, sin(phi) = sqrt(1-x^2)
    u = minmax_normalize(x, -1.0, 1.0)
    s = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
    return np.clip(np.outer(u, u) - np.outer(s, s), -1.0, 1.0)


def quantile_states(x: np.ndarray, bins: int) -> np.ndarray:
    """Assign each sample a quantile bin in ``0..bins-1``.

    A sample's bin is the number of interior quantile edges strictly below it,
    so a constant series lands entirely in bin 0.
    """
    if bins < 2:
        raise ValueError("MTF needs at least 2 bins")
    edges = np.quantile(x, np.arange(1, bins) / bins)
    return np.searchsorted(edges, x, side="left")


def transition_matrix(states: np.ndarray, bins: int) -> np.ndarray:
    """Row-stochastic first-order transition matrix; empty rows are uniform."""
    counts = np.zeros((bins, bins))
    np.add.at(counts, (states[:-1], states[1:]), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    uniform = np.full_like(counts, 1.0 / bins)
    return np.divide(counts, totals, out=uniform, where=totals > 0)


def mtf_matrix(x: np.ndarray, bins: int = DEFAULT_MTF_BINS, pool: int = 1) -> np.ndarray:
    states = quantile_states(x, bins)
    w = transition_matrix(states, bins)
    img = w[states[:, None], states[None, :]]
    if pool > 1:
        img = mean_pool(img, pool)
    return img


def mean_pool(img: np.ndarray, k: int) -> np.ndarray:
    """Non-overlapping ``k x k`` block averages; edge rows/cols that do not fill a block are dropped."""
    m = img.shape[0] // k
    if m == 0:
        raise ValueError(f"pool size {k} larger than image side {img.shape[0]}")
    return img[: m * k, : m * k].reshape(m, k, m, k).mean(axis=(1, 3))


def recurrence_matrix(x: np.ndarray) -> np.ndarray:
    r = np.abs(x[:, None] - x[None, :])
    peak = r.max()
    if peak == 0:
        return np.zeros_like(r)
    return r / peak


# -- timed encoders -------------------------------------------------------


def encode_pixel_strength(segment, side: int = 31) -> EncodedImage:
    t0 = time.perf_counter_ns()
    x = select_window(segment, side * side)
    img = pixel_strength_matrix(x, side)
    elapsed = time.perf_counter_ns() - t0
    return EncodedImage(img[None], Method.PIXEL, elapsed)


def encode_gasf(segment, side: int = 256, window: str = "prefix") -> EncodedImage:
    t0 = time.perf_counter_ns()
    img = gasf_matrix(select_window(segment, side, window))
    elapsed = time.perf_counter_ns() - t0
    return EncodedImage(img[None], Method.GASF, elapsed)


def encode_mtf(
    segment,
    side: int = 256,
    bins: int = DEFAULT_MTF_BINS,
    window: str = "prefix",
    pool: int = 1,
) -> EncodedImage:
    t0 = time.perf_counter_ns()
    img = mtf_matrix(select_window(segment, side, window), bins, pool)
    elapsed = time.perf_counter_ns() - t0
    return EncodedImage(img[None], Method.MTF, elapsed)


def encode_recurrence(segment, side: int = 256, window: str = "prefix") -> EncodedImage:
    t0 = time.perf_counter_ns()
    img = recurrence_matrix(select_window(segment, side, window))
    elapsed = time.perf_counter_ns() - t0
    return EncodedImage(img[None], Method.RECURRENCE, elapsed)


def encode_gaf_mtf(
    segment,
    side: int = 256,
    bins: int = DEFAULT_MTF_BINS,
    window: str = "prefix",
) -> EncodedImage:
    t0 = time.perf_counter_ns()
    x = select_window(segment, side, window)
    img = np.stack([gasf_matrix(x), mtf_matrix(x, bins)])
    elapsed = time.perf_counter_ns() - t0
    return EncodedImage(img, Method.GAF_MTF, elapsed)


def encode(segment, method, side: int | None = None, *, bins: int = DEFAULT_MTF_BINS, window: str = "prefix") -> EncodedImage:
    method = Method.parse(method)
    side = method.default_side if side is None else side
    if method is Method.PIXEL:
        return encode_pixel_strength(segment, side)
    if method is Method.GASF:
        return encode_gasf(segment, side, window)
    if method is Method.MTF:
        return encode_mtf(segment, side, bins, window)
    if method is Method.RECURRENCE:
        return encode_recurrence(segment, side, window)
    return encode_gaf_mtf(segment, side, bins, window)


def encode_batch(segments, method, side: int | None = None, **kw) -> tuple[np.ndarray, np.ndarray]:
    """Encode many segments; returns a float32 ``(N, C, M, M)`` stack and per-item encode times (ns)."""
    images = [encode(s, method, side, **kw) for s in segments]
    if not images:
        raise ValueError("nothing to encode")
    x = np.stack([im.as_input() for im in images])
    times = np.array([im.encode_time_ns for im in images], dtype=np.int64)
    return x, times


# -- pixel export helpers ---------------------------------------------------


def quantize(values) -> np.ndarray:
    """Map [0, 1] reals to 0..255 by rounding."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.rint(v * 255.0).astype(np.uint8)


def dequantize(levels) -> np.ndarray:
    return np.asarray(levels, dtype=np.float64) / 255.0


def to_unit_range(img: np.ndarray, method: Method) -> np.ndarray:
    """Rescale a channel to [0, 1] for grayscale export (GASF lives in [-1, 1])."""
    if method in (Method.GASF, Method.GAF_MTF):
        return (img + 1.0) / 2.0
    return img


# -- recurrence quantification -------------------------------------------


@dataclass(frozen=True)
class RqaSummary:
    recurrence_rate: float
    determinism: float
    laminarity: float
    max_diagonal: int
    entropy: float


def _runs(line: np.ndarray) -> list[int]:
    """Lengths of consecutive True runs in a boolean vector."""
    if line.size == 0:
        return []
    padded = np.concatenate(([False], line, [False])).astype(np.int8)
    d = np.diff(padded)
    starts = np.flatnonzero(d == 1)
    stops = np.flatnonzero(d == -1)
    return (stops - starts).tolist()


def rqa_summary(recurrence: EncodedImage, epsilon: float = 0.1, l_min: int = 2) -> RqaSummary:
    """Recurrence quantification measures of a thresholded recurrence plot.

    The main diagonal (trivial self-recurrence) is excluded from every
    measure. DET and LAM are the shares of off-diagonal recurrence points that
    sit on diagonal / vertical lines of at least ``l_min`` points; ENT is the
    natural-log Shannon entropy of the length histogram of those diagonal lines.
    """
    if recurrence.method is not Method.RECURRENCE:
        raise ValueError(f"rqa_summary needs a recurrence plot, got {recurrence.method.value}")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if l_min < 2:
        raise ValueError("l_min must be >= 2")
    b = recurrence.data[0] <= epsilon
    m = b.shape[0]
    np.fill_diagonal(b, False)
    points = int(b.sum())
    rr = points / (m * m - m) if m > 1 else 0.0

    diag_lengths = []
    for k in range(1, m):
        diag_lengths += _runs(np.diagonal(b, k))
        diag_lengths += _runs(np.diagonal(b, -k))
    vert_lengths = []
    for j in range(m):
        vert_lengths += _runs(b[:, j])

    long_diag = [n for n in diag_lengths if n >= l_min]
    long_vert = [n for n in vert_lengths if n >= l_min]
    det = sum(long_diag) / points if points else 0.0
    lam = sum(long_vert) / points if points else 0.0
    lmax = max(diag_lengths, default=0)

    ent = 0.0
    if long_diag:
        _, counts = np.unique(long_diag, return_counts=True)
        p = counts / counts.sum()
        ent = float(-(p * np.log(p)).sum())
    return RqaSummary(rr, det, lam, lmax, ent)


def rqa_features(recurrence: EncodedImage, epsilon: float = 0.1, l_min: int = 2) -> dict[str, float]:
    s = rqa_summary(recurrence, epsilon, l_min)
    return {"RR": s.recurrence_rate, "DET": s.determinism, "LAM": s.laminarity, "Lmax": s.max_diagonal, "ENT": s.entropy}


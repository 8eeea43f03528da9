"""Confusion matrices, classification metrics, latency statistics and the
experiment harness that ties ingest, encoding and the network together."""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, field

import numpy as np

from .encoders import DEFAULT_MTF_BINS, Method, encode, encode_batch
from .ingest import Scheme, assemble_dataset
from .nn import ArchConfig, CnnModel, build_model, predict, train


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray  # rows: true class, columns: predicted class

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        if self.total == 0:
            raise ValueError("accuracy is undefined for an empty confusion matrix")
        return float(np.trace(self.counts)) / self.total

    def to_csv(self, labels=None) -> str:
        """Rows are true classes, columns predictions; ``labels`` default to 1..n."""
        labels = list(labels) if labels is not None else list(range(1, self.n_classes + 1))
        buf = io.StringIO()
        buf.write("true\\pred," + ",".join(str(lab) for lab in labels) + "\n")
        for lab, row in zip(labels, self.counts):
            buf.write(f"{lab}," + ",".join(str(int(v)) for v in row) + "\n")
        return buf.getvalue()


def confusion_from(preds, labels, n: int) -> ConfusionMatrix:
    p = np.asarray(preds, dtype=np.int64).reshape(-1)
    t = np.asarray(labels, dtype=np.int64).reshape(-1)
    if p.shape != t.shape:
        raise ValueError(f"{p.size} predictions but {t.size} labels")
    if p.size and (min(p.min(), t.min()) < 0 or max(p.max(), t.max()) >= n):
        raise ValueError(f"class ids must lie in 0..{n - 1}")
    counts = np.zeros((n, n), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    # (metric name, class index) pairs whose denominator was zero and were reported as 0
    undefined: tuple[tuple[str, int], ...] = ()

    @property
    def macro_f1(self) -> float:
        return float(np.mean(self.f1))


def metrics_from(cm: ConfusionMatrix) -> Metrics:
    if cm.total == 0:
        raise ValueError("no samples in confusion matrix")
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    undefined = []
    precision, recall, f1 = [], [], []
    for c in range(cm.n_classes):
        if col[c] > 0:
            p = tp[c] / col[c]
        else:
            p = 0.0
            undefined.append(("precision", c))
        if row[c] > 0:
            r = tp[c] / row[c]
        else:
            r = 0.0
            undefined.append(("recall", c))
        if p + r > 0:
            f = 2 * p * r / (p + r)
        else:
            f = 0.0
            undefined.append(("f1", c))
        precision.append(float(p))
        recall.append(float(r))
        f1.append(float(f))
    return Metrics(cm.accuracy, tuple(precision), tuple(recall), tuple(f1), tuple(undefined))


# -- timing -----------------------------------------------------------------


@dataclass(frozen=True)
class TimingStats:
    mean_ns: float
    median_ns: float
    p95_ns: float

    @classmethod
    def of(cls, samples_ns) -> "TimingStats":
        a = np.asarray(samples_ns, dtype=np.float64)
        if a.size == 0:
            raise ValueError("no timing samples")
        return cls(float(a.mean()), float(np.median(a)), float(np.percentile(a, 95)))

    @property
    def mean_ms(self) -> float:
        return self.mean_ns / 1e6

    @property
    def median_ms(self) -> float:
        return self.median_ns / 1e6


@dataclass(frozen=True, eq=False)
class TimingReport:
    encode_ns: np.ndarray
    infer_ns: np.ndarray

    def __post_init__(self):
        if np.shape(self.encode_ns) != np.shape(self.infer_ns):
            raise ValueError("encode and inference timings must pair up")

    @property
    def total_ns(self) -> np.ndarray:
        return np.asarray(self.encode_ns, dtype=np.int64) + np.asarray(self.infer_ns, dtype=np.int64)

    @property
    def n(self) -> int:
        return len(self.encode_ns)

    @property
    def encode(self) -> TimingStats:
        return TimingStats.of(self.encode_ns)

    @property
    def inference(self) -> TimingStats:
        return TimingStats.of(self.infer_ns)

    @property
    def total(self) -> TimingStats:
        return TimingStats.of(self.total_ns)


TIMING_CSV_HEADER = "method,encode_ms,infer_ms,total_ms"


def timing_csv_row(method, timing: TimingReport) -> str:
    """Median per-sample latencies in milliseconds."""
    name = Method.parse(method).value
    return f"{name},{timing.encode.median_ms:.2f},{timing.inference.median_ms:.2f},{timing.total.median_ms:.2f}"


# -- experiments --------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    method: Method = Method.PIXEL
    side: int | None = None
    scheme: Scheme = Scheme.FOUR_CLASS
    rpms: tuple[int, ...] | None = None
    seed: int = 0
    epochs: int = 150
    batch_size: int = 64
    segments_per_class_per_rpm: int = 120
    lr: float = 1e-3
    bins: int = DEFAULT_MTF_BINS
    window: str = "prefix"
    arch: ArchConfig = ArchConfig()

    @property
    def image_side(self) -> int:
        return self.method.default_side if self.side is None else self.side

    def metadata(self) -> dict[str, str]:
        return {
            "method": self.method.value,
            "image_side": str(self.image_side),
            "scheme": self.scheme.value,
            "rpm": "all" if self.rpms is None else "+".join(str(r) for r in self.rpms),
            "seed": str(self.seed),
            "epochs": str(self.epochs),
            "batch_size": str(self.batch_size),
            "segments_per_class_per_rpm": str(self.segments_per_class_per_rpm),
        }


class StageError(RuntimeError):
    """Failure inside one experiment stage; the original exception is ``__cause__``."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


class _stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, typ, exc, tb):
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, Exception):
            raise StageError(self.name, exc) from exc
        return False


@dataclass(eq=False)
class EvalReport:
    confusion: ConfusionMatrix
    metrics: Metrics
    timing: TimingReport
    metadata: dict[str, str] = field(default_factory=dict)
    train_time_s: float | None = None
    param_count: int | None = None

    @property
    def accuracy(self) -> float:
        return self.metrics.accuracy

    def to_text(self) -> str:
        """Plain ``key=value`` lines."""
        m = self.metrics
        t = self.timing
        rows = dict(self.metadata)
        rows["test_samples"] = str(self.confusion.total)
        rows["accuracy"] = f"{m.accuracy:.6f}"
        rows["macro_f1"] = f"{m.macro_f1:.6f}"
        for c in range(self.confusion.n_classes):
            rows[f"class_{c + 1}.precision"] = f"{m.precision[c]:.6f}"
            rows[f"class_{c + 1}.recall"] = f"{m.recall[c]:.6f}"
            rows[f"class_{c + 1}.f1"] = f"{m.f1[c]:.6f}"
        if m.undefined:
            rows["undefined_metrics"] = ";".join(f"{name}@{c + 1}" for name, c in m.undefined)
        if self.param_count is not None:
            rows["trainable_parameters"] = str(self.param_count)
        if self.train_time_s is not None:
            rows["train_time_s"] = f"{self.train_time_s:.2f}"
        for name, stats in (("encode", t.encode), ("infer", t.inference), ("total", t.total)):
            rows[f"{name}_ms.mean"] = f"{stats.mean_ns / 1e6:.2f}"
            rows[f"{name}_ms.median"] = f"{stats.median_ns / 1e6:.2f}"
            rows[f"{name}_ms.p95"] = f"{stats.p95_ns / 1e6:.2f}"
        return "".join(f"{k}={v}\n" for k, v in rows.items())

    def deterministic_view(self) -> dict:
        """Everything except wall-clock measurements."""
        return {
            "metadata": dict(self.metadata),
            "counts": self.confusion.counts.tolist(),
            "metrics": self.metrics,
            "param_count": self.param_count,
            "n_timed": self.timing.n,
        }


@dataclass(eq=False)
class ExperimentResult:
    report: EvalReport
    model: CnnModel
    train_log: list


def evaluate_model(model: CnnModel, split_items, config: ExperimentConfig, metadata=None) -> EvalReport:
    """Encode and classify every item one at a time, timing both stages."""
    preds, truth, enc_ns, inf_ns = [], [], [], []
    with _stage("evaluate"):
        for seg, label in split_items:
            image = encode(seg, config.method, config.image_side, bins=config.bins, window=config.window)
            pred = predict(model, image)
            preds.append(pred.class_index)
            truth.append(label.index)
            enc_ns.append(image.encode_time_ns)
            inf_ns.append(pred.inference_time_ns)
        cm = confusion_from(preds, truth, model.num_classes)
        metrics = metrics_from(cm)
    timing = TimingReport(np.array(enc_ns, dtype=np.int64), np.array(inf_ns, dtype=np.int64))
    meta = config.metadata() if metadata is None else metadata
    return EvalReport(cm, metrics, timing, meta, param_count=model.param_count)


def run_experiment(config: ExperimentConfig, records, progress=None) -> ExperimentResult:
    """Assemble, encode, train and evaluate one configuration."""
    with _stage("assemble"):
        split = assemble_dataset(records, config.scheme, config.segments_per_class_per_rpm, config.seed, rpms=config.rpms)
    with _stage("encode"):
        x_train, _ = encode_batch(
            [s for s, _ in split.train], config.method, config.image_side, bins=config.bins, window=config.window
        )
        y_train = np.array([lab.index for _, lab in split.train])
    with _stage("train"):
        model = build_model(x_train.shape[1:], config.scheme.n_classes, config.arch, seed=config.seed)
        t0 = time.perf_counter()
        result = train(model, x_train, y_train, config.epochs, config.batch_size, config.seed, config.lr, progress)
        train_time = time.perf_counter() - t0
    report = evaluate_model(result.model, split.test, config)
    report.train_time_s = train_time
    return ExperimentResult(report, result.model, result.log)


def bench_single(
    model: CnnModel,
    segment,
    method,
    side: int | None = None,
    repeats: int = 100,
    warmup: int = 10,
    bins: int = DEFAULT_MTF_BINS,
    window: str = "prefix",
) -> TimingReport:
    """Single-image latency: encode then classify, ``repeats`` times after ``warmup`` discarded runs."""
    method = Method.parse(method)
    side = method.default_side if side is None else side
    expected = (method.channels, side, side)
    if model.input_shape != expected:
        raise ValueError(f"model expects {model.input_shape}, {method.value} at side {side} gives {expected}")
    if repeats < 1 or warmup < 0:
        raise ValueError("repeats must be >= 1 and warmup >= 0")
    enc, inf = [], []
    for i in range(warmup + repeats):
        image = encode(segment, method, side, bins=bins, window=window)
        pred = predict(model, image)
        if i >= warmup:
            enc.append(image.encode_time_ns)
            inf.append(pred.inference_time_ns)
    return TimingReport(np.array(enc, dtype=np.int64), np.array(inf, dtype=np.int64))

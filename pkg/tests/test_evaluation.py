import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthdata import synth_records
from vibimg.encoders import Method
from vibimg.evaluation import (
    TIMING_CSV_HEADER,
    ConfusionMatrix,
    ExperimentConfig,
    StageError,
    TimingReport,
    bench_single,
    confusion_from,
    metrics_from,
    run_experiment,
    timing_csv_row,
)
from vibimg.ingest import Scheme
from vibimg.nn import ArchConfig, build_model

SMALL_ARCH = ArchConfig(conv_channels=(4, 8, 8), hidden=(32,))


def test_confusion_example():
    cm = confusion_from([0, 1, 1], [0, 1, 0], 2)
    assert cm.counts.tolist() == [[1, 1], [0, 1]]
    assert cm.accuracy == pytest.approx(2 / 3, abs=1e-15)


def test_metrics_fixture_exact():
    m = metrics_from(ConfusionMatrix(np.array([[1, 1], [0, 1]])))
    assert m.precision == (1.0, 0.5)
    assert m.recall == (0.5, 1.0)
    assert m.f1 == pytest.approx((2 / 3, 2 / 3), abs=1e-15)
    assert m.accuracy == pytest.approx(2 / 3, abs=1e-15)
    assert m.undefined == ()


def test_perfect_diagonal():
    cm = confusion_from([0, 1, 2, 2], [0, 1, 2, 2], 3)
    assert cm.counts.tolist() == [[1, 0, 0], [0, 1, 0], [0, 0, 2]]
    m = metrics_from(cm)
    assert m.accuracy == 1.0 and set(m.precision + m.recall + m.f1) == {1.0}


def test_empty_confusion():
    cm = confusion_from([], [], 3)
    assert not cm.counts.any()
    with pytest.raises(ValueError):
        cm.accuracy
    with pytest.raises(ValueError):
        metrics_from(cm)


def test_absent_class_flagged():
    m = metrics_from(confusion_from([0, 0, 1], [0, 0, 1], 3))
    assert m.recall[2] == 0.0 and m.precision[2] == 0.0
    assert ("recall", 2) in m.undefined and ("precision", 2) in m.undefined


def test_confusion_errors():
    with pytest.raises(ValueError):
        confusion_from([0, 1], [0], 2)
    with pytest.raises(ValueError):
        confusion_from([0, 2], [0, 1], 2)


def test_confusion_csv():
    text = ConfusionMatrix(np.array([[1, 1], [0, 1]])).to_csv()
    assert text == "true\\pred,1,2\n1,1,1\n2,0,1\n"


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 6), size=st.integers(1, 80))
def test_metric_invariants(seed, n, size):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, n, size)
    preds = np.where(rng.random(size) < 0.6, labels, rng.integers(0, n, size))
    cm = confusion_from(preds, labels, n)
    assert cm.total == size
    np.testing.assert_array_equal(cm.counts.sum(axis=1), np.bincount(labels, minlength=n))
    m = metrics_from(cm)
    assert m.accuracy == pytest.approx(np.trace(cm.counts) / size, abs=1e-12)
    assert 0.0 <= m.macro_f1 <= 1.0


def test_timing_report_and_csv():
    t = TimingReport(np.array([1_000_000, 3_000_000, 2_000_000]), np.array([500_000, 500_000, 700_000]))
    np.testing.assert_array_equal(t.total_ns, [1_500_000, 3_500_000, 2_700_000])
    assert timing_csv_row("pixel", t) == "pixel,2.00,0.50,2.70"
    assert TIMING_CSV_HEADER == "method,encode_ms,infer_ms,total_ms"
    with pytest.raises(ValueError):
        TimingReport(np.zeros(2), np.zeros(3))


@pytest.fixture(scope="module")
def records():
    return synth_records(classes=4, rpms=(1797,), segments=30, seed=1)


def test_run_experiment_deterministic(records):
    cfg = ExperimentConfig(method=Method.PIXEL, epochs=3, batch_size=16, segments_per_class_per_rpm=20, seed=2, arch=SMALL_ARCH)
    a = run_experiment(cfg, records)
    b = run_experiment(cfg, records)
    assert a.report.deterministic_view() == b.report.deterministic_view()
    assert a.report.confusion.total == 16  # 4 classes x 20 segments x 20 %
    assert set(a.report.confusion.counts.sum(axis=1).tolist()) == {4}
    text = a.report.to_text()
    assert "accuracy=" in text and "method=pixel" in text and "encode_ms.median=" in text
    assert a.report.timing.n == 16


def test_run_experiment_stage_errors(records):
    cfg = ExperimentConfig(epochs=1, segments_per_class_per_rpm=500)
    with pytest.raises(StageError) as info:
        run_experiment(cfg, records)
    assert info.value.stage == "assemble" and "insufficient segments" in str(info.value)
    cfg = ExperimentConfig(epochs=1, segments_per_class_per_rpm=10, rpms=(1730,))
    with pytest.raises(StageError):
        run_experiment(cfg, records)


def test_bench_additivity_and_shape_check(records):
    model = build_model((1, 31, 31), 4, SMALL_ARCH)
    seg = records[0].samples[:1000]
    t = bench_single(model, seg, "pixel", repeats=20, warmup=3)
    assert t.n == 20
    np.testing.assert_array_equal(t.total_ns, t.encode_ns + t.infer_ns)
    assert np.all(t.encode_ns > 0) and np.all(t.infer_ns > 0)
    with pytest.raises(ValueError, match="model expects"):
        bench_single(model, seg, "gasf", repeats=1)


def test_gafmtf_encodes_slower_than_gasf(records):
    seg = records[1].samples[:1000]
    gasf = bench_single(build_model((1, 64, 64), 4, SMALL_ARCH), seg, Method.GASF, side=64, repeats=40, warmup=5)
    both = bench_single(build_model((2, 64, 64), 4, SMALL_ARCH), seg, Method.GAF_MTF, side=64, repeats=40, warmup=5)
    assert both.encode.median_ns >= gasf.encode.median_ns


def test_bench_medians_stable(records):
    model = build_model((1, 31, 31), 4, SMALL_ARCH)
    seg = records[2].samples[:1000]
    medians = [bench_single(model, seg, "pixel", repeats=50, warmup=5).total.median_ns for _ in range(3)]
    assert min(medians) > 0
    assert np.std(medians) / np.mean(medians) < 0.5

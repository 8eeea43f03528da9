import itertools
from collections import Counter

import numpy as np
import pytest

from vibimg.ingest import (
    FaultLabel,
    ManifestEntry,
    Scheme,
    assemble_dataset,
    label_for,
    load_manifest_records,
    parse_manifest,
    read_csv,
    read_raw_f64le,
    write_manifest,
    write_raw_f64le,
)
from vibimg.signal import FAULT_DIAMETERS_IN, Condition, SignalRecord

FAULTS = (Condition.BALL, Condition.INNER_RACE, Condition.OUTER_RACE)
TABLE_ROWS = [(Condition.HEALTHY, None)] + [(c, d) for c in FAULTS for d in FAULT_DIAMETERS_IN]


def test_read_csv():
    rec = read_csv(b"1.0\n2.0\n")
    assert rec.samples.tolist() == [1.0, 2.0]


def test_read_csv_header_and_crlf():
    rec = read_csv(b"accel\r\n0.5\r\n-0.25\r\n", 48000.0, 1750, Condition.BALL, 0.021)
    assert rec.samples.tolist() == [0.5, -0.25]
    assert rec.sample_rate_hz == 48000.0 and rec.rpm == 1750 and rec.fault_diameter_in == 0.021


def test_read_csv_bad_line():
    with pytest.raises(ValueError, match="line 2"):
        read_csv(b"1.0\nabc\n")


def test_read_raw():
    rec = read_raw_f64le(np.array([0.0, 1.0], dtype="<f8").tobytes())
    assert rec.samples.tolist() == [0.0, 1.0]
    assert write_raw_f64le(rec.samples) == np.array([0.0, 1.0], dtype="<f8").tobytes()


def test_read_raw_bad_length():
    with pytest.raises(ValueError, match="multiple of 8"):
        read_raw_f64le(b"\0" * 12)


@pytest.mark.parametrize(
    "condition, diameter, scheme, expected",
    [
        (Condition.INNER_RACE, 0.014, Scheme.TEN_CLASS, 6),
        (Condition.HEALTHY, None, Scheme.FOUR_CLASS, 1),
        (Condition.OUTER_RACE, 0.021, Scheme.FOUR_CLASS, 4),
        (Condition.BALL, 0.007, Scheme.TEN_CLASS, 2),
        (Condition.OUTER_RACE, 0.021, Scheme.TEN_CLASS, 10),
    ],
)
def test_label_for_table_rows(condition, diameter, scheme, expected):
    assert label_for(condition, diameter, scheme).value == expected


def test_label_ten_class_is_bijection():
    values = [label_for(c, d, Scheme.TEN_CLASS).value for c, d in TABLE_ROWS]
    assert sorted(values) == list(range(1, 11))


def test_label_four_class_fibers():
    fibers = Counter(label_for(c, d, Scheme.FOUR_CLASS).value for c, d in TABLE_ROWS)
    assert dict(fibers) == {1: 1, 2: 3, 3: 3, 4: 3}


def test_label_unknown_diameter():
    with pytest.raises(ValueError, match="diameter"):
        label_for(Condition.BALL, 0.028, Scheme.TEN_CLASS)


def test_fault_label_range():
    with pytest.raises(ValueError):
        FaultLabel(Scheme.FOUR_CLASS, 5)
    assert FaultLabel(Scheme.TEN_CLASS, 10).index == 9


def _records(rows, rpms, n_segments, seg_len=1000):
    out = []
    tag = 0
    for rpm in rpms:
        for cond, dia in rows:
            # sample values encode (record, position) so segments are traceable
            samples = tag * 1e6 + np.arange(n_segments * seg_len, dtype=float)
            out.append(SignalRecord(samples, 12000.0, rpm, cond, dia))
            tag += 1
    return out


def _key(seg):
    return (float(seg.samples[0]),)


def test_assemble_ten_class_one_rpm():
    split = assemble_dataset(_records(TABLE_ROWS, [1797], 120), Scheme.TEN_CLASS, 120, seed=3)
    assert len(split.train) == 960 and len(split.test) == 240
    assert set(split.class_counts("train").values()) == {96}
    assert set(split.class_counts("test").values()) == {24}
    train_keys = {_key(s) for s, _ in split.train}
    test_keys = {_key(s) for s, _ in split.test}
    assert not train_keys & test_keys
    assert len(train_keys | test_keys) == 1200


def test_assemble_four_class_four_rpm():
    rpms = [1730, 1750, 1772, 1797]
    split = assemble_dataset(_records(TABLE_ROWS, rpms, 120), Scheme.FOUR_CLASS, 120, seed=0)
    # 4 classes x 4 rpm x 120 segments, 20 % held out
    assert len(split.train) + len(split.test) == 1920
    assert len(split.test) == 384
    assert set(split.class_counts("test").values()) == {96}
    # every rpm contributes exactly 120 segments per class
    per_cell = Counter((lab.value, s.source.rpm) for s, lab in split.train + split.test)
    assert set(per_cell.values()) == {120}
    # fault classes draw evenly from their three diameters
    per_dia = Counter((lab.value, s.source.fault_diameter_in) for s, lab in split.train + split.test if lab.value > 1)
    assert set(per_dia.values()) == {160}


def test_assemble_deterministic():
    recs = _records(TABLE_ROWS, [1750], 130)
    a = assemble_dataset(recs, Scheme.TEN_CLASS, 120, seed=11)
    b = assemble_dataset(recs, Scheme.TEN_CLASS, 120, seed=11)
    c = assemble_dataset(recs, Scheme.TEN_CLASS, 120, seed=12)
    assert [(_key(s), l.value) for s, l in a.train] == [(_key(s), l.value) for s, l in b.train]
    assert [(_key(s), l.value) for s, l in a.test] == [(_key(s), l.value) for s, l in b.test]
    assert [_key(s) for s, _ in a.train] != [_key(s) for s, _ in c.train]


def test_assemble_healthy_subsampled():
    rows = [(Condition.HEALTHY, None), (Condition.BALL, 0.007), (Condition.INNER_RACE, 0.007), (Condition.OUTER_RACE, 0.007)]
    recs = _records(rows, [1797], 120)
    recs[0] = SignalRecord(np.arange(480_000, dtype=float), 12000.0, 1797, Condition.HEALTHY)
    split = assemble_dataset(recs, Scheme.FOUR_CLASS, 120, seed=1)
    assert split.class_counts("train") == {1: 96, 2: 96, 3: 96, 4: 96}


def test_assemble_deficit_named():
    recs = _records(TABLE_ROWS, [1772], 120)
    recs[4] = SignalRecord(np.zeros(50_000), 12000.0, 1772, recs[4].condition, recs[4].fault_diameter_in)
    with pytest.raises(ValueError, match=r"class 5 at 1772 rpm: need 120 segments, have 50"):
        assemble_dataset(recs, Scheme.TEN_CLASS, 120)


def test_assemble_missing_class():
    recs = _records(TABLE_ROWS[:-1], [1797], 120)
    with pytest.raises(ValueError, match="class 10"):
        assemble_dataset(recs, Scheme.TEN_CLASS, 120)


def test_assemble_rounds_toward_train():
    rows = [(Condition.HEALTHY, None), (Condition.BALL, 0.007), (Condition.INNER_RACE, 0.007), (Condition.OUTER_RACE, 0.007)]
    split = assemble_dataset(_records(rows, [1797], 7), Scheme.FOUR_CLASS, 7, seed=0)
    # 7 * 0.8 = 5.6 -> 6 train, 1 test
    assert split.class_counts("train") == {1: 6, 2: 6, 3: 6, 4: 6}
    assert split.class_counts("test") == {1: 1, 2: 1, 3: 1, 4: 1}


def test_assemble_rpm_subset():
    recs = _records(TABLE_ROWS, [1730, 1797], 120)
    split = assemble_dataset(recs, Scheme.TEN_CLASS, 120, seed=0, rpms=[1730])
    assert {s.source.rpm for s, _ in split.train + split.test} == {1730}


def test_manifest_roundtrip(tmp_path):
    entries = []
    for i, (cond, dia) in enumerate(itertools.islice(TABLE_ROWS, 4)):
        p = tmp_path / f"r{i}.f64"
        p.write_bytes(write_raw_f64le(np.full(2000, float(i))))
        entries.append(ManifestEntry(p, cond, dia, 1750))
    (tmp_path / "c.csv").write_text("v\n1\n2\n")
    entries.append(ManifestEntry(tmp_path / "c.csv", Condition.OUTER_RACE, 0.014, 1730))
    write_manifest(tmp_path / "manifest.txt", entries)
    text = (tmp_path / "manifest.txt").read_text()
    assert text.splitlines()[0] == "r0.f64,Healthy,,1750"
    assert parse_manifest(text, tmp_path) == entries
    records = load_manifest_records(tmp_path / "manifest.txt")
    assert [len(r) for r in records] == [2000, 2000, 2000, 2000, 2]
    assert records[4].condition is Condition.OUTER_RACE and records[4].rpm == 1730


def test_manifest_errors():
    with pytest.raises(ValueError, match="line 1"):
        parse_manifest("a.f64,Healthy,1797\n")
    with pytest.raises(ValueError, match="line 2"):
        parse_manifest("a.f64,Healthy,,1797\nb.f64,Cracked,0.007,1797\n")

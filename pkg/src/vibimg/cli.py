"""``vibimg`` command line.

Exit codes: 0 success, 1 invalid input or configuration, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import encoders
from .encoders import Method
from .evaluation import (
    TIMING_CSV_HEADER,
    ExperimentConfig,
    StageError,
    bench_single,
    evaluate_model,
    run_experiment,
    timing_csv_row,
)
from .export import image_bytes
from .ingest import (
    ManifestEntry,
    Scheme,
    assemble_dataset,
    load_manifest_records,
    read_csv,
    read_mat,
    read_raw_f64le,
    drive_end_variables,
    write_manifest,
    write_raw_f64le,
)
from .nn import ArchConfig, default_specs, load_model, save_model
from .signal import (
    DEFAULT_SAMPLE_RATE_HZ,
    FAULT_DIAMETERS_IN,
    MOTOR_SPEEDS_RPM,
    Condition,
    SignalRecord,
    SynthConfig,
    segment_record,
    synth_signal,
)

log = logging.getLogger("vibimg")

METHOD_NAMES = [m.value for m in Method]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _rpm_list(text: str):
    text = str(text).strip().lower()
    if text == "all":
        return None
    out = []
    for part in text.replace("+", ",").split(","):
        rpm = int(part)
        if rpm not in MOTOR_SPEEDS_RPM:
            raise argparse.ArgumentTypeError(f"rpm must be one of {MOTOR_SPEEDS_RPM} or 'all'")
        out.append(rpm)
    return tuple(out)


def _method(text: str) -> Method:
    try:
        return Method.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid method {text!r}; choose from {', '.join(METHOD_NAMES)}") from None


def _scheme(text: str) -> Scheme:
    try:
        return Scheme.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


# Defaults live here rather than on the parser so that flags, config file and
# defaults can be layered: flags > config file > defaults.
DEFAULTS = {
    "seed": 0,
    "no_clobber": False,
    "classes": 4,
    "duration": 10.0,
    "rpm": None,
    "noise": 0.05,
    "sample_rate": DEFAULT_SAMPLE_RATE_HZ,
    "method": Method.PIXEL,
    "side": None,
    "bins": encoders.DEFAULT_MTF_BINS,
    "window": "prefix",
    "limit": None,
    "scheme": Scheme.FOUR_CLASS,
    "epochs": 150,
    "batch": 64,
    "segments": 120,
    "lr": 1e-3,
    "conv_channels": "8,16,32",
    "hidden": "128",
    "methods": ",".join(METHOD_NAMES),
    "repeats": 100,
    "warmup": 10,
    "model_dir": None,
    "bench_epochs": 5,
    "bench_segments": 20,
}


def _common(p, out_help):
    p.add_argument("--seed", type=_nonneg_int, default=None, help="RNG seed (default 0)")
    p.add_argument("--config", type=Path, default=None, help="key=value config file; flags override it")
    p.add_argument("--out", type=Path, default=None, help=out_help)
    p.add_argument("--no-clobber", dest="no_clobber", action="store_const", const=True, default=None,
                   help="refuse to overwrite existing outputs")


def _data_opts(p):
    p.add_argument("--manifest", type=Path, default=None, help="dataset manifest (path,condition,diameter,rpm)")
    p.add_argument("--scheme", type=_scheme, default=None, help="label scheme: four|ten")
    p.add_argument("--rpm", type=_rpm_list, default=None, help="1730|1750|1772|1797|all (comma list allowed)")
    p.add_argument("--segments", type=_positive_int, default=None, help="segments per class per rpm (default 120)")
    p.add_argument("--sample-rate", dest="sample_rate", type=float, default=None)


def _encode_opts(p):
    p.add_argument("--method", type=_method, default=None, help="|".join(METHOD_NAMES))
    p.add_argument("--side", type=_positive_int, default=None, help="image side (default 31 for pixel, else 256)")
    p.add_argument("--bins", type=_positive_int, default=None, help="MTF quantile bins (default 8)")
    p.add_argument("--window", choices=["prefix", "decimate"], default=None,
                   help="how 256-sample encodings pick samples from a segment")


def _train_opts(p):
    p.add_argument("--epochs", type=_nonneg_int, default=None)
    p.add_argument("--batch", type=_positive_int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--conv-channels", dest="conv_channels", default=None, help="conv widths, e.g. 8,16,32")
    p.add_argument("--hidden", default=None, help="hidden dense widths, e.g. 128")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vibimg", description="Bearing vibration to image encoding, CNN training and latency benchmarks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", help="write synthetic bearing records plus a manifest")
    _common(p, "output directory")
    p.add_argument("--classes", type=int, choices=[4, 10], default=None)
    p.add_argument("--duration", type=float, default=None, help="seconds per record (default 10)")
    p.add_argument("--rpm", type=_rpm_list, default=None)
    p.add_argument("--noise", type=float, default=None, help="noise sigma in g")
    p.add_argument("--sample-rate", dest="sample_rate", type=float, default=None)

    p = sub.add_parser("ingest", help="load a manifest and report the balanced split")
    _common(p, "optional summary file")
    _data_opts(p)

    p = sub.add_parser("encode", help="encode a recording's segments as images")
    _common(p, "output directory")
    p.add_argument("input", type=Path, help=".csv, .mat or raw little-endian f64 file")
    _encode_opts(p)
    p.add_argument("--limit", type=_positive_int, default=None, help="encode at most this many segments")
    p.add_argument("--sample-rate", dest="sample_rate", type=float, default=None)

    p = sub.add_parser("train", help="train a classifier and save it")
    _common(p, "model file (default model.vcnn)")
    _data_opts(p)
    _encode_opts(p)
    _train_opts(p)

    p = sub.add_parser("eval", help="evaluate a saved model on a test split")
    _common(p, "report directory")
    p.add_argument("--model", type=Path, required=False, default=None)
    _data_opts(p)
    _encode_opts(p)

    p = sub.add_parser("bench", help="single-image encode + inference latency per encoding")
    _common(p, "timing CSV (default timing.csv)")
    _data_opts(p)
    p.add_argument("--methods", default=None, help="comma list of encodings to benchmark")
    p.add_argument("--model-dir", dest="model_dir", type=Path, default=None,
                   help="directory holding <method>.vcnn models; missing ones are trained")
    p.add_argument("--repeats", type=_positive_int, default=None)
    p.add_argument("--warmup", type=_nonneg_int, default=None)
    p.add_argument("--bench-epochs", dest="bench_epochs", type=_nonneg_int, default=None)
    p.add_argument("--bench-segments", dest="bench_segments", type=_positive_int, default=None)
    p.add_argument("--bins", type=_positive_int, default=None)
    _train_opts(p)
    return parser


def _action_map(parser, command):
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return {a.dest: a for a in sub.choices[command]._actions if a.dest not in ("help",)}


def read_config_file(path: Path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve_options(parser, args) -> argparse.Namespace:
    """Layer defaults, config file values and explicit flags."""
    actions = _action_map(parser, args.command)
    merged = {dest: None for dest in actions}
    merged.update((k, v) for k, v in DEFAULTS.items() if k in actions)
    if args.config is not None:
        for key, text in read_config_file(args.config).items():
            if key not in actions or key == "config":
                raise UsageError(f"{args.config}: unknown key {key!r} for '{args.command}'")
            action = actions[key]
            try:
                value = action.type(text) if action.type else text
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"{args.config}: bad value for {key}: {exc}") from None
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"{args.config}: {key} must be one of {list(action.choices)}")
            if isinstance(action, argparse._StoreConstAction):
                value = _bool(text)
            merged[key] = value
    for key, value in vars(args).items():
        if value is not None:
            merged[key] = value
    merged.setdefault("command", args.command)
    return argparse.Namespace(**merged)


def _widths(text, name):
    try:
        vals = tuple(int(t) for t in str(text).split(",") if t.strip())
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated integers") from None
    if any(v < 1 for v in vals):
        raise UsageError(f"--{name} widths must be positive")
    return vals


def _opt(opts, key):
    return getattr(opts, key, DEFAULTS.get(key))


def _arch(opts) -> ArchConfig:
    conv = _widths(_opt(opts, "conv_channels"), "conv-channels")
    if not conv:
        raise UsageError("need at least one conv layer")
    return ArchConfig(conv_channels=conv, hidden=_widths(_opt(opts, "hidden"), "hidden"))


def _writable(path: Path, opts) -> Path:
    if opts.no_clobber and path.exists():
        raise FileExistsError(f"{path}: exists and --no-clobber is set")
    return path


def _experiment_config(opts) -> ExperimentConfig:
    config = _build_config(opts)
    shape = (config.method.channels, config.image_side, config.image_side)
    try:
        default_specs(shape, config.scheme.n_classes, config.arch)
    except ValueError as exc:
        raise UsageError(f"{config.method.value} images of side {config.image_side} do not fit the network: {exc}") from None
    return config


def _build_config(opts) -> ExperimentConfig:
    return ExperimentConfig(
        method=opts.method,
        side=opts.side,
        scheme=opts.scheme,
        rpms=opts.rpm,
        seed=opts.seed,
        epochs=_opt(opts, "epochs"),
        batch_size=_opt(opts, "batch"),
        segments_per_class_per_rpm=opts.segments,
        lr=_opt(opts, "lr"),
        bins=opts.bins,
        window=opts.window,
        arch=_arch(opts),
    )


def _records(opts):
    if opts.manifest is None:
        raise UsageError("--manifest is required")
    return load_manifest_records(opts.manifest, opts.sample_rate)


# -- commands ---------------------------------------------------------------


def synth_plan(classes: int):
    rows = [(Condition.HEALTHY, None)]
    faults = (Condition.BALL, Condition.INNER_RACE, Condition.OUTER_RACE)
    if classes == 4:
        rows += [(c, FAULT_DIAMETERS_IN[0]) for c in faults]
    else:
        rows += [(c, d) for c in faults for d in FAULT_DIAMETERS_IN]
    return rows


def cmd_synth(opts) -> int:
    if opts.out is None:
        raise UsageError("synth needs --out DIR")
    if opts.duration <= 0 or opts.noise < 0:
        raise UsageError("--duration must be > 0 and --noise >= 0")
    out = opts.out
    out.mkdir(parents=True, exist_ok=True)
    rpms = MOTOR_SPEEDS_RPM if opts.rpm is None else opts.rpm
    entries = []
    for i, (rpm, (cond, dia)) in enumerate((r, row) for r in rpms for row in synth_plan(opts.classes)):
        file_seed = int(np.random.SeedSequence([opts.seed, i]).generate_state(1)[0])
        cfg = SynthConfig.for_rpm(rpm, seed=file_seed, noise_sigma=opts.noise, sample_rate_hz=opts.sample_rate)
        rec = synth_signal(cfg, cond, opts.duration, dia)
        tag = cond.value.lower() if dia is None else f"{cond.value.lower()}_{dia:g}"
        path = _writable(out / f"{tag}_{rpm}.f64", opts)
        path.write_bytes(write_raw_f64le(rec.samples))
        entries.append(ManifestEntry(path, cond, dia, rpm))
    write_manifest(_writable(out / "manifest.txt", opts), entries)
    print(f"wrote {len(entries)} records and {out / 'manifest.txt'}")
    return 0


def cmd_ingest(opts) -> int:
    records = _records(opts)
    lines = [f"{len(records)} records"]
    for rec in records:
        dia = "-" if rec.fault_diameter_in is None else f'{rec.fault_diameter_in:g}"'
        lines.append(f"  {rec.condition.value:<10} {dia:<7} {rec.rpm} rpm  {len(rec)} samples")
    split = assemble_dataset(records, opts.scheme, opts.segments, opts.seed, rpms=opts.rpm)
    lines.append(f"scheme={opts.scheme.value} train={len(split.train)} test={len(split.test)}")
    lines.append("train per class: " + " ".join(f"{k}:{v}" for k, v in split.class_counts("train").items()))
    lines.append("test per class:  " + " ".join(f"{k}:{v}" for k, v in split.class_counts("test").items()))
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if opts.out is not None:
        _writable(opts.out, opts).write_text(text)
    return 0


def _read_any(path: Path, sample_rate: float) -> SignalRecord:
    buf = path.read_bytes()
    suffix = path.suffix.lower()
    if suffix == ".mat":
        de = drive_end_variables(read_mat(buf))
        if not de:
            raise ValueError(f"{path}: no *_DE_time variable")
        return SignalRecord(de[0].data, sample_rate, 1797, Condition.HEALTHY)
    if suffix in (".csv", ".txt"):
        return read_csv(buf, sample_rate)
    return read_raw_f64le(buf, sample_rate)


def cmd_encode(opts) -> int:
    if opts.out is None:
        raise UsageError("encode needs --out DIR")
    rec = _read_any(opts.input, opts.sample_rate)
    segments = segment_record(rec)
    if opts.limit is not None:
        segments = segments[: opts.limit]
    opts.out.mkdir(parents=True, exist_ok=True)
    for seg in segments:
        image = encoders.encode(seg, opts.method, opts.side, bins=opts.bins, window=opts.window)
        payload, suffix = image_bytes(image)
        _writable(opts.out / f"{opts.method.value}_{seg.index:04d}{suffix}", opts).write_bytes(payload)
    print(f"wrote {len(segments)} {opts.method.value} images to {opts.out}")
    return 0


def _write_report(report, out_dir: Path, opts, prefix=""):
    out_dir.mkdir(parents=True, exist_ok=True)
    _writable(out_dir / f"{prefix}report.txt", opts).write_text(report.to_text())
    _writable(out_dir / f"{prefix}confusion.csv", opts).write_text(report.confusion.to_csv())
    method = report.metadata.get("method", "pixel")
    _writable(out_dir / f"{prefix}timing.csv", opts).write_text(
        TIMING_CSV_HEADER + "\n" + timing_csv_row(method, report.timing) + "\n"
    )


def cmd_train(opts) -> int:
    config = _experiment_config(opts)
    records = _records(opts)
    out = opts.out if opts.out is not None else Path("model.vcnn")
    _writable(out, opts)

    def progress(stats):
        log.info("epoch %d loss %.4f train_acc %.4f", stats.epoch, stats.loss, stats.accuracy)

    result = run_experiment(config, records, progress)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(result.model, out)
    _write_report(result.report, out.parent, opts, prefix=out.stem + ".")
    print(f"accuracy={result.report.accuracy:.4f} params={result.model.param_count} model={out}")
    return 0


def cmd_eval(opts) -> int:
    if opts.model is None:
        raise UsageError("eval needs --model PATH")
    model = load_model(opts.model)
    config = _experiment_config(opts)
    expected = (config.method.channels, config.image_side, config.image_side)
    if model.input_shape != expected:
        raise UsageError(f"model input {model.input_shape} does not fit {config.method.value} images {expected}")
    if model.num_classes != config.scheme.n_classes:
        raise UsageError(f"model has {model.num_classes} classes, scheme {config.scheme.value} needs {config.scheme.n_classes}")
    split = assemble_dataset(_records(opts), config.scheme, config.segments_per_class_per_rpm, config.seed, rpms=config.rpms)
    report = evaluate_model(model, split.test, config)
    out = opts.out if opts.out is not None else Path("eval")
    _write_report(report, out, opts)
    print(f"accuracy={report.accuracy:.4f} test_samples={report.confusion.total} report={out / 'report.txt'}")
    return 0


def cmd_bench(opts) -> int:
    methods = [_method(m) for m in str(opts.methods).split(",") if m.strip()]
    if opts.manifest is not None:
        records = _records(opts)
    else:
        records = [
            synth_signal(SynthConfig.for_rpm(1797, seed=opts.seed + i), cond, 3.0, dia)
            for i, (cond, dia) in enumerate(synth_plan(opts.scheme.n_classes))
        ]
    rows = [TIMING_CSV_HEADER]
    for method in methods:
        cfg = ExperimentConfig(
            method=method,
            scheme=opts.scheme,
            rpms=opts.rpm,
            seed=opts.seed,
            epochs=opts.bench_epochs,
            batch_size=opts.batch,
            segments_per_class_per_rpm=opts.bench_segments,
            lr=opts.lr,
            bins=opts.bins,
            arch=_arch(opts),
        )
        model_path = None if opts.model_dir is None else opts.model_dir / f"{method.value}.vcnn"
        if model_path is not None and model_path.exists():
            model = load_model(model_path)
            split = assemble_dataset(records, cfg.scheme, cfg.segments_per_class_per_rpm, cfg.seed, rpms=cfg.rpms)
        else:
            result = run_experiment(cfg, records)
            model = result.model
            split = assemble_dataset(records, cfg.scheme, cfg.segments_per_class_per_rpm, cfg.seed, rpms=cfg.rpms)
            if model_path is not None:
                model_path.parent.mkdir(parents=True, exist_ok=True)
                save_model(model, model_path)
        segment = split.test[0][0]
        timing = bench_single(model, segment, method, repeats=opts.repeats, warmup=opts.warmup, bins=cfg.bins)
        rows.append(timing_csv_row(method, timing))
        log.info("%s", rows[-1])
    text = "\n".join(rows) + "\n"
    out = opts.out if opts.out is not None else Path("timing.csv")
    _writable(out, opts)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    print(text, end="")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "encode": cmd_encode,
    "train": cmd_train,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def _exit_code(exc: BaseException) -> int:
    return 2 if isinstance(exc, OSError) else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        opts = resolve_options(parser, args)
        return COMMANDS[opts.command](opts)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StageError as exc:
        print(f"error in {exc}", file=sys.stderr)
        return _exit_code(exc.cause)
    except OSError as exc:
        where = f"{exc.filename}: " if getattr(exc, "filename", None) else ""
        print(f"I/O error: {where}{exc.strerror or exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

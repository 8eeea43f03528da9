from .dataset import (
    DatasetSplit,
    FaultLabel,
    ManifestEntry,
    Scheme,
    assemble_dataset,
    label_for,
    load_manifest_records,
    load_record,
    parse_manifest,
    read_manifest,
    write_manifest,
)
from .mat import MatFormatError, MatVariable, drive_end_variables, read_mat
from .readers import read_csv, read_raw_f64le, write_raw_f64le

__all__ = [
    "DatasetSplit",
    "FaultLabel",
    "ManifestEntry",
    "MatFormatError",
    "MatVariable",
    "Scheme",
    "assemble_dataset",
    "drive_end_variables",
    "label_for",
    "load_manifest_records",
    "load_record",
    "parse_manifest",
    "read_csv",
    "read_manifest",
    "read_mat",
    "read_raw_f64le",
    "write_manifest",
    "write_raw_f64le",
]

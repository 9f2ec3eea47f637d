"""Readers and writers for feature matrices produced by external extractors.

Two encodings carry the same payload (n x d float matrix plus one label per
row):

binary (.csf):  magic b"CSF1" | u32 n | u32 d | n*d little-endian f32,
                row-major | n labels, UTF-8, newline-separated, newline
                after the last label.

text (.csv):    header "label,f0,f1,...,f{d-1}", one row per sample, label
                first. Slower and lossier (decimal round trip) but greppable.

read_features dispatches on the magic bytes, not the file name, so either
encoding works under any extension.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .fid import FeatureSet

MAGIC = b"CSF1"
_HEADER = struct.Struct("<4sII")

# refuse absurd headers before allocating (2^31 floats is already 8 GiB)
_MAX_ELEMENTS = 2**31


def write_features_binary(features: FeatureSet, path: str | Path) -> None:
    """Serialize a feature set to the binary interchange encoding."""
    path = Path(path)
    labels = features.labels or tuple(f"row{i}" for i in range(features.n))
    payload = features.matrix.astype("<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, features.n, features.d))
        fh.write(payload)
        for label in labels:
            fh.write(label.encode("utf-8") + b"\n")


def write_features_csv(features: FeatureSet, path: str | Path) -> None:
    """Serialize a feature set to the text interchange encoding."""
    path = Path(path)
    labels = features.labels or tuple(f"row{i}" for i in range(features.n))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f{j}" for j in range(features.d)])
        for label, row in zip(labels, features.matrix):
            writer.writerow([label] + [repr(float(x)) for x in row])


def read_features(path: str | Path, source_tag: str = "external") -> FeatureSet:
    """Load a feature set from either interchange encoding.

    The binary encoding is detected by its magic bytes; anything else is
    parsed as CSV. Malformed content raises SchemaError naming the file
    and the defect.
    """
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"feature file not found: {path}")
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return _read_binary(path, source_tag)
    return _read_csv(path, source_tag)


def _read_binary(path: Path, source_tag: str) -> FeatureSet:
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise SchemaError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, n, d = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SchemaError(f"{path}: bad magic {magic!r}")
    if n < 2 or d < 1 or n * d > _MAX_ELEMENTS:
        raise SchemaError(f"{path}: implausible header n={n} d={d}")
    body_end = _HEADER.size + 4 * n * d
    if len(raw) < body_end:
        raise SchemaError(
            f"{path}: matrix truncated, expected {4 * n * d} payload bytes, "
            f"found {len(raw) - _HEADER.size}"
        )
    matrix = np.frombuffer(raw, dtype="<f4", count=n * d, offset=_HEADER.size)
    matrix = matrix.reshape(n, d).astype(np.float64)
    tail = raw[body_end:]
    if not tail.endswith(b"\n"):
        raise SchemaError(f"{path}: label block must end with a newline")
    try:
        labels = tail[:-1].decode("utf-8").split("\n")
    except UnicodeDecodeError as exc:
        raise SchemaError(f"{path}: labels are not valid UTF-8 ({exc})") from None
    if len(labels) != n:
        raise SchemaError(f"{path}: expected {n} labels, found {len(labels)}")
    if not np.all(np.isfinite(matrix)):
        raise SchemaError(f"{path}: matrix contains non-finite values")
    return FeatureSet(matrix=matrix, source_tag=source_tag, labels=tuple(labels))


def _read_csv(path: Path, source_tag: str) -> FeatureSet:
    try:
        with open(path, "r", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaError(f"{path}: empty file") from None
            rows = list(reader)
    except UnicodeDecodeError as exc:
        raise SchemaError(f"{path}: not valid UTF-8 ({exc})") from None
    if not header or header[0] != "label":
        raise SchemaError(f"{path}: first header column must be 'label'")
    d = len(header) - 1
    expected = [f"f{j}" for j in range(d)]
    if d < 1 or header[1:] != expected:
        raise SchemaError(
            f"{path}: feature columns must be f0..f{{d-1}}, got {header[1:][:4]}..."
        )
    labels: list[str] = []
    data = np.empty((len(rows), d), dtype=np.float64)
    for i, row in enumerate(rows):
        if len(row) != d + 1:
            raise SchemaError(
                f"{path}: row {i + 2} has {len(row)} fields, expected {d + 1}"
            )
        labels.append(row[0])
        try:
            data[i] = [float(x) for x in row[1:]]
        except ValueError as exc:
            raise SchemaError(f"{path}: row {i + 2} has a non-numeric value ({exc})") from None
    if len(rows) < 2:
        raise SchemaError(f"{path}: need >= 2 samples, found {len(rows)}")
    if not np.all(np.isfinite(data)):
        raise SchemaError(f"{path}: matrix contains non-finite values")
    return FeatureSet(matrix=data, source_tag=source_tag, labels=tuple(labels))

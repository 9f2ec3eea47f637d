"""Directory-to-interchange-file export.

Output format ("CSF1"): magic bytes b"CSF1", little-endian u32 n and d,
n * d float32 values row-major, then n newline-terminated UTF-8 labels.
Labels are filename stems in lexicographic (stem, name) order, matching
the analysis toolkit's image set ordering, so feature row i corresponds to
the i-th image of the directory. A `.meta.json` sidecar records the exact
backbone and preprocessing configuration the values came from.
"""

from __future__ import annotations

import json
import os
import struct
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .backbone import DEFAULT_BACKBONE, SPECS, Backbone
from .version import __version__

MAGIC = b"CSF1"
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


class ExportError(Exception):
    """Base class for all exporter errors."""

    exit_code = 3


class DatasetError(ExportError):
    """The input directory is missing, empty, or yields no usable images."""


class DecodeError(ExportError):
    """An image file exists but cannot be decoded."""


@dataclass(frozen=True)
class ExportJob:
    """One export: an image directory embedded into one interchange file."""

    input_dir: Path
    output_file: Path
    backbone_name: str = DEFAULT_BACKBONE
    batch_size: int = 16
    image_size: int = 64
    skip_undecodable: bool = False

    def __post_init__(self):
        object.__setattr__(self, "input_dir", Path(self.input_dir))
        object.__setattr__(self, "output_file", Path(self.output_file))
        if self.backbone_name not in SPECS:
            raise ValueError(
                f"unknown backbone {self.backbone_name!r}, "
                f"choose one of {sorted(SPECS)}"
            )
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")


def sidecar_path(output_file: str | Path) -> Path:
    return Path(str(output_file) + ".meta.json")


def _image_paths(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise DatasetError(f"image directory not found: {directory}")
    paths = [
        p
        for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    ]
    if not paths:
        raise DatasetError(f"no images in {directory}")
    paths.sort(key=lambda p: (p.stem, p.name))
    return paths


def _load_pixels(path: Path, size: int) -> np.ndarray:
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB").resize((size, size), Image.BILINEAR)
            return np.asarray(rgb, dtype=np.uint8)
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"cannot decode image file {path}: {exc}") from None


def _interchange_bytes(matrix: np.ndarray, labels: list[str]) -> bytes:
    n, d = matrix.shape
    blob = bytearray(struct.pack("<4sII", MAGIC, n, d))
    blob += np.ascontiguousarray(matrix, dtype="<f4").tobytes()
    for label in labels:
        blob += label.encode("utf-8") + b"\n"
    return bytes(blob)


def _write_atomic(data: bytes, path: Path) -> None:
    """Write via a temp file in the target directory plus rename, so a
    crash never leaves a half-written output behind."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sidecar_doc(job: ExportJob, count: int) -> dict:
    spec = SPECS[job.backbone_name]
    return {
        "format": "CSF1",
        "backbone": {
            "name": spec.name,
            "kind": "seeded-random-feature-embedding",
            "hidden": spec.hidden,
            "width": spec.width,
        },
        "preprocessing": {
            "mode": "RGB",
            "resize": "bilinear",
            "image_size": job.image_size,
            "scale": "pixel / 255 - 0.5",
        },
        "batch_size": job.batch_size,
        "count": count,
        "exporter_version": __version__,
    }


def export_features(job: ExportJob) -> Path:
    """Embed every image of job.input_dir and write the interchange file.

    Returns the output path. The batch size bounds how many decoded images
    are held in memory at once and never affects the output bytes. An
    undecodable image fails the export unless job.skip_undecodable is set,
    in which case it is skipped with a warning on stderr.
    """
    paths = _image_paths(job.input_dir)
    backbone = Backbone(SPECS[job.backbone_name], job.image_size)
    labels: list[str] = []
    rows: list[np.ndarray] = []
    for start in range(0, len(paths), job.batch_size):
        batch = []
        for path in paths[start : start + job.batch_size]:
            if "\n" in path.stem or "\r" in path.stem:
                raise DatasetError(f"filename stem contains a newline: {path}")
            try:
                batch.append((path.stem, _load_pixels(path, job.image_size)))
            except DecodeError as exc:
                if not job.skip_undecodable:
                    raise
                print(f"warning: skipping undecodable image: {exc}", file=sys.stderr)
        for stem, pixels in batch:
            labels.append(stem)
            rows.append(backbone.embed(pixels))
    if not rows:
        raise DatasetError(f"no decodable images in {job.input_dir}")
    _write_atomic(_interchange_bytes(np.stack(rows), labels), job.output_file)
    doc = _sidecar_doc(job, len(labels))
    sidecar = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    _write_atomic(sidecar.encode("utf-8"), sidecar_path(job.output_file))
    return job.output_file

"""Deterministic image decoding, color conversion, and bilinear resampling.

All metric modules share these primitives so that every similarity score is
computed on identically prepared pixel data. Images are immutable 8-bit
arrays; every operation here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PilImage, UnidentifiedImageError

from .errors import DatasetError, DecodeError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

# ITU-R BT.601 luma weights
_LUMA_R = 0.299
_LUMA_G = 0.587
_LUMA_B = 0.114


@dataclass(frozen=True, eq=False)
class Image:
    """An immutable 8-bit raster: shape (height, width, channels), channels 1 or 3."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"image array must be (h, w, 1|3), got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image dimensions must be positive")
        if arr.dtype != np.uint8:
            raise ValueError(f"image samples must be uint8, got {arr.dtype}")
        arr = arr.copy(order="C")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        return f"Image({self.width}x{self.height}x{self.channels})"


@dataclass(frozen=True)
class ImageSet:
    """A nonempty ordered collection of images, sorted by source label.

    Ordering is lexicographic by label regardless of how the underlying
    files were enumerated, so downstream statistics are platform-stable.
    """

    images: tuple[Image, ...]
    source_labels: tuple[str, ...]

    def __post_init__(self):
        if not self.images:
            raise DatasetError("image set must contain at least one image")
        if len(self.images) != len(self.source_labels):
            raise ValueError("images and source_labels must have equal length")
        order = sorted(range(len(self.images)), key=lambda i: self.source_labels[i])
        if order != list(range(len(self.images))):
            object.__setattr__(self, "images", tuple(self.images[i] for i in order))
            object.__setattr__(self, "source_labels", tuple(self.source_labels[i] for i in order))

    def __len__(self) -> int:
        return len(self.images)

    def __iter__(self):
        return iter(self.images)

    def __getitem__(self, index: int) -> Image:
        return self.images[index]


def load_image(path: str | Path) -> Image:
    """Decode a PNG or JPEG file to an 8-bit RGB image.

    Grayscale sources are expanded to three identical channels; alpha is
    composited over white. Raises DecodeError for unreadable or corrupt
    files, always naming the path.
    """
    path = Path(path)
    try:
        with PilImage.open(path) as im:
            im.load()
            if im.mode in ("RGBA", "LA", "PA") or (im.mode == "P" and "transparency" in im.info):
                im = im.convert("RGBA")
                background = PilImage.new("RGBA", im.size, (255, 255, 255, 255))
                im = PilImage.alpha_composite(background, im)
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"cannot decode image file {path}: {exc}") from exc
    return Image(arr)


def to_grayscale(img: Image) -> Image:
    """BT.601 luma conversion; ties round away from zero. Grayscale passes through."""
    if img.channels == 1:
        return img
    rgb = img.data.astype(np.float64)
    luma = _LUMA_R * rgb[:, :, 0] + _LUMA_G * rgb[:, :, 1] + _LUMA_B * rgb[:, :, 2]
    out = np.clip(np.floor(luma + 0.5), 0.0, 255.0).astype(np.uint8)
    return Image(out)


def resize(img: Image, w: int, h: int) -> Image:
    """Bilinear resample to exactly (w, h).

    Output sample centers are mapped into source coordinates
    (center-aligned: sx = (x + 0.5) * W/w - 0.5), interpolated between the
    four surrounding samples with edge clamping, and rounded half away from
    zero. Resizing to the source size reproduces the input bit for bit.
    """
    if w < 1 or h < 1:
        raise ValueError(f"target dimensions must be >= 1, got {w}x{h}")
    if w == img.width and h == img.height:
        return img
    src = img.data.astype(np.float64)
    sh, sw = img.height, img.width

    sx = (np.arange(w) + 0.5) * (sw / w) - 0.5
    sy = (np.arange(h) + 0.5) * (sh / h) - 0.5
    x0 = np.clip(np.floor(sx).astype(np.int64), 0, sw - 1)
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, sh - 1)
    fx = np.clip(sx - np.floor(sx), 0.0, 1.0)
    fy = np.clip(sy - np.floor(sy), 0.0, 1.0)
    # floor(sx) may be -1 at the left edge; the clamp above pins the index,
    # so zero the fraction there to keep weights on the edge sample
    fx = np.where(sx < 0, 0.0, fx)
    fy = np.where(sy < 0, 0.0, fy)
    x1 = np.minimum(x0 + 1, sw - 1)
    y1 = np.minimum(y0 + 1, sh - 1)

    top = src[y0][:, x0] * (1 - fx)[None, :, None] + src[y0][:, x1] * fx[None, :, None]
    bot = src[y1][:, x0] * (1 - fx)[None, :, None] + src[y1][:, x1] * fx[None, :, None]
    out = top * (1 - fy)[:, None, None] + bot * fy[:, None, None]
    out = np.clip(np.floor(out + 0.5), 0.0, 255.0).astype(np.uint8)
    return Image(out)


def load_image_set(directory: str | Path) -> ImageSet:
    """Decode every PNG/JPEG in a directory, ordered by filename stem.

    Fails fast: one undecodable member aborts the whole set. Files with
    other suffixes are ignored; subdirectories are not recursed.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"not a directory: {directory}")
    paths = [p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES]
    if not paths:
        raise DatasetError(f"no decodable images (*.png, *.jpg, *.jpeg) in {directory}")
    paths.sort(key=lambda p: (p.stem, p.name))
    images = tuple(load_image(p) for p in paths)
    labels = tuple(p.stem for p in paths)
    return ImageSet(images=images, source_labels=labels)

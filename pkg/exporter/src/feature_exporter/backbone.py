"""Deterministic feature backbones.

Each backbone is a fixed two-stage nonlinear projection of resized RGB
pixels. Weights are drawn from a counter-based generator keyed by the
backbone name, so exports are bit-reproducible across runs and machines
without downloading anything. The embeddings are untrained: distances
computed from them are internally consistent, but their magnitudes are not
comparable to distances from a trained vision network. A trained backbone
can be added as another entry in SPECS without touching the file format.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

MIN_IMAGE_SIZE = 8
# stage-1 weights grow with 3 * size^2; the cap keeps them under ~200 MB
MAX_IMAGE_SIZE = 128


@dataclass(frozen=True)
class BackboneSpec:
    name: str
    hidden: int
    width: int


SPECS = {
    "rfe-256": BackboneSpec("rfe-256", hidden=256, width=256),
    "rfe-2048": BackboneSpec("rfe-2048", hidden=1024, width=2048),
}
DEFAULT_BACKBONE = "rfe-2048"


def _seed_for(name: str, stage: str) -> int:
    digest = hashlib.sha256(f"{name}/{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class Backbone:
    """Fixed embedding: flatten [0, 1] pixels, random dense layer with
    rectification, random dense readout."""

    def __init__(self, spec: BackboneSpec, image_size: int):
        if not MIN_IMAGE_SIZE <= image_size <= MAX_IMAGE_SIZE:
            raise ValueError(
                f"image size {image_size} outside "
                f"[{MIN_IMAGE_SIZE}, {MAX_IMAGE_SIZE}]"
            )
        self.spec = spec
        self.image_size = image_size
        d0 = 3 * image_size * image_size
        g1 = np.random.Generator(np.random.Philox(key=_seed_for(spec.name, "stage1")))
        g2 = np.random.Generator(np.random.Philox(key=_seed_for(spec.name, "stage2")))
        # fan-in scaling keeps activation magnitudes O(1) at any image size
        self._w1 = g1.standard_normal((d0, spec.hidden), dtype=np.float32)
        self._w1 *= np.float32(np.sqrt(2.0 / d0))
        self._w2 = g2.standard_normal((spec.hidden, spec.width), dtype=np.float32)
        self._w2 *= np.float32(np.sqrt(1.0 / spec.hidden))

    @property
    def width(self) -> int:
        return self.spec.width

    def embed(self, pixels: np.ndarray) -> np.ndarray:
        """Embed one (size, size, 3) uint8 array into a float32 feature row.

        One image per call: a fixed per-image accumulation order keeps the
        output independent of how callers batch their inputs.
        """
        if pixels.shape != (self.image_size, self.image_size, 3):
            raise ValueError(
                f"expected ({self.image_size}, {self.image_size}, 3) pixels, "
                f"got {pixels.shape}"
            )
        x = pixels.astype(np.float32).reshape(-1) / np.float32(255.0)
        x -= np.float32(0.5)
        hidden = np.maximum(x @ self._w1, np.float32(0.0))
        return hidden @ self._w2

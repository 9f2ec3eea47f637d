"""Per-image-pair similarity metrics and their set-level averages.

Five metrics are provided: cosine similarity on flattened grayscale pixels,
difference-hash similarity, histogram intersection, windowed structural
similarity (SSIM), and its per-channel RGB mean. Unless stated otherwise a
metric first resamples both inputs to a common square resolution (default
256) so that images of unequal size compare cleanly; passing an explicit
``resolution`` equal to the input size makes that step the identity.

All functions are pure and symmetric in their two image arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DatasetError, UndefinedSimilarityError
from .image_core import Image, ImageSet, resize, to_grayscale

DEFAULT_RESOLUTION = 256

DHASH_WIDTH = 9
DHASH_HEIGHT = 8


@dataclass(frozen=True)
class SsimParams:
    """Stabilization constants and window shape for SSIM.

    c1 = (k1 * dynamic_range)^2 and c2 = (k2 * dynamic_range)^2 keep the
    luminance and contrast terms away from zero denominators.
    """

    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0
    window_side: int = 11
    sigma: float = 1.5

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be positive")
        if self.dynamic_range <= 0:
            raise ValueError("dynamic_range must be positive")
        if self.window_side < 3 or self.window_side % 2 == 0:
            raise ValueError("window_side must be odd and >= 3")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2

    def effective_side(self, min_dim: int) -> int:
        """Largest odd window side <= min(window_side, min_dim).

        Images smaller than the configured window shrink the window rather
        than erroring; callers record the effective side in their reports.
        """
        side = min(self.window_side, min_dim)
        if side % 2 == 0:
            side -= 1
        return max(side, 1)


@dataclass(frozen=True)
class MetricReport:
    """One row of per-metric similarity scores for a coalition's image set."""

    coalition_label: str
    cosine: float
    hist: float
    dhash: float
    ssim: float
    rgb_ssim: float
    fid: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("cosine", "hist", "dhash"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} score {v} outside [0, 1]")
        for name in ("ssim", "rgb_ssim"):
            v = getattr(self, name)
            if not -1.0 < v <= 1.0:
                raise ValueError(f"{name} score {v} outside (-1, 1]")
        if not self.fid >= 0.0:
            raise ValueError(f"fid {self.fid} must be nonnegative")

    def scores(self) -> dict[str, float]:
        return {
            "cosine": self.cosine,
            "hist": self.hist,
            "dhash": self.dhash,
            "ssim": self.ssim,
            "rgb_ssim": self.rgb_ssim,
            "fid": self.fid,
        }


def _gray_at(img: Image, resolution: int) -> np.ndarray:
    """Grayscale plane at the common metric resolution, as float64."""
    g = resize(to_grayscale(img), resolution, resolution)
    return g.data[:, :, 0].astype(np.float64)


def _rgb_at(img: Image, resolution: int) -> np.ndarray:
    """RGB planes at the common metric resolution (grayscale replicated)."""
    r = resize(img, resolution, resolution)
    arr = r.data.astype(np.float64)
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    return arr


def cosine_similarity(a: Image, b: Image, resolution: int = DEFAULT_RESOLUTION) -> float:
    """Cosine of the angle between the flattened grayscale pixel vectors.

    Raises UndefinedSimilarityError when either vector is all zero (a fully
    black image has no direction to compare).
    """
    va = _gray_at(a, resolution).ravel()
    vb = _gray_at(b, resolution).ravel()
    na = np.linalg.norm(va)
    nb = np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise UndefinedSimilarityError("cosine similarity undefined for an all-zero (black) image")
    return float(min(1.0, np.dot(va, vb) / (na * nb)))


def dhash(img: Image) -> int:
    """64-bit difference hash from horizontal gradient signs on a 9x8 thumbnail.

    bit(r, c) = 1 iff pixel(r, c) < pixel(r, c+1); bits packed row-major,
    most significant bit first.
    """
    g = resize(to_grayscale(img), DHASH_WIDTH, DHASH_HEIGHT).data[:, :, 0]
    bits = g[:, :-1] < g[:, 1:]
    value = 0
    for bit in bits.ravel():
        value = (value << 1) | int(bit)
    return value


def dhash_similarity(a: Image, b: Image) -> float:
    """1 - hamming(dhash(a), dhash(b)) / 64; higher means more similar."""
    distance = bin(dhash(a) ^ dhash(b)).count("1")
    return 1.0 - distance / 64.0


def hist_similarity(a: Image, b: Image, resolution: int = DEFAULT_RESOLUTION) -> float:
    """Mean per-channel histogram intersection over 256 bins, in [0, 1]."""
    pa = _rgb_at(a, resolution)
    pb = _rgb_at(b, resolution)
    npix = resolution * resolution
    scores = []
    for ch in range(3):
        ha, _ = np.histogram(pa[:, :, ch], bins=256, range=(0, 256))
        hb, _ = np.histogram(pb[:, :, ch], bins=256, range=(0, 256))
        scores.append(np.minimum(ha / npix, hb / npix).sum())
    return float(min(1.0, max(0.0, np.mean(scores))))


def _gaussian_kernel(side: int, sigma: float) -> np.ndarray:
    half = (side - 1) / 2.0
    x = np.arange(side, dtype=np.float64) - half
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _windowed_mean(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable weighted mean over all fully interior windows ('valid')."""
    from numpy.lib.stride_tricks import sliding_window_view

    side = kernel.shape[0]
    rows = sliding_window_view(plane, side, axis=0)
    vertical = rows @ kernel
    cols = sliding_window_view(vertical, side, axis=1)
    return cols @ kernel


def _ssim_planes(pa: np.ndarray, pb: np.ndarray, params: SsimParams) -> float:
    side = params.effective_side(min(pa.shape))
    kernel = _gaussian_kernel(side, params.sigma)
    mu_a = _windowed_mean(pa, kernel)
    mu_b = _windowed_mean(pb, kernel)
    var_a = _windowed_mean(pa * pa, kernel) - mu_a * mu_a
    var_b = _windowed_mean(pb * pb, kernel) - mu_b * mu_b
    cov_ab = _windowed_mean(pa * pb, kernel) - mu_a * mu_b
    c1, c2 = params.c1, params.c2
    per_window = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov_ab + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(per_window.mean())


def ssim(
    a: Image,
    b: Image,
    params: SsimParams | None = None,
    resolution: int = DEFAULT_RESOLUTION,
) -> float:
    """Mean structural similarity over Gaussian-weighted sliding windows.

    Per window, with weighted moments mu, sigma^2, and cross-covariance:

        (2*mu_a*mu_b + c1) * (2*cov_ab + c2)
        ------------------------------------------------
        (mu_a^2 + mu_b^2 + c1) * (var_a + var_b + c2)

    Inputs are grayscale-converted and resampled to the common resolution.
    Windows larger than the image shrink (see SsimParams.effective_side).
    Self-comparison yields exactly 1.0. Slightly negative values are
    reported as-is; the range is (-1, 1].
    """
    params = params or SsimParams()
    pa = _gray_at(a, resolution)
    pb = _gray_at(b, resolution)
    return _ssim_planes(pa, pb, params)


def rgb_ssim(
    a: Image,
    b: Image,
    params: SsimParams | None = None,
    resolution: int = DEFAULT_RESOLUTION,
) -> float:
    """Arithmetic mean of SSIM applied independently to the R, G, B channels."""
    if a.channels != 3 or b.channels != 3:
        raise ValueError("rgb_ssim requires 3-channel images")
    params = params or SsimParams()
    pa = _rgb_at(a, resolution)
    pb = _rgb_at(b, resolution)
    vals = [_ssim_planes(pa[:, :, ch], pb[:, :, ch], params) for ch in range(3)]
    return float(np.mean(vals))


def metric_report(
    generated: ImageSet,
    original: ImageSet,
    fid: float,
    coalition_label: str = "",
    params: SsimParams | None = None,
    resolution: int = DEFAULT_RESOLUTION,
) -> MetricReport:
    """Average each pairwise metric over the full generated x original cross product.

    With a single original the mean runs over each generated image against
    it; with several originals every (generated_i, original_j) pair enters
    the mean. Pair scores are accumulated in fixed (i, j) order so the
    reduction is bit-stable. The FID value is supplied by the caller (it is
    a set-level statistic, not a pairwise one).
    """
    if len(generated) == 0 or len(original) == 0:
        raise DatasetError("metric_report requires nonempty image sets")
    params = params or SsimParams()
    pair_scores: dict[str, list[float]] = {k: [] for k in ("cosine", "hist", "dhash", "ssim", "rgb_ssim")}
    for g in generated:
        for o in original:
            pair_scores["cosine"].append(cosine_similarity(g, o, resolution))
            pair_scores["hist"].append(hist_similarity(g, o, resolution))
            pair_scores["dhash"].append(dhash_similarity(g, o))
            pair_scores["ssim"].append(ssim(g, o, params, resolution))
            pair_scores["rgb_ssim"].append(rgb_ssim(g, o, params, resolution))
    means = {k: float(np.mean(np.asarray(v))) for k, v in pair_scores.items()}
    return MetricReport(
        coalition_label=coalition_label,
        cosine=means["cosine"],
        hist=means["hist"],
        dhash=means["dhash"],
        ssim=means["ssim"],
        rgb_ssim=means["rgb_ssim"],
        fid=fid,
        metadata={
            "resolution": resolution,
            "ssim_window_side": params.effective_side(resolution),
            "pairs": len(generated) * len(original),
        },
    )

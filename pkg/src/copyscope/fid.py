"""Frechet distance between Gaussian fits of image feature distributions.

The pipeline is: feature vectors per image -> mean/covariance fit ->
distance = ||mu_r - mu_g||^2 + Tr(S_r + S_g - 2 (S_r S_g)^{1/2}).

The cross term is evaluated through the symmetrized product
S_r^{1/2} S_g S_r^{1/2}, which has the same trace as (S_r S_g)^{1/2} but is
guaranteed symmetric PSD, so no complex arithmetic ever appears. Feature
sources are pluggable: a self-contained pixel embedding ships as default,
and externally extracted deep features enter via interchange files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    ConfigError,
    InsufficientSamplesError,
    NotPsdError,
    NumericError,
)
from .image_core import Image, ImageSet, resize, to_grayscale

BUILTIN_PIXEL_TAG = "builtin-pixel"
PIXEL_EMBED_SIDE = 32
PIXEL_EMBED_DIM = PIXEL_EMBED_SIDE * PIXEL_EMBED_SIDE

FeatureSource = Callable[[Image], np.ndarray]

# negative part tolerated in a computed distance before it is an error
_NEGATIVE_FID_TOLERANCE = 1e-6


@dataclass(frozen=True)
class FeatureSet:
    """An n x d matrix of per-image feature vectors.

    n >= 2 because every consumer fits a covariance. Row labels are
    optional; when present they identify source images in file order.
    """

    matrix: np.ndarray = field(repr=False)
    source_tag: str = BUILTIN_PIXEL_TAG
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {m.shape}")
        if m.shape[0] < 2:
            raise InsufficientSamplesError(
                f"feature set needs >= 2 samples for covariance, got {m.shape[0]}"
            )
        if m.shape[1] < 1:
            raise ValueError("feature dimension must be >= 1")
        if not np.all(np.isfinite(m)):
            raise NumericError("feature matrix contains non-finite values")
        if self.labels is not None and len(self.labels) != m.shape[0]:
            raise ValueError("label count must match sample count")
        m = m.copy(order="C")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class GaussianStats:
    """Mean vector and symmetric covariance fitted to a feature set."""

    mean: np.ndarray = field(repr=False)
    cov: np.ndarray = field(repr=False)
    n: int = 0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (mean.shape[0], mean.shape[0]):
            raise ValueError("mean must be (d,), cov must be (d, d)")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise NumericError("Gaussian stats contain non-finite values")
        _check_symmetry(cov, rel_tol=1e-10)
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(cov))

    @property
    def d(self) -> int:
        return self.mean.shape[0]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = a.copy(order="C")
    a.flags.writeable = False
    return a


def _check_symmetry(m: np.ndarray, rel_tol: float) -> None:
    scale = max(1.0, float(np.abs(m).max()) if m.size else 0.0)
    asym = float(np.abs(m - m.T).max()) if m.size else 0.0
    if asym > rel_tol * scale:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")


def embed_pixels(img: Image) -> np.ndarray:
    """Self-contained surrogate feature: 32x32 grayscale thumbnail in [0, 1].

    Deterministic, d = 1024. Lets the toolkit run end to end without any
    neural network; deep features can be swapped in via interchange files.
    """
    g = resize(to_grayscale(img), PIXEL_EMBED_SIDE, PIXEL_EMBED_SIDE)
    return g.data[:, :, 0].astype(np.float64).ravel() / 255.0


def features_from_images(
    images: ImageSet, source: FeatureSource = embed_pixels, source_tag: str = BUILTIN_PIXEL_TAG
) -> FeatureSet:
    """Stack the per-image feature vectors of an image set, in set order."""
    rows = [np.asarray(source(img), dtype=np.float64) for img in images]
    return FeatureSet(matrix=np.stack(rows), source_tag=source_tag, labels=images.source_labels)


def fit_gaussian(features: FeatureSet | np.ndarray) -> GaussianStats:
    """Column means and unbiased (n-1) sample covariance, symmetry-enforced."""
    m = features.matrix if isinstance(features, FeatureSet) else np.asarray(features, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2:
        raise InsufficientSamplesError("covariance fit needs an (n>=2, d) matrix")
    mean = m.mean(axis=0)
    centered = m - mean
    cov = (centered.T @ centered) / (m.shape[0] - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianStats(mean=mean, cov=cov, n=m.shape[0])


def matrix_sqrt_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues below -tol (tol = 1e-8 * trace(|m|) / d) mean the input is
    not a covariance and raise NotPsdError; small negative eigenvalues
    inside the tolerance are clamped to zero.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix contains non-finite values")
    _check_symmetry(m, rel_tol=1e-10)
    sym = (m + m.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(sym)
    d = m.shape[0]
    tol = 1e-8 * float(np.abs(np.diagonal(sym)).sum()) / d
    if eigvals[0] < -tol:
        raise NotPsdError(f"matrix has eigenvalue {eigvals[0]:.3e} below -{tol:.3e}")
    root = (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T
    return (root + root.T) / 2.0


@dataclass(frozen=True)
class FidBreakdown:
    """Distance value plus the terms and regularization that produced it."""

    value: float
    mean_term: float
    trace_term: float
    epsilon: float  # 0.0 when no regularization was applied


def fid_breakdown(real: GaussianStats, gen: GaussianStats, eps_coeff: float = 1e-6) -> FidBreakdown:
    """Distance between two Gaussian fits, with diagnostics.

    When either covariance is rank-deficient at the working scale (smallest
    eigenvalue below eps = eps_coeff * mean(traces) / d), both covariances
    are shifted by eps*I before the square roots; the shift cancels exactly
    for identical inputs and is reported in the breakdown. Well-conditioned
    inputs are used untouched so closed-form cases are reproduced exactly.
    """
    if real.d != gen.d:
        raise ValueError(f"feature dimensions differ: {real.d} vs {gen.d}")
    tr_r = float(np.trace(real.cov))
    tr_g = float(np.trace(gen.cov))
    eps = eps_coeff * ((tr_r + tr_g) / 2.0) / real.d

    lam_r, q_r = np.linalg.eigh(real.cov)
    lam_g, q_g = np.linalg.eigh(gen.cov)
    regularize = eps > 0.0 and min(float(lam_r[0]), float(lam_g[0])) < eps
    applied = eps if regularize else 0.0

    root_r = (q_r * np.sqrt(np.clip(lam_r + applied, 0.0, None))) @ q_r.T
    root_g = (q_g * np.sqrt(np.clip(lam_g + applied, 0.0, None))) @ q_g.T
    # tr((root_r @ cov_g @ root_r)^(1/2)) equals the nuclear norm of
    # root_r @ root_g; singular values avoid the precision loss of taking
    # square roots of near-zero eigenvalues on rank-deficient inputs
    cross = float(np.linalg.svd(root_r @ root_g, compute_uv=False).sum())

    mean_diff = real.mean - gen.mean
    mean_term = float(mean_diff @ mean_diff)
    trace_term = (tr_r + applied * real.d) + (tr_g + applied * gen.d) - 2.0 * cross
    value = mean_term + trace_term
    if value < 0.0:
        if value <= -_NEGATIVE_FID_TOLERANCE:
            raise NumericError(f"distance {value:.3e} is negative beyond rounding tolerance")
        value = 0.0
    return FidBreakdown(value=value, mean_term=mean_term, trace_term=trace_term, epsilon=applied)


def fid(real: GaussianStats, gen: GaussianStats, eps_coeff: float = 1e-6) -> float:
    """Frechet distance between two Gaussian fits; see fid_breakdown."""
    return fid_breakdown(real, gen, eps_coeff).value


def fid_between_sets(
    real: ImageSet | FeatureSet,
    gen: ImageSet | FeatureSet,
    source: FeatureSource = embed_pixels,
    eps_coeff: float = 1e-6,
) -> float:
    """Fit Gaussians to both sets and return their Frechet distance.

    Image sets are embedded with the given feature source; feature sets
    pass through. Mixing feature dimensions (e.g. builtin pixel features
    against external deep features) is a configuration error.
    """
    fs_real = real if isinstance(real, FeatureSet) else features_from_images(real, source)
    fs_gen = gen if isinstance(gen, FeatureSet) else features_from_images(gen, source)
    if fs_real.d != fs_gen.d:
        raise ConfigError(
            f"feature dimensions differ: {fs_real.d} ({fs_real.source_tag}) vs "
            f"{fs_gen.d} ({fs_gen.source_tag}); use one feature source for both sets"
        )
    return fid(fit_gaussian(fs_real), fit_gaussian(fs_gen), eps_coeff)

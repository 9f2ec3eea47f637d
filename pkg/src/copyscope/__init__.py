"""copyscope: quantify each model's contribution to image similarity in an
AI image-generation workflow.

The toolkit measures how close coalition-generated image sets come to an
original work (cosine, histogram intersection, difference hash, SSIM, and
a Frechet distance over feature distributions), then splits the similarity
gain over the baseline pipeline across the participating models with exact
or sampled Shapley values, leave-one-out margins, and dropout analysis.
"""

from .ablation import AblationReport, ablate
from .errors import (
    AxiomViolationError,
    CompletenessError,
    ConfigError,
    CopyscopeError,
    DatasetError,
    DecodeError,
    InsufficientSamplesError,
    MissingCoalitionError,
    NotPsdError,
    NumericError,
    SchemaError,
    UndefinedSimilarityError,
)
from .fid import (
    FeatureSet,
    FidBreakdown,
    GaussianStats,
    embed_pixels,
    features_from_images,
    fid,
    fid_between_sets,
    fid_breakdown,
    fit_gaussian,
    matrix_sqrt_psd,
)
from .game import (
    AttributionMethod,
    AttributionResult,
    AxiomReport,
    Coalition,
    ComponentKind,
    NormalizeMode,
    Orientation,
    Player,
    ValueTable,
    check_axioms,
    load_value_table,
    loo,
    normalize,
    rank_players,
    shapley_exact,
    shapley_sampled,
)
from .image_core import (
    Image,
    ImageSet,
    load_image,
    load_image_set,
    resize,
    to_grayscale,
)
from .interchange import read_features, write_features_binary, write_features_csv
from .manifest import (
    CoalitionManifest,
    DataSource,
    FeatureSourceKind,
    RunConfig,
    load_manifest,
    value_table_from_manifest,
)
from .metrics import (
    MetricReport,
    SsimParams,
    cosine_similarity,
    dhash,
    dhash_similarity,
    hist_similarity,
    metric_report,
    rgb_ssim,
    ssim,
)
from .version import __version__

__all__ = [
    "AblationReport",
    "AttributionMethod",
    "AttributionResult",
    "AxiomReport",
    "AxiomViolationError",
    "Coalition",
    "CoalitionManifest",
    "CompletenessError",
    "ComponentKind",
    "ConfigError",
    "CopyscopeError",
    "DataSource",
    "DatasetError",
    "DecodeError",
    "FeatureSet",
    "FeatureSourceKind",
    "FidBreakdown",
    "GaussianStats",
    "Image",
    "ImageSet",
    "InsufficientSamplesError",
    "MetricReport",
    "MissingCoalitionError",
    "NormalizeMode",
    "NotPsdError",
    "NumericError",
    "Orientation",
    "Player",
    "RunConfig",
    "SchemaError",
    "SsimParams",
    "UndefinedSimilarityError",
    "ValueTable",
    "__version__",
    "ablate",
    "check_axioms",
    "cosine_similarity",
    "dhash",
    "dhash_similarity",
    "embed_pixels",
    "features_from_images",
    "fid",
    "fid_between_sets",
    "fid_breakdown",
    "fit_gaussian",
    "hist_similarity",
    "load_image",
    "load_image_set",
    "load_manifest",
    "load_value_table",
    "loo",
    "matrix_sqrt_psd",
    "metric_report",
    "normalize",
    "rank_players",
    "read_features",
    "resize",
    "rgb_ssim",
    "shapley_exact",
    "shapley_sampled",
    "ssim",
    "to_grayscale",
    "value_table_from_manifest",
    "write_features_binary",
    "write_features_csv",
]

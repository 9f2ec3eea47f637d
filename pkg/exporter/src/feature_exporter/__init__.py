"""Standalone exporter writing feature interchange files for image sets.

Couples to the analysis toolkit only through the "CSF1" file format; see
export.py for the format and backbone.py for the embeddings.
"""

from .backbone import DEFAULT_BACKBONE, SPECS, Backbone, BackboneSpec
from .export import (
    DatasetError,
    DecodeError,
    ExportError,
    ExportJob,
    export_features,
    sidecar_path,
)
from .version import __version__

__all__ = [
    "Backbone",
    "BackboneSpec",
    "DEFAULT_BACKBONE",
    "DatasetError",
    "DecodeError",
    "ExportError",
    "ExportJob",
    "SPECS",
    "export_features",
    "sidecar_path",
    "__version__",
]

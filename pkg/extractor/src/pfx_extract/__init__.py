"""Offline image feature extraction producing PFXFEAT1 files."""

from .encoders import DEFAULT_ENCODER, ClipEncoder, PixelEncoder, make_encoder
from .errors import (
    BadLayout,
    BadMagic,
    BadNorm,
    BadVersion,
    EncoderUnavailable,
    ExtractError,
    ManifestError,
    NoRecords,
    ValidationError,
)
from .extract import ExtractReport, extract
from .featfile import (
    MAGIC,
    NORM_TOL,
    ValidationReport,
    read_feature_file,
    validate_file,
    write_feature_file,
)
from .manifest import ExtractManifest, ManifestEntry, load_manifest

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_ENCODER",
    "ClipEncoder",
    "PixelEncoder",
    "make_encoder",
    "BadLayout",
    "BadMagic",
    "BadNorm",
    "BadVersion",
    "EncoderUnavailable",
    "ExtractError",
    "ManifestError",
    "NoRecords",
    "ValidationError",
    "ExtractReport",
    "extract",
    "MAGIC",
    "NORM_TOL",
    "ValidationReport",
    "read_feature_file",
    "validate_file",
    "write_feature_file",
    "ExtractManifest",
    "ManifestEntry",
    "load_manifest",
]

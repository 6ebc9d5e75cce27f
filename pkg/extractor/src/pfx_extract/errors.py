"""Error taxonomy for the extraction tool.

Everything raised on purpose derives from ExtractError so callers (and the
CLI) can catch one base class. Validation problems get their own subtree.
"""


class ExtractError(Exception):
    pass


class ManifestError(ExtractError):
    """Manifest file is malformed or violates its invariants."""


class EncoderUnavailable(ExtractError):
    """Requested encoder is unknown or its dependencies are missing."""


class NoRecords(ExtractError):
    """Every manifest entry failed, so there is nothing to write."""


class ValidationError(ExtractError):
    pass


class BadMagic(ValidationError):
    """File does not start with the PFXFEAT magic."""


class BadVersion(ValidationError):
    """Recognized magic but an unsupported version byte."""


class BadLayout(ValidationError):
    """Structural problem: truncation, trailing bytes, impossible counts."""


class BadNorm(ValidationError):
    """A stored feature vector is not unit length (or not finite)."""

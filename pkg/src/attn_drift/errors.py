"""Exception types shared across the package.

Every error raised on malformed inputs names the offending file, key, or
tensor index so batch runs can report actionable failures.
"""


class AttnDriftError(Exception):
    """Base class for all package errors."""


class DumpFormatError(AttnDriftError):
    """A dump file violates the binary container contract."""


class BadMagicError(DumpFormatError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersionError(DumpFormatError):
    """Container version is not supported by this reader."""


class PayloadSizeError(DumpFormatError):
    """Payload byte count disagrees with the header shape."""


class MissingSidecarError(DumpFormatError):
    """The `<path>.meta.json` sidecar is absent."""


class PayloadValidationError(AttnDriftError):
    """Payload content violates a hard invariant (e.g. NaN in features)."""


class SchemaValidationError(AttnDriftError):
    """A JSON document is missing required keys or holds out-of-range values."""


class DegenerateInputError(AttnDriftError):
    """An operation received input with no usable signal (zero rows,
    zero variance, too few samples)."""


class AlignmentError(AttnDriftError):
    """Two artifacts that must share image ordering do not."""


class LayerMismatchError(AttnDriftError):
    """Layer counts disagree between artifacts that must be compared."""


class DuplicateRunError(AttnDriftError):
    """Two runs share the same (dataset, method, lr, seed) key or run_id."""

"""Exception hierarchy.

``TipError`` subclasses are domain failures (CLI exit status 1);
``ConfigError`` and ``SchemaError`` are input/usage problems (exit status 2).
Unreadable paths surface as the builtin ``OSError`` family.
"""


class TipError(Exception):
    """Base class for domain failures of the projection pipeline."""


class DecodeError(TipError):
    """Raster file is corrupt, truncated or in an unsupported format."""


class EmptyMask(TipError):
    """A mask that must contain foreground has no set bits."""


class EmptySignature(TipError):
    """No threat pixels found below the background threshold."""


class NoValidPlacement(TipError):
    """Rejection sampling ran out of attempts."""


class SignatureTooLarge(TipError):
    """The signature does not fit inside the target frame at all."""


class DegenerateComposite(TipError):
    """No source pixel passed the threat-threshold test, so nothing was blended."""


class ExhaustedRetries(TipError):
    """A dataset job failed on every resampled (bag, threat) pair."""


class DomainError(TipError, ValueError):
    """Argument outside the mathematical domain of a formula."""


class UnknownCategory(TipError):
    """Detections reference a category absent from the ground truth."""


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""


class SchemaError(ValueError):
    """Structured document does not match the expected layout."""


class DegenerateClassWarning(UserWarning):
    """A class is too small to populate every split; it went to train."""

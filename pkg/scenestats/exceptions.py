class ScenestatsError(Exception):
    """
    Base class for every data error raised by scenestats.

    Management commands map these to exit code 2; anything that is not a
    ScenestatsError is treated as an internal failure.
    """


# Netpbm parsing

class NetpbmError(ScenestatsError, ValueError):
    """A netpbm payload could not be decoded."""


class UnsupportedFormat(NetpbmError):
    pass


class MaxvalTooLarge(NetpbmError):
    pass


class TruncatedPayload(NetpbmError):
    pass


class MalformedHeader(NetpbmError):
    pass


class InvalidSample(NetpbmError):
    pass


class OutOfBounds(ScenestatsError, ValueError):
    """A crop rectangle does not fit inside the frame."""


# Manifests

class ManifestError(ScenestatsError, ValueError):
    pass


class MissingKey(ManifestError):
    pass


class InvalidValue(ManifestError):
    pass


# Statistics

class NotNormalized(ScenestatsError, ValueError):
    pass


class FrameTooSmall(ScenestatsError, ValueError):
    pass


# Homography estimation

class InsufficientMatches(ScenestatsError, ValueError):
    pass


class DegenerateConfiguration(ScenestatsError, ValueError):
    pass


class NonInvertible(ScenestatsError, ValueError):
    pass


# Synthetic sequences, analysis and reporting

class InvalidScript(ScenestatsError, ValueError):
    pass


class EmptySequence(ScenestatsError, ValueError):
    pass


class AllMissing(ScenestatsError, ValueError):
    pass


class ExportError(ScenestatsError, OSError):
    """Writing or reading an artifact file failed (the IoError case)."""

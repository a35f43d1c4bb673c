"""Exception hierarchy shared across the toolkit."""


class FsfError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(FsfError):
    """Array shapes or extents violate an operation's contract."""


class ParameterError(FsfError):
    """A scalar argument is outside its legal range."""


class DataError(FsfError):
    """A corpus, manifest, or dataset is unusable (missing class, empty, ...)."""


class NumericError(FsfError):
    """A computation produced NaN/Inf or otherwise diverged."""


class ConfigError(FsfError):
    """An experiment configuration is malformed."""


class FormatError(FsfError):
    """A serialized file (checkpoint, image) is corrupt or unsupported."""

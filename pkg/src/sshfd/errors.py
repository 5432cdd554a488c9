"""Exception hierarchy shared across the package."""


class SshfdError(Exception):
    """Base class for all package-specific failures."""


class DegenerateGeometryError(SshfdError, ValueError):
    """Raised when a bounding box or projection has zero/negative extent."""


class MissingRootError(SshfdError, ValueError):
    """Raised when a pose operation needs a visible hip joint and it is absent."""


class ShapeError(SshfdError, ValueError):
    """Raised on array dimension or width mismatches."""


class ParameterError(SshfdError, ValueError):
    """Raised on invalid configuration or operation parameters."""


class StateError(SshfdError, RuntimeError):
    """Raised when an operation is called out of order (e.g. backward before forward)."""


class DegenerateLabelsError(SshfdError, ValueError):
    """Raised when a classification dataset is empty or single-class."""


class CheckpointError(SshfdError, ValueError):
    """Raised when a checkpoint file is malformed or incompatible."""


class DataError(SshfdError, ValueError):
    """Raised on malformed dataset records or files."""


class NumericError(SshfdError, RuntimeError):
    """Raised when training diverges (NaN/inf loss)."""

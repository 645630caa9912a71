"""Exception types raised across the package."""


class TopoMambaError(Exception):
    """Base class for all package errors."""


class ComplexError(TopoMambaError, ValueError):
    """Invalid simplicial complex input or out-of-range index/rank."""


class CliqueSizeError(ComplexError):
    """A maximal clique exceeds the configured size ceiling."""

    def __init__(self, size: int, ceiling: int):
        super().__init__(f"clique of size {size} exceeds the ceiling of {ceiling} vertices")
        self.size = size
        self.ceiling = ceiling


class ShapeError(TopoMambaError, ValueError):
    """Array shapes or widths do not match."""


class NumericError(TopoMambaError, ArithmeticError):
    """A non-finite value appeared during a computation."""


class CheckpointError(TopoMambaError):
    """Checkpoint could not be read."""


class CorruptCheckpointError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class DatasetFormatError(TopoMambaError, ValueError):
    """Malformed dataset directory."""


class ConfigError(TopoMambaError, ValueError):
    """Invalid configuration value or unknown key."""

"""Exceptions shared across the package."""


class DataError(ValueError):
    """Malformed input file, invalid schedule, or degenerate feature."""


class TrainingDiverged(RuntimeError):
    """Q-network loss became non-finite; training aborted."""

"""Exception types shared across the package."""


class SparseAnnError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SparseAnnError):
    """Invalid configuration (bad shape, unknown keys, inconsistent options)."""


class DataError(SparseAnnError):
    """Invalid or degenerate input data (parse failures, constant response, ...)."""


class NumericalError(SparseAnnError):
    """Numerical failure during optimization (divergence, non-finite values)."""


class DegenerateParameterError(SparseAnnError):
    """A normalized weight row has (numerically) zero norm."""

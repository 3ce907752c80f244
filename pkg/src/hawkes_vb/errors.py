"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 1, I/O errors
-> 2, DataError -> 3, NumericalError / SimulationDivergedError -> 4.
"""


class HawkesVBError(Exception):
    """Base class for package errors."""


class ConfigError(HawkesVBError):
    """Invalid configuration (schema violation, inconsistent settings)."""


class DataError(HawkesVBError):
    """Invalid event data or malformed input files."""


class DomainError(HawkesVBError):
    """Argument outside the mathematical domain of an operation."""


class NumericalError(HawkesVBError):
    """Numerical failure (non-SPD matrix after jitter, divergence)."""


class SimulationDivergedError(NumericalError):
    """Thinning exceeded the event cap; parameters appear explosive."""


class UnsupportedLinkError(HawkesVBError):
    """Operation requires a link kind other than the one supplied."""


class NoGapError(HawkesVBError):
    """Norm values show no gap; a threshold override is required."""

"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class SleepStageError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(SleepStageError):
    """Invalid configuration or usage (bad parameter, missing config key)."""


class DataError(SleepStageError):
    """Malformed or inconsistent input data (records, annotations, files)."""


class NumericalError(SleepStageError):
    """Non-finite values or other numerical failure during computation."""

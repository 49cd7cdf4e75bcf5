"""Exception types shared across the package.

Plain ``ValueError`` is used for bad arguments; the classes below cover the
remaining failure modes that callers (and the CLI exit-code mapping) need to
tell apart.
"""


class DataFormatError(Exception):
    """A data file is malformed (bad magic, truncation, ragged rows, ...)."""


class NumericalError(Exception):
    """A numerical routine failed, e.g. the SVD did not converge."""


class NotTrainedError(RuntimeError):
    """An operation requires trained state that is not present yet."""

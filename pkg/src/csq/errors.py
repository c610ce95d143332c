"""Exception hierarchy shared by every csq module.

Each class carries a short ``kind`` label; the CLI prefixes messages with it
so callers (and shell scripts) can grep a stable token such as
``parameter error`` or ``format error``.
"""


class CsqError(Exception):
    """Base class for all errors raised by this package."""

    kind = "error"


class ParameterError(CsqError):
    """A scalar argument is outside its admissible range."""

    kind = "parameter error"


class ShapeError(CsqError):
    """An array argument has the wrong length or dimensions."""

    kind = "shape error"


class InputError(CsqError):
    """Input data is unusable (non-finite entries, empty where forbidden)."""

    kind = "input error"


class DegenerateInputError(CsqError):
    """Input data is degenerate for the requested operation (e.g. all zero)."""

    kind = "degenerate input error"


class CapacityError(CsqError):
    """Requested sizes exceed what the fixed-width integer paths can hold."""

    kind = "capacity error"


class IncompatibilityError(CsqError):
    """Two artifacts were produced under different parameters and cannot mix."""

    kind = "incompatibility error"


class FormatError(CsqError):
    """A file is not in a recognized format or violates its declared layout."""

    kind = "format error"


class CorruptionError(CsqError):
    """A file has the right format but inconsistent sizes or truncated data."""

    kind = "corruption error"

"""Exception hierarchy shared by the library and the CLI."""


class MFPError(Exception):
    """Base class for all errors raised by mfpredict."""


class DataError(MFPError, ValueError):
    """Malformed or unsuitable input data (ragged CSV, bad values, ...)."""


class SchemaError(DataError):
    """Column names, kinds or levels do not match what was expected."""


class DegenerateInputError(MFPError, ValueError):
    """A metric is undefined for the given input (e.g. zero reference error)."""


class ConvergenceError(MFPError, RuntimeError):
    """An iterative procedure could not reach its target."""


class ModelFormatError(MFPError, ValueError):
    """A model file is corrupt, truncated or of an unsupported version."""

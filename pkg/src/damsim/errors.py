"""Package exception types, mapped onto CLI exit codes."""


class DataError(Exception):
    """Malformed, inconsistent or insufficient input data (exit code 3)."""


class ModelError(Exception):
    """Estimation or simulation failure (exit code 4)."""

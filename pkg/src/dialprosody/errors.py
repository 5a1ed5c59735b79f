"""Exception hierarchy shared across the package.

``DataError`` covers unreadable or invalid inputs (CLI exit code 2);
``SplitConstraintError`` covers an unsatisfiable split constraint (exit 3).
"""


class DataError(Exception):
    """Invalid or unreadable input data."""


class ManifestError(DataError):
    """Malformed or inconsistent corpus manifest."""


class AudioError(DataError):
    """Unreadable or unsupported audio."""


class FeatureError(DataError):
    """Invalid feature computation input (bad frame range, empty span, ...)."""


class SplitConstraintError(Exception):
    """The speaker-sharing constraint could not be satisfied."""

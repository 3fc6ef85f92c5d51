"""Exception hierarchy shared across the toolkit.

Every data-level failure raises a subclass of :class:`OlitError` so the CLI
can map it to a dedicated exit code and the HTTP layer to a status code.
"""

from __future__ import annotations


class OlitError(Exception):
    """Base class for all domain errors."""


class MalformedCsvError(OlitError):
    """Bad header or wrong number of fields in a CSV row."""

    def __init__(self, message: str, row_index: int | None = None):
        self.row_index = row_index
        if row_index is not None:
            message = f"{message} (row {row_index})"
        super().__init__(message)


class BadTimestampError(OlitError):
    """Unparseable timestamp in a log row."""

    def __init__(self, value: str, row_index: int):
        self.value = value
        self.row_index = row_index
        super().__init__(f"unparseable timestamp {value!r} (row {row_index})")


class EmptyFileError(OlitError):
    """Input file has no content (not even a header)."""


class DuplicateStudentError(OlitError):
    """Same student id appears twice in a grades file."""

    def __init__(self, student_id: str):
        self.student_id = student_id
        super().__init__(f"duplicate student id {student_id!r} in grades data")


class EmptyFeatureSetError(OlitError):
    """A window selection left no feature columns (e.g. grades-only week 1)."""


class ClassTooSmallError(OlitError):
    """A grade class has too few samples for the requested operation."""

    def __init__(self, label: int, count: int, needed: int):
        self.label = label
        self.count = count
        super().__init__(
            f"class {label} has {count} sample(s); at least {needed} required"
        )


class SingleClassError(OlitError):
    """Training labels are all identical; a classifier cannot be fit."""


class NonFiniteLossError(OlitError):
    """Loss or gradient became non-finite; indicates an internal bug."""


class DimensionMismatchError(OlitError):
    """A feature vector does not match the model's feature count."""

    def __init__(self, expected: int, got: int):
        super().__init__(f"expected {expected} features, got {got}")


class EmptyTrainingSetError(OlitError):
    """No rows supplied to a fitting routine."""


class EmptyHistogramError(OlitError):
    """Impurity requested for an empty class histogram."""


class EmptyTargetSetError(OlitError):
    """Counterfactual target class set is empty."""


class PathNotInTreeError(OlitError):
    """A tracked path rule does not belong to the supplied tree."""


class UnknownFeatureError(OlitError):
    """A feature name is missing from a glossary or matrix."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown feature {name!r}")


class UnknownStudentError(OlitError):
    """Requested student id is not present in the cohort."""

    def __init__(self, student_id: str):
        self.student_id = student_id
        super().__init__(f"unknown student id {student_id!r}")


class LengthMismatchError(OlitError):
    """Prediction and label vectors have different lengths."""


class EmptyInputError(OlitError):
    """A metric was requested over zero items."""


class VersionMismatchError(OlitError):
    """Bundle file format version is not supported."""

    def __init__(self, found, supported: int):
        super().__init__(f"bundle format version {found!r} not supported (expected {supported})")


class CorruptBundleError(OlitError):
    """Bundle file failed checksum or structural validation."""


class InvalidConfigError(OlitError):
    """A configuration object or file failed validation."""

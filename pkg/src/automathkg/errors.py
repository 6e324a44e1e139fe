"""Exception hierarchy shared across the toolkit.

Two families matter to callers: :class:`DataError` marks bad or
inconsistent input (CLI exit code 2), :class:`BackendError` marks an
unreachable or misbehaving LLM/embedding service (CLI exit code 3).
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for every exception raised by this package."""


class DataError(ToolkitError):
    """Invalid, inconsistent, or missing data."""


class BackendError(ToolkitError):
    """An external LLM or embedding backend failed or returned junk."""


# -- knowledge graph ---------------------------------------------------------

class DuplicateIdError(DataError):
    pass


class DuplicateTitleError(DataError):
    pass


class UnknownEntityError(DataError):
    pass


class InvalidEntityError(DataError):
    """An entity violates the schema invariants."""


class MalformedRecordError(DataError):
    """A KG file line failed to parse or validate."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class SchemaVersionMismatchError(DataError):
    pass


# -- corpus ingestion --------------------------------------------------------

class UnbalancedEnvironmentError(DataError):
    """A LaTeX environment was opened but never closed (or vice versa)."""

    def __init__(self, env: str, offset: int):
        self.env = env
        self.offset = offset
        super().__init__(f"unbalanced environment {env!r} at byte offset {offset}")


class MissingBoundFieldError(DataError):
    def __init__(self, index: int, field: str):
        self.index = index
        self.field = field
        super().__init__(f"record {index}: missing bound field {field!r}")


# -- LLM gateway -------------------------------------------------------------

class MissingContextError(DataError):
    def __init__(self, placeholder: str):
        self.placeholder = placeholder
        super().__init__(f"template context is missing {placeholder!r}")


class BackendUnavailableError(BackendError):
    pass


class ParseFailureError(BackendError):
    """A backend response could not be parsed after the retry budget."""


class AmbiguousFieldError(ParseFailureError):
    """A field response named zero or several of the closed field choices."""


class UnknownLabelError(ParseFailureError):
    """A response used a label outside the closed tactic set."""


class UndecidableResponseError(ParseFailureError):
    """A judgment response stayed unusable after the retry budget."""


class IdNotInCandidatesError(ParseFailureError):
    """A best-candidate response named an id outside the candidate set."""


# -- vector index ------------------------------------------------------------

class DimensionMismatchError(DataError):
    pass


class DegenerateVectorError(DataError):
    """A vector with (near-)zero norm cannot be normalized."""


class EmptyIndexError(DataError):
    pass


class MalformedFileError(DataError):
    pass


class ChecksumMismatchError(DataError):
    pass


class MissingVectorError(DataError):
    def __init__(self, entity_id: int):
        self.entity_id = entity_id
        super().__init__(f"no vector stored for entity {entity_id}")


# -- fusion / completion / eval ----------------------------------------------

class UnknownTargetError(DataError):
    pass


class EntityNotIncompleteError(DataError):
    pass


class InsufficientEntitiesError(DataError):
    def __init__(self, entity_type: str, wanted: int, available: int):
        self.entity_type = entity_type
        self.wanted = wanted
        self.available = available
        super().__init__(
            f"cannot sample {wanted} entities of type {entity_type!r}, "
            f"only {available} available"
        )


class EmptyTriplesError(DataError):
    pass

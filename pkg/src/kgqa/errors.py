"""Exception hierarchy shared across the package.

``KgqaError`` is the root; ``DataError`` covers malformed inputs and maps to
CLI exit code 2, ``KgUnreachable`` maps to exit code 3.
"""


class KgqaError(Exception):
    """Base class for all errors raised by this package."""


class DataError(KgqaError):
    """Malformed or inconsistent input data."""


# --- skeleton ---------------------------------------------------------------

class SkeletonParseError(DataError):
    """A generated query string could not be parsed into a skeleton AST."""


class MalformedTags(SkeletonParseError):
    """Unbalanced or interleaved <ent>/<rel> tags."""


class EmptyLabel(SkeletonParseError):
    """A tag pair with blank content."""


class NotAQuery(SkeletonParseError):
    """No SPARQL verb token found in the input."""


class MissingBinding(DataError):
    """A slot was left unbound when serializing a grounded query."""


class UnknownIdentifier(DataError):
    """A KG identifier in a gold query is missing from the catalogs."""


class MissingEmbedding(DataError):
    """An entity referenced by a gold query has no stored embedding."""


# --- label_index ------------------------------------------------------------

class CorruptRecord(DataError):
    """An ingest line could not be parsed into an entity record."""


class EmptyQuery(DataError):
    """A search query that tokenizes to nothing."""


class IndexFormatError(DataError):
    """A persisted index file has a bad magic/version or truncated section."""


# --- embeddings -------------------------------------------------------------

class LengthMismatch(DataError):
    """Two vectors of different lengths where equal lengths are required."""


# --- relation_match ---------------------------------------------------------

class DimensionMismatch(DataError):
    """Query vector dimension differs from the catalog dimension."""


class EmptyCatalog(DataError):
    """Relation matching requested against an empty catalog."""


# --- mini_kg ----------------------------------------------------------------

class SparqlParseError(DataError):
    """Query text is not parseable at all."""


class UnsupportedSyntax(DataError):
    """Query parses as SPARQL but uses constructs outside the supported subset."""


class TransportError(KgqaError):
    """Network failure talking to a SPARQL endpoint (after retries)."""


class QueryTimeout(TransportError):
    """Endpoint did not answer within the configured timeout."""


class EndpointError(KgqaError):
    """Endpoint returned an HTTP error status."""

    def __init__(self, status: int, message: str):
        super().__init__(f"endpoint returned {status}: {message}")
        self.status = status


class MalformedResults(DataError):
    """Endpoint response is not valid SPARQL JSON results."""


# --- grounding --------------------------------------------------------------

class EmptySlotCandidates(DataError):
    """A slot has zero candidates, so its beam cannot be enumerated."""


class KgUnreachable(KgqaError):
    """KG transport kept failing; the question is recorded as unanswered."""

    def __init__(self, message: str, executed_count: int = 0):
        super().__init__(message)
        self.executed_count = executed_count


class LimitExceeded(KgqaError):
    """Per-question execution budget (queries or wall clock) exhausted."""

    def __init__(self, message: str, executed_count: int = 0):
        super().__init__(message)
        self.executed_count = executed_count


# --- ingest -----------------------------------------------------------------

class FileError(DataError):
    """Dataset file missing or unreadable."""


class SchemaError(DataError):
    """Dataset file does not match the published shape."""

    def __init__(self, message: str, record_index: int | None = None):
        if record_index is not None:
            message = f"record {record_index}: {message}"
        super().__init__(message)
        self.record_index = record_index


# --- eval -------------------------------------------------------------------

class EmptyInput(DataError):
    """Aggregation over zero questions."""

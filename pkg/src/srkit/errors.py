"""Exception types shared across the package."""

from __future__ import annotations


class SrkitError(Exception):
    """Base class for all srkit errors."""


class InputError(SrkitError, ValueError):
    """A caller-supplied value violates an operation's precondition."""


class NotFoundError(SrkitError, LookupError):
    """A referenced descriptor, term, or session does not exist."""


class EmptyContextError(InputError):
    """No seed concepts survived extraction; nothing to expand."""


class IngestError(SrkitError):
    """Descriptor source could not be parsed.

    ``offset`` is the byte offset (or line number for line-oriented
    sources) where parsing failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class DuplicateDescriptorError(IngestError):
    def __init__(self, ui: str):
        super().__init__(f"duplicate descriptor UI: {ui}")
        self.ui = ui


class GatewayError(SrkitError):
    """Chat gateway failure (provider, transport, or cassette)."""


class ProviderError(GatewayError):
    """Live provider failed after retries or timed out."""


class CassetteMissError(GatewayError):
    def __init__(self, fingerprint: str):
        super().__init__(f"no cassette entry for fingerprint {fingerprint}")
        self.fingerprint = fingerprint


class GenerationError(SrkitError):
    """Query generation produced nothing usable."""


class QuerySyntaxError(SrkitError):
    """Boolean query text failed to parse; ``offset`` is 0-based."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class QueryStructureError(SrkitError):
    """A Boolean query tree violates its structural invariants."""


class TransportError(SrkitError):
    """HTTP/network failure talking to a remote API, after retries."""


class RemoteError(SrkitError):
    """The remote API returned an error payload."""


class RecordParseError(SrkitError):
    """Article XML could not be parsed; names the offending pmid block."""

    def __init__(self, message: str, pmid: str | None = None):
        super().__init__(message)
        self.pmid = pmid


class DuplicatePassageError(SrkitError):
    pass


class DimensionError(SrkitError):
    pass


class EmptyIndexError(SrkitError):
    pass


class StorageError(SrkitError):
    pass


class RevisionConflictError(StorageError):
    def __init__(self, session_id: str, attempted: int, stored: int):
        super().__init__(
            f"stale write for session {session_id}: "
            f"revision {attempted} but {stored} already stored"
        )
        self.session_id = session_id
        self.attempted = attempted
        self.stored = stored


class UnknownReferenceError(SrkitError):
    """Feedback or an edit referenced an item the session does not hold."""


class ConfigError(SrkitError):
    pass


class StageError(SrkitError):
    """Pipeline stage failure carrying the stage name and the cause."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause

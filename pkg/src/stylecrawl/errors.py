"""Exception hierarchy. The CLI maps the three branches to exit codes."""


class StyleCrawlError(Exception):
    """Base for all errors raised by this package."""


class ConfigError(StyleCrawlError):
    """Bad run configuration: unknown strategy, missing model, invalid budget."""


class DataError(StyleCrawlError):
    """Malformed or inconsistent data: corpora, snapshots, model files."""


class BackendError(StyleCrawlError):
    """Backend failures: unreachable endpoint, broken app spec, protocol errors."""


class MalformedSnapshotError(DataError):
    """Snapshot adjacency is not a single rooted tree."""


class IncompleteObservationError(DataError):
    """A raw element observation is missing a required computed-style property."""


class EmptyClassError(DataError):
    """An operation that needs both classes got a single-class corpus."""


class CannotSplitError(DataError):
    """Site-level split requested on a corpus with fewer than two sites."""


class CorpusFormatError(DataError):
    """Corpus file failed to parse; message carries the line number."""


class SchemaMismatchError(DataError):
    """Feature or signature schemas of two artifacts do not line up."""


class ModelFormatError(DataError):
    """Model file is truncated, unversioned, or carries a wrong schema."""


class AppSpecError(BackendError):
    """Mock-app spec file failed validation."""


class ConnectError(BackendError):
    """Could not open the DevTools WebSocket endpoint."""


class ProtocolError(BackendError):
    """DevTools command failed or the wire protocol was violated."""


class StaleCandidateError(BackendError):
    """The targeted element vanished from the live DOM; the engine drops it."""

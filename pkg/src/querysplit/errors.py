"""Exception hierarchy shared across the package."""


class QuerySplitError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(QuerySplitError):
    """A configuration object or file is invalid."""


class PipelineError(QuerySplitError):
    """A pipeline run failed part-way through.

    Attributes:
        stage_index: index of the failing stage.
        step: causal step number (1-based) when the failure happened inside
            a query-by-query completion loop, else None.
        partial: sub-query outputs produced before the failure.
    """

    def __init__(self, message, *, stage_index=None, step=None, partial=()):
        super().__init__(message)
        self.stage_index = stage_index
        self.step = step
        self.partial = tuple(partial)


class BackendError(QuerySplitError):
    """Base class for generation-backend failures."""


class BackendTimeout(BackendError):
    """The backend did not answer within the configured timeout."""


class BackendConnectionError(BackendError):
    """The backend could not be reached."""


class BackendServerError(BackendError):
    """The backend answered with a 5xx status."""


class BackendRejectedError(BackendError):
    """The backend rejected the request (4xx); not retried."""


class MalformedResponseError(BackendError):
    """The backend answered with a payload that does not match the wire contract."""


class ScriptExhaustedError(BackendError):
    """A scripted backend ran out of scripted outputs."""


class UnknownRequestError(BackendError):
    """A gold-oracle backend has no entry for the request."""


class DatasetValidationError(QuerySplitError):
    """A dataset record violates the schema or an instance invariant."""

    def __init__(self, message, *, line=None, field=None):
        detail = message
        if field is not None:
            detail = f"{detail} (field: {field})"
        if line is not None:
            detail = f"line {line}: {detail}"
        super().__init__(detail)
        self.line = line
        self.field = field


class MetricNotApplicableError(QuerySplitError):
    """A metric's denominator is empty, e.g. no rewritten reference queries."""

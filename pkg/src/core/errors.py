""" Exceptions raised across the tkgqa packages. """


class TkgqaError(Exception):
    """Root of every error raised on purpose by this project."""


# Knowledge graph input
class MalformedTimestamp(TkgqaError, ValueError):
    """Raised when a string is not a canonical ISO prefix timestamp."""


class MalformedLine(TkgqaError, ValueError):
    """Raised when a line of a TKG file cannot be parsed into a fact."""

    def __init__(self, line_no, reason):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class TkgIoError(TkgqaError, OSError):
    """Raised when a TKG or dataset file cannot be read."""


# Retrieval
class EmbedderUnavailable(TkgqaError):
    """Raised when an embedding backend cannot produce a vector."""


# LLM gateway
class UnknownTemplate(TkgqaError, KeyError):
    """Raised when a prompt template id is not registered."""


class FixtureMiss(TkgqaError):
    """Raised by the scripted backend when no fixture matches a request."""

    def __init__(self, request_hash, tag=None):
        self.request_hash = request_hash
        self.tag = tag
        where = f" (question {tag})" if tag else ""
        super().__init__(f"no scripted response for request {request_hash}{where}")


class CacheMiss(FixtureMiss):
    """Raised in cached mode when the response cache has no entry."""


class LlmServiceError(TkgqaError):
    """Base class for failures talking to a live model endpoint."""


class ApiError(LlmServiceError):
    """Raised when the live endpoint keeps failing after the retry budget."""

    def __init__(self, message, status=None, retries=0):
        self.status = status
        self.retries = retries
        super().__init__(f"{message} (status={status}, retries={retries})")


class LlmTimeout(LlmServiceError):
    """Raised when the live endpoint keeps timing out after the retry budget."""


class MalformedResponse(TkgqaError, ValueError):
    """Raised when a response cannot be parsed even after the repair nudge."""


# Decomposition and solving
class MalformedDecomposition(TkgqaError, ValueError):
    """Raised when the decomposition response is not a usable question tree."""


class PlaceholderViolation(TkgqaError, ValueError):
    """Raised when a sub-question refers to itself or to a later sibling."""


class DepthExceeded(TkgqaError):
    """Raised when a question tree is deeper than the configured cap."""


class MissingPlaceholderAnswer(TkgqaError, KeyError):
    """Raised when a ``#j`` token has no answer to substitute."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"no answer available for placeholder #{index}")


# Evaluation
class EmptyRecordSet(TkgqaError, ValueError):
    """Raised when a metric is asked for over zero records."""


class UndefinedRecall(TkgqaError, ValueError):
    """Raised when recall is asked for a question without gold facts."""


# Runs
class ConfigError(TkgqaError, ValueError):
    """Raised when a run configuration is invalid."""


class StageError(TkgqaError):
    """Wraps a failure of one pipeline stage for one question."""

    def __init__(self, message, question_id=None):
        self.question_id = question_id
        super().__init__(message)

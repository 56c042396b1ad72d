"""Exception types shared across the pipeline stages."""


class PipelineError(Exception):
    """Base class for every error this package raises on purpose."""


class MalformedLineError(PipelineError):
    """A KB dump line could not be parsed (strict mode only)."""

    def __init__(self, line_number: int, line: str, reason: str = ""):
        self.line_number = line_number
        self.line = line
        self.reason = reason
        msg = f"malformed line {line_number}: {line!r}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class EmptyResultError(PipelineError):
    """A filter removed every triple; the KB and dataset do not match."""


class UnknownEntityError(PipelineError):
    """An entity id is not present in the knowledge base."""


class EmptyTopicsError(PipelineError):
    """Subgraph extraction was asked to start from no topic entities."""


class MissingGoldError(PipelineError):
    """A question record has no annotated topic entity."""


class GoldMismatchError(PipelineError):
    """A link result has no matching gold record."""


class MissingSurfaceError(PipelineError):
    """No surface form is known for an entity that must be verbalized."""


class EmptyNeedleError(PipelineError):
    """Fuzzy matching was called with an empty needle."""


class NoCandidatesError(PipelineError):
    """A passage ended up with an empty candidate-span table."""


class RemoteUnavailableError(PipelineError):
    """The model server could not be reached."""


class ProtocolError(PipelineError):
    """The model server returned a malformed response."""


class ScoreCountMismatchError(ProtocolError):
    """The model server returned the wrong number of span scores."""


class SchemaError(PipelineError):
    """A dataset record does not match the expected schema."""

    def __init__(self, record_index: int, reason: str):
        self.record_index = record_index
        self.reason = reason
        super().__init__(f"record {record_index}: {reason}")


class IdMismatchError(PipelineError):
    """Predictions and gold questions are not id-aligned."""


class ConfigError(PipelineError):
    """A pipeline configuration names an unknown mode or is unusable."""

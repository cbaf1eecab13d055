"""Exception types shared across the pipeline."""

from __future__ import annotations


class Policy2LabelError(Exception):
    """Base class for every error raised by this package."""


class NetworkError(Policy2LabelError):
    """A policy URL could not be reached (DNS failure, refused, timeout)."""


class HttpError(Policy2LabelError):
    """A policy URL answered with a non-2xx status."""

    def __init__(self, status: int, message: str | None = None):
        super().__init__(message or f"HTTP {status}")
        self.status = status


class EmptyDocument(Policy2LabelError):
    """Cleaning left no text blocks at all."""


class NonPrimaryLanguageDocument(Policy2LabelError):
    """Language filtering dropped every block of the document."""


class EmbeddingUnavailable(Policy2LabelError):
    """The sentence-embedding provider failed during segmentation."""


class FormatError(Policy2LabelError):
    """A data file (word vectors, score sidecar, replay fixture) is malformed."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class DimensionMismatch(Policy2LabelError):
    """Two vectors, or a model and an embedding, disagree on dimension."""


class InsufficientData(Policy2LabelError):
    """The classifier trainer received no examples."""


class MissingEmbedding(Policy2LabelError):
    """A segment reached an embedding-based classifier without an embedding."""


class SchemaInvalid(Policy2LabelError):
    """A label schema file failed validation."""


class SchemaMismatch(Policy2LabelError):
    """A label does not line up with the schema it is being used against."""


class TemplateError(Policy2LabelError):
    """A question template referenced an unknown placeholder."""


class LlmError(Policy2LabelError):
    """An LLM backend failed terminally.

    When raised while generating a label, carries where the run stopped so
    callers can report partial progress.
    """

    def __init__(
        self,
        message: str,
        *,
        section: str | None = None,
        attribute: str | None = None,
        completed: int | None = None,
        total: int | None = None,
    ):
        super().__init__(message)
        self.section = section
        self.attribute = attribute
        self.completed = completed
        self.total = total

    def progress_report(self) -> str:
        parts = [str(self)]
        if self.section is not None and self.attribute is not None:
            parts.append(f"failed at {self.section}/{self.attribute}")
        if self.completed is not None and self.total is not None:
            parts.append(f"{self.completed}/{self.total} attributes completed")
        return "; ".join(parts)


class LlmTransientError(LlmError):
    """A retryable LLM failure: transport error or 5xx response."""


class ReplayMiss(LlmError):
    """The replay fixture has no entry for a prompt."""


class EmptySection(Policy2LabelError):
    """No attribute of a section qualified for macro averaging."""


class ConfigError(Policy2LabelError):
    """A run configuration references missing files or invalid values."""

"""Exception hierarchy shared across the package."""

from __future__ import annotations


class PlanVerifyError(Exception):
    """Base class for all errors raised by planverify."""


class ParseError(PlanVerifyError):
    """A single DSL line failed to parse.

    ``column`` is a 0-based offset into the raw line; ``line`` is the 1-based
    line number when the error came from a multi-line input.
    """

    def __init__(self, message: str, column: int = 0, line: int | None = None, text: str = ""):
        self.message = message
        self.column = column
        self.line = line
        self.text = text
        where = f"line {line}, col {column + 1}" if line is not None else f"col {column + 1}"
        super().__init__(f"{where}: {message}")


class PlanParseError(PlanVerifyError):
    """Aggregate of every bad line in a plan listing."""

    def __init__(self, errors: list[ParseError]):
        self.errors = list(errors)
        lines = ", ".join(str(e.line) for e in self.errors)
        detail = "; ".join(str(e) for e in self.errors)
        super().__init__(f"{len(self.errors)} malformed line(s) [{lines}]: {detail}")

    @property
    def line_numbers(self) -> list[int]:
        return [e.line for e in self.errors if e.line is not None]


class EmptyPlan(PlanVerifyError):
    pass


class MalformedOutput(PlanVerifyError):
    """Judge reply contained no ACTION blocks and no tags."""


class TemplateError(PlanVerifyError):
    pass


class GoalExtractionError(PlanVerifyError):
    pass


class ScriptIndexError(PlanVerifyError):
    pass


class TransportError(PlanVerifyError):
    """Request failed permanently, or retries were exhausted."""


class TransientError(TransportError):
    """Retryable failure (timeouts, 5xx, rate limiting)."""

    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class AuthError(TransportError):
    pass


class CacheCorrupt(PlanVerifyError):
    pass


class StaleCritique(PlanVerifyError):
    """A Remove critique points at an action that is no longer in the plan."""


class InserterParseError(PlanVerifyError):
    def __init__(self, message: str, errors: list[ParseError] | None = None):
        super().__init__(message)
        self.errors = errors or []


class ConfigError(PlanVerifyError):
    pass


class EpisodeMismatch(PlanVerifyError):
    pass


class EmptyRun(PlanVerifyError):
    pass


class SchemaError(PlanVerifyError):
    """One or more episode files violate the on-disk schema.

    ``problems`` holds ``(file, field, reason)`` triples.
    """

    def __init__(self, problems: list[tuple[str, str, str]]):
        self.problems = list(problems)
        body = "\n".join(f"  {f}: {fld}: {why}" for f, fld, why in self.problems)
        super().__init__(f"{len(self.problems)} schema problem(s):\n{body}")


class EmptyCorpus(PlanVerifyError):
    pass


class ProfileError(PlanVerifyError):
    pass

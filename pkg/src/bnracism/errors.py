"""Exception hierarchy shared by every pipeline stage.

Each exception class carries the process exit code the CLI uses when it
escapes a subcommand, so the mapping lives in one place.
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all expected pipeline failures."""

    exit_code = 1


class ConfigError(PipelineError):
    exit_code = 3


class SchemaError(PipelineError):
    exit_code = 4


class RowError(PipelineError):
    """A single dataset row is malformed."""

    exit_code = 4

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class DegenerateClassError(PipelineError):
    exit_code = 4


class LexiconError(PipelineError):
    exit_code = 4


class InputError(PipelineError):
    """Caller passed a value outside an operation's domain."""

    exit_code = 4


class ProviderError(PipelineError):
    """An embedding provider failed; usually worth retrying."""

    exit_code = 5
    retryable = True

    def __init__(self, message: str, index: int | None = None) -> None:
        if index is not None:
            message = f"row {index}: {message}"
        super().__init__(message)
        self.index = index


class CacheError(PipelineError):
    exit_code = 6


class CacheFormatError(CacheError):
    pass


class CacheCorruptionError(CacheError):
    pass


class CacheSpecError(CacheError):
    pass


class StaleCacheError(CacheError):
    def __init__(self, rows: list[int], message: str | None = None) -> None:
        shown = ", ".join(str(r) for r in rows[:10])
        if len(rows) > 10:
            shown += f", ... ({len(rows)} total)"
        super().__init__(message or f"embedding cache is stale at row(s) {shown}")
        self.rows = rows


class DivergenceError(PipelineError):
    exit_code = 7

    def __init__(self, epoch: int) -> None:
        super().__init__(f"training diverged: non-finite loss in epoch {epoch}")
        self.epoch = epoch


class CheckpointError(PipelineError):
    exit_code = 8


class EmptyTextError(PipelineError):
    """Text has nothing left after cleaning; prediction is refused."""

    exit_code = 9

"""Shared exception types mapped to CLI exit codes."""


class BlockEmbedError(Exception):
    """Base class for all package errors."""


class ConfigError(BlockEmbedError):
    """Bad configuration or arguments (CLI exit code 1)."""


class PreconditionError(BlockEmbedError):
    """An operation was called with its preconditions violated (exit code 2)."""


class CapExceeded(BlockEmbedError):
    """A configured resource cap was breached (exit code 3)."""


class SearchBudgetExceeded(CapExceeded):
    """A search ran out of its node budget before reaching a verdict.

    Raised instead of returning a count so that budget exhaustion is never
    confused with an exact zero.
    """


class CurveSelectionError(PreconditionError):
    """No valid boundary curve exists for the given block.

    Indicates the caller formed the block from conjoined buffers, which the
    construction rules forbid.
    """

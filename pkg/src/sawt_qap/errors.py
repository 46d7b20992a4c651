"""Exception hierarchy for the toolkit.

The CLI maps these onto process exit codes: validation/parse/data problems
exit 3, numerical aborts exit 4 (argparse usage errors exit 2 natively).
"""

from __future__ import annotations


class SawtQapError(Exception):
    """Base class for all toolkit-specific errors."""


class ValidationError(SawtQapError, ValueError):
    """Invalid argument or malformed in-memory data."""


class SizeLimitError(ValidationError):
    """Operation refused because the instance exceeds a hard size guard."""


class ParseError(SawtQapError, ValueError):
    """Malformed on-disk data.

    Attributes:
        offset: Byte offset into the source where the problem was detected,
            or ``None`` when no single position is meaningful.
        source: Optional path or label of the offending input.
    """

    def __init__(self, message: str, offset: int | None = None, source: str | None = None):
        self.offset = offset
        self.source = source
        prefix = f"{source}: " if source else ""
        suffix = f" (byte offset {offset})" if offset is not None else ""
        super().__init__(f"{prefix}{message}{suffix}")


class CheckpointError(SawtQapError, ValueError):
    """Corrupt, truncated, or shape-incompatible checkpoint file."""


class NumericalAbortError(SawtQapError, ArithmeticError):
    """Training aborted on a non-finite loss or gradient.

    Attributes:
        diagnostics: Mapping with context captured at the abort site
            (epoch, batch, loss components, parameter/gradient norms,
            reward statistics).
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)

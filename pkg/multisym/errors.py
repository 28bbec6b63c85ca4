"""Exceptions raised by multisym

Errors are grouped by the exit code the command line maps them to:
:class:`ParseError` (1), :class:`DerivationError` (2), :class:`InconsistentSystem` (3)
and :class:`VerificationFailure` (4).
"""

from __future__ import annotations

from typing import Iterable, Optional, Tuple

from pydantic import BaseModel, NonNegativeInt, PositiveInt


class MultisymError(Exception):
    """Base class of all multisym errors"""

    exit_code = 2


class SourceSpan(BaseModel, frozen=True, extra="forbid"):
    """Location of a piece of theory source text

    Offsets are byte offsets into the UTF-8 encoded input, line and column are 1-based.
    """

    start: NonNegativeInt
    end: NonNegativeInt
    line: PositiveInt = 1
    column: PositiveInt = 1


# Parse errors (exit code 1)


class ParseError(MultisymError):
    """Theory source could not be parsed or resolved"""

    exit_code = 1

    def __init__(
        self,
        message: str,
        span: Optional[SourceSpan] = None,
        expected: Iterable[str] = (),
    ):
        self.message = message
        self.span = span
        self.expected: Tuple[str, ...] = tuple(sorted(set(expected)))
        super().__init__(self.describe())

    def describe(self) -> str:
        text = self.message
        if self.span is not None:
            text = f"{self.span.line}:{self.span.column}: {text}"
        if self.expected:
            text += f" (expected one of: {', '.join(self.expected)})"
        return text


class DuplicateDeclaration(ParseError):
    pass


class UnknownIdentifier(ParseError):
    pass


class MissingBaseDecl(ParseError):
    pass


class IndexArityMismatch(ParseError):
    pass


# Derivation errors (exit code 2)


class DerivationError(MultisymError):
    """A symbolic derivation step failed"""


class RewriteDepthExceeded(DerivationError):
    pass


class UnknownSymbol(DerivationError):
    pass


class UnboundSymbol(DerivationError):
    pass


class DivisionByZero(DerivationError):
    pass


class IrrationalValue(DerivationError):
    pass


class MissingDerivativeRule(DerivationError):
    pass


class DuplicateFieldName(DerivationError):
    pass


class ZeroDimensionalBase(DerivationError):
    pass


class CircularConstraint(DerivationError):
    pass


class UnknownCoordinate(DerivationError):
    pass


class ChartMismatch(DerivationError):
    pass


class DegreeMismatch(DerivationError):
    pass


class IncompleteMap(DerivationError):
    pass


class WrongSpace(DerivationError):
    pass


class NonlinearInversion(DerivationError):
    pass


class NoHamiltonianFound(DerivationError):
    def __init__(self, message: str, residual: Optional[object] = None):
        super().__init__(message)
        self.residual = residual


class NotProjectable(DerivationError):
    pass


class LiftNotTangent(DerivationError):
    def __init__(self, message: str, residuals: Optional[dict] = None):
        super().__init__(message)
        self.residuals = residuals or {}


class UnsolvedCoefficient(DerivationError):
    pass


class NotExactSymmetry(DerivationError):
    pass


class IterationCapExceeded(DerivationError):
    def __init__(self, message: str, report: Optional[object] = None):
        super().__init__(message)
        self.report = report


class NonlinearUnknownSystem(DerivationError):
    pass


# Exit code 3


class InconsistentSystem(MultisymError):
    """A constraint reduced to a nonzero constant: the theory has no solutions"""

    exit_code = 3

    def __init__(self, message: str, residual: Optional[object] = None):
        super().__init__(message)
        self.residual = residual


# Exit code 4


class VerificationFailure(MultisymError):
    exit_code = 4

"""Exception hierarchy shared by the numerical modules and the CLI."""

from typing import FrozenSet, Iterable, Optional


class HJMMError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(HJMMError, ValueError):
    """An argument of the cumulant function lies outside its domain."""


class MomentError(HJMMError, ValueError):
    """A requested moment of the Lévy measure is not finite."""


class DegenerateBasis(HJMMError, ValueError):
    """Projection basis is numerically linearly dependent."""


class NotInvariant(HJMMError, ValueError):
    """A basis is not closed under differentiation."""


class NumericsError(HJMMError, ArithmeticError):
    """A simulated curve left the overflow guard."""


class NoRealization(HJMMError):
    """The model has no affine realization under the implemented criteria."""


class RangeError(HJMMError, ValueError):
    """A maturity lies beyond the curve grid."""


class RadiusError(HJMMError, ValueError):
    """Evaluation radius is incompatible with the series witness point."""


class DivergenceWarning(UserWarning):
    """Partial sums of a series did not stabilize."""


class ParseError(HJMMError, ValueError):
    """Syntax or value error in a model specification file.

    Carries the 1-based line and column of the offending token and the set of
    tokens that would have been accepted there.
    """

    def __init__(
        self,
        message: str,
        line: int,
        column: int,
        expected: Optional[Iterable[str]] = None,
    ) -> None:
        self.message = message
        self.line = line
        self.column = column
        self.expected: FrozenSet[str] = frozenset(expected or ())
        text = f"{line}:{column}: {message}"
        if self.expected:
            text += f" (expected one of: {', '.join(sorted(self.expected))})"
        super().__init__(text)


class InvalidSpec(HJMMError, ValueError):
    """A model spec failed validation and cannot be simulated."""

    def __init__(self, diagnostics) -> None:
        self.diagnostics = list(diagnostics)
        codes = ", ".join(d.code for d in self.diagnostics)
        super().__init__(f"spec has validation errors: {codes}")

"""Exception hierarchy.  Every error the library raises deliberately derives
from TfError so callers can catch domain failures without masking bugs."""

from __future__ import annotations


class TfError(Exception):
    """Base class for all library errors."""


class RankMismatch(TfError):
    """Vector or matrix dimensions disagree with a group's rank."""


class NotReduced(TfError):
    """Input data is not in the normal form an operation requires."""


class BadGlue(TfError):
    """Glue datum is malformed (zero vector, bad prime, non-unit column...)."""


class BadPrime(TfError):
    """An alleged prime is not prime, or lies outside the required set."""


class ZeroScalar(TfError):
    """Zero fed to an operation that needs a nonzero scalar."""


class ZeroElement(TfError):
    """Zero vector fed to an operation on nonzero elements."""


class NotMember(TfError):
    """Element lies outside the group."""


class NotContained(TfError):
    """Alleged subgroup relation fails on a witness element."""


class NotABasis(TfError):
    """Vector family is not linearly independent / not of full rank."""


class SingularMatrix(TfError):
    """Matrix inversion or determinant-based step hit a singular matrix."""


class UndecidedSplit(TfError):
    """A splitting question could not be certified either way.

    Carries .group and .reason for reporting.
    """

    def __init__(self, reason: str, group: object = None):
        super().__init__(reason)
        self.reason = reason
        self.group = group


class OracleUndecided(TfError):
    """A structure oracle returned Unknown where a decision was required."""

    def __init__(self, reason: str, group: object = None):
        super().__init__(reason)
        self.reason = reason
        self.group = group


class UnrepresentableSubgroup(TfError):
    """The pure hull of a subspace cannot be expressed in the frame-plus-glue
    format (its divisible directions cannot be aligned with any basis)."""


class ParseError(TfError):
    """Group file syntax error.  Carries .line and .column (1-based)."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"line {line}, column {column}: {message}" if line else message)
        self.line = line
        self.column = column


class UnknownReference(ParseError):
    """Group file refers to an identifier that was never defined."""


class FactorLimit(TfError):
    """Integer too hard to factor within the configured trial bound."""


class RankTooSmall(TfError):
    """Witness construction needs a larger rank than requested."""


class PrimeNotInP0(TfError):
    """Witness construction received a prime outside the designated cell."""


class BadModulus(TfError):
    """Prime partition modulus has too few residue classes for the rank."""

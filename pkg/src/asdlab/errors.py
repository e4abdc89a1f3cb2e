"""Exception hierarchy.

``VerificationError`` subclasses signal that a mathematical check failed
(CLI exit code 1).  ``InvalidInput`` signals malformed requests (exit code 2).
"""

from __future__ import annotations


class InvalidInput(ValueError):
    """Malformed user input: bad fixture, bad flag value, bad file."""


class VerificationError(Exception):
    """A verification step failed.  ``details`` carries JSON-friendly context."""

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    @property
    def kind(self) -> str:
        return type(self).__name__


# exterior forms and near-symplectic checks
class NotClosed(VerificationError):
    pass


class DegenerateZero(VerificationError):
    pass


class IndefiniteWedge(VerificationError):
    pass


class NotOnZeroSet(VerificationError):
    pass


class TangentNotInKernel(VerificationError):
    pass


class NotHomogeneous(VerificationError):
    pass


class ComponentCountMismatch(VerificationError):
    pass


class NearSymplecticFailure(VerificationError):
    pass


class NotLiouville(VerificationError):
    pass


class NotTransverse(VerificationError):
    pass


# near-contact checks
class DefiniteA(VerificationError):
    pass


class NegativeF(VerificationError):
    pass


class NotAZero(VerificationError):
    pass


class Degenerate(VerificationError):
    pass


class IndexMismatch(VerificationError):
    pass


class OrientationMismatch(VerificationError):
    pass


class BoundViolated(VerificationError):
    pass


class WrongZeroCount(VerificationError):
    pass


class PositiveDivergence(VerificationError):
    pass


class NoCycleFound(VerificationError):
    pass


class ZeroSetMismatch(VerificationError):
    pass


# neck model and resolution
class NoConvergence(VerificationError):
    pass


class NonPositiveNorm(VerificationError):
    pass


class NonPositiveArea(VerificationError):
    pass


class SingularJacobian(VerificationError):
    pass

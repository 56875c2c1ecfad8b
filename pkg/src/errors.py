"""Exception hierarchy shared by the binsense modules."""

from __future__ import annotations


class BinsenseError(Exception):
    """Base class for all binsense errors."""

    pass


class OperatorError(BinsenseError, ValueError):
    """Raised when a measurement operator is malformed or misused."""

    pass


class DenseBudgetError(OperatorError):
    """Raised when materializing an operator would exceed the memory budget."""

    pass


class SamplingError(BinsenseError, ValueError):
    """Raised when a sampling request cannot be satisfied."""

    pass


class SolverError(BinsenseError):
    """Raised when a solver receives inconsistent input."""

    pass


class CertificateError(BinsenseError, ValueError):
    """Raised when a certificate is requested outside its preconditions."""

    pass


class ValidationSizeError(BinsenseError, ValueError):
    """Raised when a dense validator or enumeration oracle is asked for too large a problem."""

    pass


class ManifestError(BinsenseError, ValueError):
    """Raised when a text manifest or vector file cannot be parsed."""

    pass

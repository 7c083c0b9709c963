"""Exception taxonomy shared by all modules.

Domain errors are precondition violations (bad parameters, bad inputs);
accuracy errors mean a quadrature or iteration could not certify its
target tolerance. The CLI maps them to distinct exit codes.
"""


class DomainError(ValueError):
    """Input outside the admissible domain of an operation."""


class AccuracyError(RuntimeError):
    """Requested tolerance could not be certified."""


class NewtonFailure(RuntimeError):
    """Newton iteration did not converge; near a fold this is expected."""

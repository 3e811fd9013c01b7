"""Exception types shared by the numerical modules and mapped to CLI exit codes."""


class ArtifactError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class InvalidInputError(ArtifactError, ValueError):
    """Input outside the domain of an operation (CLI exit code 2)."""

    exit_code = 2


class NumericalError(ArtifactError, ArithmeticError):
    """A solver, series or integrator failed to reach its tolerance (exit code 3)."""

    exit_code = 3


class ConvergenceError(NumericalError):
    pass


class StiffnessError(NumericalError):
    """Raised when backtracking drives the time step below the underflow floor.

    The partially computed trajectory, if any, is attached as ``trajectory``.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class ClosureError(NumericalError):
    pass


class CheckFailedError(ArtifactError, AssertionError):
    """A verification report did not pass (exit code 4)."""

    exit_code = 4

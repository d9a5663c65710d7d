"""Exception hierarchy.

Every exception carries the process exit code the command-line front end
maps it to: 2 usage, 3 input parse, 4 infeasible constraint, 5 numerical
failure.
"""


class SuperdirError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 5


class InvalidArgumentError(SuperdirError, ValueError):
    exit_code = 2


class RouteMismatchError(SuperdirError, ValueError):
    """The requested coupling route does not fit the available data."""

    exit_code = 2


class InterpolationDomainError(SuperdirError, ValueError):
    """A direction falls outside the lattice of a sampled pattern."""

    exit_code = 2


class ParseError(SuperdirError, ValueError):
    """An input file could not be parsed.

    Parameters
    ----------
    message : str
        What went wrong.
    path : str, optional
        File being read.
    line : int, optional
        1-based line number of the offending record.
    """

    exit_code = 3

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class InfeasibleConstraintError(SuperdirError, ValueError):
    exit_code = 4

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class NumericalError(SuperdirError, ArithmeticError):
    exit_code = 5


class DegeneratePatternError(NumericalError):
    """Pattern is identically zero where a nonzero value is needed."""


class DegenerateExcitationError(NumericalError):
    """Excitation radiates no power or yields no main-lobe field."""


class DegenerateSteeringError(NumericalError):
    """Steering vector is zero, or has zero entries where division is needed."""


class UndefinedVarianceError(NumericalError):
    pass


class CouplingMatrixError(NumericalError):
    """Coupling matrix is not Hermitian positive semidefinite within tolerance."""


class SingularCouplingError(NumericalError):
    pass


class IllConditionedNetworkError(NumericalError):
    pass


class ConstraintDegenerateError(NumericalError):
    pass


class NumericalConditioningError(NumericalError):
    pass

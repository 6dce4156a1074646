"""Exception hierarchy.

Numerical failures (things that make a filter step impossible) derive from
``NumericalError``; malformed inputs derive from ``InputError``. The CLI maps
the two families to distinct exit codes.
"""


class DualEnKFError(Exception):
    """Base class for all package errors."""


class InputError(DualEnKFError, ValueError):
    pass


class NumericalError(DualEnKFError, ArithmeticError):
    """A step could not be computed. ``step`` is filled in by the runners."""

    step = None

    def with_step(self, step):
        self.step = step
        if step is not None:
            self.args = (f"step {step}: {self.args[0] if self.args else ''}",) + self.args[1:]
        return self


class DimensionMismatch(InputError):
    pass


class AsymmetricMatrix(InputError):
    def __init__(self, name):
        super().__init__(f"{name} is not symmetric")
        self.name = name


class NotPSD(InputError):
    def __init__(self, name, min_eigenvalue, definite=False):
        kind = "positive definite" if definite else "positive semidefinite"
        super().__init__(f"{name} is not {kind} (min eigenvalue {min_eigenvalue:.3e})")
        self.name = name
        self.min_eigenvalue = min_eigenvalue


class SingularInnovation(NumericalError):
    pass


class IndefiniteGamma(NumericalError):
    def __init__(self, min_eigenvalue):
        super().__init__(
            f"right-hand side of the C_t equation is indefinite "
            f"(min eigenvalue {min_eigenvalue:.3e}); no C_t exists"
        )
        self.min_eigenvalue = min_eigenvalue


class DegenerateEnsemble(NumericalError):
    pass


class NotScalarObservation(InputError):
    pass


class EnsembleTooSmall(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, line=None, field=None):
        where = f" (line {line})" if line is not None else ""
        where += f" [{field}]" if field else ""
        super().__init__(message + where)
        self.line = line
        self.field = field


class ValidationError(InputError):
    def __init__(self, field, reason):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


class FlooredError(DualEnKFError):
    """Errors sit at machine precision; a convergence slope is meaningless."""

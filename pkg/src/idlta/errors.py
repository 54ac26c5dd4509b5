"""Exception hierarchy shared by every module of the package."""


class IdltaError(Exception):
    """Base class for all errors raised by this package."""

    kind = "error"


class InvalidInputError(IdltaError, ValueError):
    kind = "invalid_input"


class ModelDomainError(IdltaError, ValueError):
    kind = "model_domain"


class FormatError(IdltaError, ValueError):
    kind = "format"


class ConfigurationError(IdltaError, ValueError):
    kind = "configuration"


class DegenerateDemixingError(IdltaError, ArithmeticError):
    kind = "degenerate_demixing"


class NumericalError(IdltaError, ArithmeticError):
    kind = "numerical"


class IllConditionedUpdateError(NumericalError):
    """A row update could not be computed because Q or W Q is singular."""

    kind = "ill_conditioned_update"

    def __init__(self, message, i=None, n=None):
        super().__init__(message)
        self.i = i
        self.n = n

class HyperSpaceXError(Exception):
    """Base class for every error raised by the library."""


class ContractViolation(HyperSpaceXError, ValueError):
    """A documented precondition (shape, range, class count) was broken."""


class NumericalError(HyperSpaceXError):
    pass


class NonFiniteError(NumericalError):
    def __init__(self, message, *, index=None, where=""):
        super().__init__(message)
        self.index = index
        self.where = where


class DegenerateProxyError(NumericalError):
    def __init__(self, column, norm):
        super().__init__(f"proxy column {column} has norm {norm:.3e} (below eps)")
        self.column = column
        self.norm = norm


class GradientCheckError(NonFiniteError):
    """The function under test returned a non-finite value at a perturbed point."""

    def __init__(self, coordinate, value):
        super().__init__(
            f"non-finite value {value!r} when probing coordinate {coordinate}",
            index=coordinate,
            where="finite_difference_gradient",
        )
        self.coordinate = coordinate

"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`BiphotonError`, so callers (the CLI in particular) can separate
configuration problems from computation failures.
"""


class BiphotonError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BiphotonError, ValueError):
    """Invalid input data: configuration, library or structure files."""


class ComputationError(BiphotonError, ArithmeticError):
    """A numerical operation could not be carried out."""


# materials
class WavelengthOutOfRange(ComputationError):
    pass


class NegativeIndexSquared(ComputationError):
    pass


class NonUnitVector(BiphotonError, ValueError):
    pass


# stack
class UnknownMaterial(ConfigurationError):
    pass


class NonPositiveThickness(ConfigurationError):
    pass


class EmptyStack(ConfigurationError):
    pass


class SingularScattering(ComputationError):
    pass


# spdc
class EvanescentIdler(ComputationError):
    pass


class GridTooNarrow(ComputationError):
    pass


# biphoton
class AsymmetricGrid(ComputationError):
    pass


class NyquistViolation(ComputationError):
    pass


class VanishingState(ComputationError):
    pass


class NonUniformGrid(ComputationError):
    pass


class ZeroRow(ComputationError):
    pass


# design / cli
class NoPeakPair(ComputationError):
    pass


class ConfigInvalid(ConfigurationError):
    """Scenario configuration failed validation.

    ``path`` is the dotted location of the offending field.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)

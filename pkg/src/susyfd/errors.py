"""Exception hierarchy.

Every construction failure derives from :class:`SusyError`; the CLI maps any
of them to exit code 3 and prints the class name.
"""


class SusyError(Exception):
    """Base class for construction and verification errors."""


class IntegrationDivergence(SusyError):
    pass


class TrivialInitialCondition(SusyError):
    pass


class BracketVanishesEverywhere(SusyError):
    pass


class EqualEnergies(SusyError):
    pass


class SamePrevSolution(SusyError):
    pass


class ChainEmpty(SusyError):
    pass


class NonintegrableSingularity(SusyError):
    pass


class ParityMismatch(SusyError):
    pass


class QuadratureOverflow(SusyError):
    pass


class DerivativeVanishes(SusyError):
    pass


class BranchEnergyMismatch(SusyError):
    pass


class WronskianVanishes(SusyError):
    pass


class AnnihilatedInput(SusyError):
    pass


class ConfigError(Exception):
    """Malformed run configuration (CLI exit code 2)."""


class DerivativeRouteUnavailable(SusyError):
    """No energy family is known for the level the derivative formula needs."""

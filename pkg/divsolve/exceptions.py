from onsager_lab.exceptions import OnsagerLabError


class DivsolveError(OnsagerLabError):
    """Base class for errors raised by the divsolve app."""


class PhaseError(DivsolveError, ValueError):
    """The phase gradient vanishes where the amplitude does not."""


class ResolutionError(DivsolveError, ValueError):
    """The oscillation frequency is not resolved by the grid."""


class ProfileError(DivsolveError, ValueError):
    """The profile has a nonzero mean or the parametrix order is out of range."""


class SupportLeakError(DivsolveError, ValueError):
    """A field handed to moment_check is not supported inside its box."""

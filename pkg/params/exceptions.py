from onsager_lab.exceptions import OnsagerLabError


class ParamsError(OnsagerLabError):
    """Base class for errors raised by the params app."""


class ConfigurationError(ParamsError, ValueError):
    """An iteration config is non-finite, out of range or inconsistent."""


class LevelDomainError(ParamsError, ValueError):
    """log Xi_hat <= 1, so log log Xi_hat is not positive and the step is undefined."""


class TraceTooShortError(ParamsError, ValueError):
    """The trace does not reach the requested grid scale."""

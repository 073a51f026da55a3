from onsager_lab.exceptions import OnsagerLabError


class FluxError(OnsagerLabError):
    """Base class for errors raised by the flux app."""


class ScaleGridError(FluxError, ValueError):
    """The mollification scales are not strictly decreasing or not admissible."""


class ExponentError(FluxError, ValueError):
    """The integrability exponent r is below 3."""

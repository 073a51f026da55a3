from onsager_lab.exceptions import OnsagerLabError


class MikadoError(OnsagerLabError):
    """Base class for errors raised while building a convex-integration step."""


class GeometryError(MikadoError, ValueError):
    """Tube lines cannot be separated or the tube profile is not resolved."""


class PartitionError(MikadoError, ValueError):
    """The partition period is odd, out of range or not resolved by the grid."""


class TransportError(MikadoError, ValueError):
    """The coarse flow violates the CFL or deformation guards."""


class ResolutionError(MikadoError, ValueError):
    """The oscillation frequency is too high for the grid."""


class AmplitudeConeError(MikadoError, ValueError):
    """The stress to cancel lies outside the cone spanned by the directions."""

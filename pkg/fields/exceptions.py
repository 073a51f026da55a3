from onsager_lab.exceptions import OnsagerLabError


class FieldError(OnsagerLabError):
    """Base class for errors raised by the fields app."""


class GridError(FieldError, ValueError):
    """Grid size or sample layout does not satisfy the field invariants."""


class MeanModeError(FieldError, ValueError):
    """An inverse operator received a field with a nonzero spatial mean."""


class MollifierError(FieldError, ValueError):
    """Unknown kernel or mollification scale outside (0, 1/4)."""


class TimeSamplingError(FieldError, ValueError):
    """Time samples are too few or not uniformly spaced."""


class FieldFormatError(FieldError, ValueError):
    """A PFLD file is truncated or carries a bad header."""

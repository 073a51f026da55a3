"""Periodic cubic-spline interpolation of sampled fields at arbitrary points."""

import numpy as np
from scipy import ndimage

from .exceptions import GridError


def spline_coefficients(field):
    """Prefiltered cubic B-spline coefficients, one array per component."""
    flat = field.samples.reshape((-1,) + field.grid.shape)
    return np.stack([ndimage.spline_filter(component, order=3, mode='grid-wrap') for component in flat])


def interpolate(field, points, coefficients=None):
    """
    Values of ``field`` at ``points`` (shape (3, ...), coordinates in the unit
    torus, any real values) with periodic wrap-around.

    Returns an array of shape ``field.component_shape + points.shape[1:]``.
    """
    points = np.asarray(points, dtype=float)
    if points.shape[0] != 3:
        raise GridError(f'points need a leading axis of length 3, got shape {points.shape}')
    if coefficients is None:
        coefficients = spline_coefficients(field)
    index = points.reshape(3, -1) * field.n
    values = np.stack([
        ndimage.map_coordinates(component, index, order=3, mode='grid-wrap', prefilter=False)
        for component in coefficients
    ])
    return values.reshape(field.component_shape + points.shape[1:])

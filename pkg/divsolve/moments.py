"""
Moment checks and the periodic symmetric anti-divergence of remainders.

A compactly supported U can be written as d_j R^{jl} with R symmetric and
compactly supported only if its linear and angular momenta vanish.
"""

import logging

import numpy as np
from django.conf import settings

from fields.grid import Rank
from fields.operators import anti_divergence_sym

from .exceptions import ProfileError, SupportLeakError


logger = logging.getLogger(__name__)

ANGULAR_PAIRS = ((0, 1), (0, 2), (1, 2))


def _box_mask(grid, box):
    lower, upper = (np.asarray(corner, dtype=float) for corner in box)
    if lower.shape != (3,) or upper.shape != (3,) or np.any(lower >= upper):
        raise ProfileError(f'support box needs lower < upper 3-vectors, got {box}')
    x = grid.coordinates()
    inside = np.all((x >= lower.reshape(3, 1, 1, 1)) & (x <= upper.reshape(3, 1, 1, 1)), axis=0)
    return inside, 0.5 * (lower + upper)


def moment_check(field, support_box):
    """
    Return (linear, angular) momenta of a vector field supported in ``support_box``.

    ``support_box`` is a pair (lower, upper) of corners inside [0, 1)^3. The
    angular components are int (x^j U^l - x^l U^j) dx for (j, l) in
    (0, 1), (0, 2), (1, 2) with x measured from the box center.
    """
    if field.rank is not Rank.VECTOR:
        raise ProfileError('moment_check needs a vector field')
    inside, center = _box_mask(field.grid, support_box)
    magnitude = field.pointwise_magnitude()
    scale = float(magnitude.max())
    leak = float(np.max(np.where(inside, 0.0, magnitude)))
    if leak > settings.LAB['LEAK_TOLERANCE'] * scale:
        worst = np.unravel_index(np.argmax(np.where(inside, 0.0, magnitude)), field.grid.shape)
        raise SupportLeakError(
            f'field leaks outside the support box: |U| = {leak:.3e} at grid point {tuple(int(i) for i in worst)}'
        )

    x = field.grid.coordinates() - center.reshape(3, 1, 1, 1)
    samples = np.where(inside, field.samples, 0.0)
    linear = samples.mean(axis=(-3, -2, -1))
    angular = np.array([
        np.mean(x[j] * samples[l] - x[l] * samples[j])
        for j, l in ANGULAR_PAIRS
    ])
    logger.debug('moments: |linear|=%.3e |angular|=%.3e', np.abs(linear).max(), np.abs(angular).max())
    return linear, angular


def solve_remainder(field):
    """Periodic symmetric R with d_j R^{jl} = U^l for a zero-mean remainder U."""
    solution = anti_divergence_sym(field)
    logger.debug('solve_remainder: |U|_inf=%.3e |R|_inf=%.3e', field.sup_norm(), solution.sup_norm())
    return solution

"""
A rough synthetic velocity field at the Onsager exponent.

The flux diagnostics need a field whose increments scale like |h|^(1/3) at
every resolved octave; ``lacunary_field`` sums one sine per dyadic shell.
"""

import logging

import numpy as np

from fields.grid import PeriodicField, Rank


logger = logging.getLogger(__name__)


def lacunary_field(grid, exponent=1.0 / 3.0, seed=None):
    """
    Divergence-free lacunary series sum_j 2^{-j exponent} (s_j(x2), s_j(x3), s_j(x1))
    with s_j(y) = sin(2 pi 2^j y + phase), truncated below the grid Nyquist mode.

    Each component depends only on another coordinate, so the field is
    divergence free; with exponent 1/3 it sits exactly at Onsager regularity.
    """
    x = grid.coordinates()
    rng = np.random.default_rng(seed)
    samples = np.zeros((3,) + grid.shape)
    j = 0
    while 2 ** j < grid.n // 2:
        phases = rng.uniform(0.0, 2.0 * np.pi, 3) if seed is not None else np.zeros(3)
        weight = 2.0 ** (-j * exponent)
        for component, source in enumerate((1, 2, 0)):
            samples[component] += weight * np.sin(2.0 * np.pi * 2 ** j * x[source] + phases[component])
        j += 1
    logger.debug('lacunary field on n=%d: %d octaves, exponent %.4g', grid.n, j, exponent)
    return PeriodicField(grid, Rank.VECTOR, samples)

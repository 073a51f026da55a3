"""
Discrete estimate of the B^{1/3}_{r,infinity} norm

    |v|_{L^r} + sup_h |h|^{-1/3} |v(. - h) - v(.)|_{L^r}

over a fixed shift set: log-spaced magnitudes between one grid cell and 1/2
times the 13 directions of the half neighbourhood {-1, 0, 1}^3 / +-.
Shifts are applied by spectral translation, so any real shift is realizable.
The sampled sup is a lower bound for the true one.
"""

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from fields.operators import translate

from .exceptions import ExponentError


logger = logging.getLogger(__name__)

REGULARITY = 1.0 / 3.0


def shift_directions():
    """The 13 unit directions with first nonzero component positive."""
    directions = []
    for d in itertools.product((-1, 0, 1), repeat=3):
        nonzero = [c for c in d if c]
        if nonzero and nonzero[0] > 0:
            directions.append(np.array(d, dtype=float) / np.linalg.norm(d))
    return np.array(directions)


def shift_magnitudes(n, count=None):
    count = settings.LAB['BESOV_MAGNITUDES'] if count is None else count
    return np.geomspace(1.0 / n, 0.5, count)


@dataclass(frozen=True)
class BesovEstimate:
    r: float
    lebesgue: float
    seminorm: float
    worst_shift: tuple
    shifts: int

    @property
    def norm(self):
        return self.lebesgue + self.seminorm


def besov_norm(v, r=None, regularity=REGULARITY, magnitudes=None):
    """BesovEstimate of ``v``; ``magnitudes`` overrides the log-spaced shift sizes."""
    r = settings.LAB['FLUX_R'] if r is None else r
    if r < 3:
        raise ExponentError(f'the Besov estimate needs r >= 3, got {r}')
    magnitudes = shift_magnitudes(v.n) if magnitudes is None else np.asarray(magnitudes, dtype=float)
    directions = shift_directions()[:settings.LAB['BESOV_DIRECTIONS']]
    seminorm, worst = 0.0, (0.0, 0.0, 0.0)
    for size in magnitudes:
        for direction in directions:
            shift = size * direction
            increment = translate(v, shift) - v
            value = increment.lebesgue_norm(r) / size ** regularity
            if value > seminorm:
                seminorm, worst = value, tuple(float(c) for c in shift)
    estimate = BesovEstimate(
        r=float(r),
        lebesgue=v.lebesgue_norm(r),
        seminorm=seminorm,
        worst_shift=worst,
        shifts=len(magnitudes) * len(directions),
    )
    logger.debug('Besov estimate over %d shifts: %.4e (worst shift %s)', estimate.shifts, estimate.norm, worst)
    return estimate

"""
Quadratic partition of unity on the torus, indexed by cells k in (Z / Pi)^3.

    chi_k(X) = prod_i chi1(wrap(Pi X_i - k_i)),  chi1 = beta / sqrt(sum_m beta^2(. - m))

with beta(s) = exp(-1 / (1 - (4s/3)^2)) on |s| < 3/4. The sum over k of chi_k^2
is identically one. Transported members are chi_k(Gamma(t, x)), so the
identity is preserved exactly wherever Gamma is evaluated.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from fields.grid import PeriodicField, Rank

from .exceptions import PartitionError


logger = logging.getLogger(__name__)

SUPPORT = 0.75


def _beta(s):
    t = np.asarray(s, dtype=float) / SUPPORT
    inside = np.abs(t) < 1.0
    safe = np.where(inside, 1.0 - t ** 2, 1.0)
    return np.where(inside, np.exp(-1.0 / safe), 0.0)


def cutoff_profile(s):
    """The one-dimensional factor chi1; sum_m chi1^2(s - m) = 1 for every real s."""
    s = np.asarray(s, dtype=float)
    reduced = s - np.round(s)
    normalizer = _beta(reduced - 1.0) ** 2 + _beta(reduced) ** 2 + _beta(reduced + 1.0) ** 2
    return _beta(s) / np.sqrt(normalizer)


@dataclass(frozen=True)
class QuadraticPartition:
    period: int
    grid: object = None

    @cached_property
    def members(self):
        return tuple(itertools.product(range(self.period), repeat=3))

    @property
    def support_radius(self):
        """Every member is supported in the ball of this radius around its center k / Pi."""
        return SUPPORT * math.sqrt(3.0) / self.period

    def center(self, k):
        return np.asarray(k, dtype=float) / self.period

    def _axis_factor(self, coordinate, k):
        s = self.period * coordinate - k
        # wrap into [-Pi/2, Pi/2) so that the member is periodic in X
        s = s - self.period * np.floor(s / self.period + 0.5)
        return cutoff_profile(s)

    def member(self, k, labels):
        """chi_k at label points ``labels`` of shape (3, ...)."""
        labels = np.asarray(labels, dtype=float)
        return (
            self._axis_factor(labels[0], k[0])
            * self._axis_factor(labels[1], k[1])
            * self._axis_factor(labels[2], k[2])
        )

    def class_cutoff(self, parity, labels):
        """Sum of the members with k = parity (mod 2); members of one class have disjoint supports."""
        labels = np.asarray(labels, dtype=float)
        value = np.ones(labels.shape[1:])
        for axis in range(3):
            value = value * sum(
                self._axis_factor(labels[axis], k) for k in range(parity[axis], self.period, 2)
            )
        return value

    def class_members(self, parity):
        return tuple(k for k in self.members if all(k[i] % 2 == parity[i] for i in range(3)))

    def sum_of_squares(self, labels):
        labels = np.asarray(labels, dtype=float)
        value = np.ones(labels.shape[1:])
        for axis in range(3):
            value = value * sum(self._axis_factor(labels[axis], k) ** 2 for k in range(self.period))
        return value

    def fields(self, labels=None):
        """Members sampled on the grid (at the identity frame unless ``labels`` is given)."""
        if labels is None:
            labels = self.grid.coordinates()
        return {k: PeriodicField(self.grid, Rank.SCALAR, self.member(k, labels)) for k in self.members}


def build_partition(Pi, grid, Xi=None):
    """
    The partition at t(I). Pi must be even, at least 2, resolved by the grid
    (n >= 4 Pi) and, when a frequency Xi is given, within [3 Xi, 6 Xi].
    """
    if int(Pi) != Pi or Pi < 2 or Pi % 2:
        raise PartitionError(f'the partition period must be an even integer >= 2, got {Pi}')
    Pi = int(Pi)
    if Xi is not None and not 3.0 * Xi <= Pi <= 6.0 * Xi:
        raise PartitionError(f'Pi={Pi} lies outside [3 Xi, 6 Xi] = [{3.0 * Xi:g}, {6.0 * Xi:g}]')
    if grid.n < 4 * Pi:
        raise PartitionError(f'the n={grid.n} grid does not resolve cells of width 1/{Pi}; need n >= {4 * Pi}')
    partition = QuadraticPartition(Pi, grid)
    defect = float(np.max(np.abs(partition.sum_of_squares(grid.coordinates()) - 1.0)))
    logger.info('partition Pi=%d: %d members, sum of squares defect %.2e', Pi, len(partition.members), defect)
    return partition

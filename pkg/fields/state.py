"""
Euler-Reynolds states sampled in time.

A state is a uniformly spaced sequence of (v, p, R) snapshots solving

    d_t v^l + d_j (v^j v^l) + d^l p = d_j R^{jl},   d_j v^j = 0

up to the residual measured by ``euler_reynolds_residual``. Time derivatives
are centered differences, so the residual of an exact flow is O(dt^2).
"""

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import GridError, TimeSamplingError
from .grid import Rank
from .operators import divergence, gradient, self_outer


logger = logging.getLogger(__name__)

DIVERGENCE_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class EulerReynoldsState:
    """
    Snapshots ``velocity[i]``, ``pressure[i]``, ``stress[i]`` at ``times[i]``.

    Construction checks ranks, a shared grid, uniform time spacing and that
    every velocity snapshot is divergence-free to spectral round-off.
    """

    velocity: tuple
    pressure: tuple
    stress: tuple
    times: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'velocity', tuple(self.velocity))
        object.__setattr__(self, 'pressure', tuple(self.pressure))
        object.__setattr__(self, 'stress', tuple(self.stress))
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, 'times', times)

        count = len(times)
        if count == 0:
            raise TimeSamplingError('an Euler-Reynolds state needs at least one time sample')
        if not len(self.velocity) == len(self.pressure) == len(self.stress) == count:
            raise TimeSamplingError(
                f'got {len(self.velocity)} velocity, {len(self.pressure)} pressure and '
                f'{len(self.stress)} stress snapshots for {count} times'
            )
        if count > 1:
            steps = np.diff(times)
            if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
                raise TimeSamplingError('time samples must be increasing with a uniform step')

        grid = self.velocity[0].grid
        for v, p, r in zip(self.velocity, self.pressure, self.stress):
            if v.rank is not Rank.VECTOR or p.rank is not Rank.SCALAR or r.rank is not Rank.SYM2:
                raise GridError('a state needs vector velocity, scalar pressure and sym2 stress')
            if not v.grid == p.grid == r.grid == grid:
                raise GridError('all snapshots of a state must share one grid')

        for t, v in zip(times, self.velocity):
            drift = divergence(v).sup_norm()
            if drift > DIVERGENCE_TOLERANCE * max(1.0, 2.0 * np.pi * grid.n * v.sup_norm()):
                raise GridError(f'velocity at t={t:.6g} is not divergence-free: |div v|_inf = {drift:.3e}')

    @classmethod
    def steady(cls, velocity, pressure, stress, times):
        """The same snapshot repeated at every time in ``times``."""
        count = len(times)
        return cls((velocity,) * count, (pressure,) * count, (stress,) * count, times)

    @property
    def grid(self):
        return self.velocity[0].grid

    @property
    def step(self):
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def snapshot(self, index):
        return self.velocity[index], self.pressure[index], self.stress[index]


def residual_profile(state, dealias=False):
    """Sup-norm residual at each interior time sample, as an array of length m - 2."""
    if len(state.times) < 3:
        raise TimeSamplingError(f'the residual needs at least 3 time samples, got {len(state.times)}')
    dt = state.step
    values = []
    for i in range(1, len(state.times) - 1):
        v, p, r = state.snapshot(i)
        time_derivative = (state.velocity[i + 1] - state.velocity[i - 1]) * (0.5 / dt)
        residual = time_derivative + divergence(self_outer(v, dealias=dealias)) + gradient(p) - divergence(r)
        values.append(residual.sup_norm())
        logger.debug('residual at t=%.6g: %.3e', state.times[i], values[-1])
    return np.array(values)


def euler_reynolds_residual(state, dealias=False):
    """
    Max over interior samples of |d_t v + div(v v) + grad p - div R|_inf.

    Raises TimeSamplingError for fewer than three samples.
    """
    return float(residual_profile(state, dealias=dealias).max())

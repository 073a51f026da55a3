"""
Coarse-scale flow maps: back-to-labels maps Gamma_I(t, x) transported by a
steady mollified velocity, D/dt Gamma = 0 with Gamma(t(I), x) = x.
"""

import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from fields.frame import BackToLabelsMap
from fields.grid import PeriodicField, Rank
from fields.interpolate import interpolate, spline_coefficients
from fields.operators import gradient

from .exceptions import TransportError


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TransportedFrame:
    """Gamma_I at the time samples ``times``, with the partition carried along as chi_k(Gamma)."""

    velocity: PeriodicField
    start: float
    times: np.ndarray
    maps: tuple
    partition: object = None

    @property
    def grid(self):
        return self.velocity.grid

    def __len__(self):
        return len(self.maps)

    def labels(self, index):
        return self.maps[index].labels()

    def members(self, index):
        """The transported partition members at time sample ``index``."""
        labels = self.labels(index)
        return {
            k: PeriodicField(self.grid, Rank.SCALAR, self.partition.member(k, labels))
            for k in self.partition.members
        }

    def partition_defect(self):
        """max over samples and grid points of |sum_k chi_k^2 - 1|."""
        return max(
            float(np.max(np.abs(self.partition.sum_of_squares(self.labels(i)) - 1.0)))
            for i in range(len(self))
        )

    def determinant_range(self):
        determinants = [m.determinant() for m in self.maps]
        return float(min(np.min(d) for d in determinants)), float(max(np.max(d) for d in determinants))

    def max_jacobian(self):
        """sup over samples of |grad Gamma| (Frobenius)."""
        return max(float(np.sqrt(np.max(np.sum(m.jacobian() ** 2, axis=(0, 1))))) for m in self.maps)

    def sample_index(self, t):
        index = int(np.argmin(np.abs(self.times - t)))
        if not np.isclose(self.times[index], t):
            raise TransportError(f't={t} is not a time sample of the frame')
        return index


def departure_offsets(velocity, dt):
    """
    x_d - x for characteristics traced back over one step of length ``dt``
    with classical fourth-order Runge-Kutta and periodic cubic interpolation.
    """
    points = velocity.grid.coordinates()
    coefficients = spline_coefficients(velocity)

    def v(at):
        return interpolate(velocity, at, coefficients)

    k1 = velocity.samples
    k2 = v(points - 0.5 * dt * k1)
    k3 = v(points - 0.5 * dt * k2)
    k4 = v(points - dt * k3)
    return -dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def check_guards(velocity, steps, dt):
    grid = velocity.grid
    speed = velocity.sup_norm()
    courant = abs(dt) * speed * grid.n
    limit = settings.LAB['CFL_LIMIT']
    if courant >= limit:
        raise TransportError(f'CFL violation: dt |v| n = {courant:.3g} >= {limit}')
    strain = float(np.max(np.abs(gradient(velocity).samples))) if speed else 0.0
    budget = settings.LAB['B0_BUDGET']
    if steps * abs(dt) * strain > budget:
        raise TransportError(
            f'the run spans |theta| |grad v| = {steps * abs(dt) * strain:.3g}, over the budget b0 = {budget}'
        )
    return courant, strain


def advect_frame(v_eps, t_I, steps, dt, partition=None):
    """
    Transport Gamma_I from Gamma_I(t_I, x) = x by ``steps`` semi-Lagrangian
    steps of size ``dt`` (negative dt runs backward in time).

    Raises TransportError on a CFL violation, when the run exceeds the b0
    budget, or when det grad Gamma leaves DET_RANGE.
    """
    if v_eps.rank is not Rank.VECTOR:
        raise TransportError('the coarse velocity must be a vector field')
    if steps < 0:
        raise TransportError(f'steps must be non-negative, got {steps}')
    courant, strain = check_guards(v_eps, steps, dt)
    low, high = settings.LAB['DET_RANGE']

    grid = v_eps.grid
    points = grid.coordinates()
    frame_map = BackToLabelsMap.identity(grid)
    maps = [frame_map]
    if steps:
        offsets = departure_offsets(v_eps, dt)
        departures = points + offsets
    for step in range(1, steps + 1):
        displacement = frame_map.displacement
        carried = interpolate(displacement, departures)
        frame_map = BackToLabelsMap(displacement.with_samples(offsets + carried))
        determinant = frame_map.determinant()
        if np.min(determinant) < low or np.max(determinant) > high:
            raise TransportError(
                f'det grad Gamma left [{low}, {high}] at step {step}: '
                f'range [{np.min(determinant):.4f}, {np.max(determinant):.4f}]'
            )
        maps.append(frame_map)

    times = t_I + dt * np.arange(steps + 1)
    logger.info(
        'advected frame over %d steps of dt=%.3g (courant %.3f, strain %.3g, deformation %.3e)',
        steps, dt, courant, strain, frame_map.deformation(),
    )
    return TransportedFrame(v_eps, float(t_I), times, tuple(maps), partition)


def refinement_gap(v_eps, t_I, steps, dt):
    """sup |Gamma_dt - Gamma_dt/2| at the final time: the time-stepping error of ``advect_frame``."""
    coarse = advect_frame(v_eps, t_I, steps, dt)
    fine = advect_frame(v_eps, t_I, 2 * steps, 0.5 * dt)
    return float(np.max(np.abs(coarse.maps[-1].displacement.samples - fine.maps[-1].displacement.samples)))

"""
Time cutoffs and the amplitude solve for stress cancellation.

At each point the pulled-back target M = e^-1 grad Gamma (-P Id - R_eps) grad Gamma^T
is written as sum_f gamma_f^2 f (x) f. The six tensors f (x) f form a basis of
symmetric 3x3 matrices, so gamma_f^2 is the solution of a constant 6x6 system.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from django.conf import settings

from fields.grid import PeriodicField, Rank

from .exceptions import AmplitudeConeError, TransportError
from .geometry import DIRECTIONS


logger = logging.getLogger(__name__)

# the independent components of a symmetric 3x3 matrix
SYMMETRIC_COMPONENTS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


def _smooth_step(y):
    """C-infinity step: 0 for y <= 0, 1 for y >= 1."""
    y = np.asarray(y, dtype=float)

    def h(x):
        return np.where(x > 0.0, np.exp(-1.0 / np.where(x > 0.0, x, 1.0)), 0.0)

    return h(y) / (h(y) + h(1.0 - y))


@dataclass(frozen=True)
class TimeCutoff:
    """e_I^{1/2}(t): one on |t - center| <= theta/2 and zero for |t - center| >= theta."""

    center: float
    theta: float

    def __post_init__(self):
        if not self.theta > 0.0:
            raise ValueError(f'theta must be positive, got {self.theta}')

    def sqrt_value(self, t):
        distance = np.abs(np.asarray(t, dtype=float) - self.center)
        return _smooth_step((self.theta - distance) / (0.5 * self.theta))

    def value(self, t):
        return self.sqrt_value(t) ** 2

    @property
    def support(self):
        return self.center - self.theta, self.center + self.theta


@lru_cache(maxsize=1)
def cone_matrix():
    """Rows: symmetric components; columns: directions. A[c, f] = (f (x) f)[c]."""
    return np.array([[f[a] * f[b] for f in DIRECTIONS] for a, b in SYMMETRIC_COMPONENTS])


def _components(tensor):
    return np.stack([tensor[a, b] for a, b in SYMMETRIC_COMPONENTS])


def _pull_back(frame_map, tensor):
    jacobian = frame_map.jacobian()
    return np.einsum('ia...,ab...,jb...->ij...', jacobian, tensor, jacobian)


def choose_pressure(R_eps, frame_map, energy, trace_target=None):
    """
    The scalar P with tr M = 3 kappa, kappa = AMPLITUDE_TRACE:
    P = -(3 kappa e + tr(grad Gamma R grad Gamma^T)) / |grad Gamma|_F^2.
    """
    kappa = settings.LAB['AMPLITUDE_TRACE'] if trace_target is None else trace_target
    jacobian = frame_map.jacobian()
    pulled = _pull_back(frame_map, R_eps.samples)
    traced = np.einsum('ii...->...', pulled)
    frobenius = np.sum(jacobian ** 2, axis=(0, 1))
    return PeriodicField(R_eps.grid, Rank.SCALAR, -(3.0 * kappa * energy + traced) / frobenius)


@dataclass(frozen=True, eq=False)
class Amplitudes:
    """gamma_(I,f) on the grid at one time sample, stacked as (6, n, n, n)."""

    gamma: np.ndarray
    pressure: PeriodicField
    energy: float
    frame_map: object

    def wave_directions(self):
        """w_f = (grad Gamma)^-1 f, shape (6, 3, n, n, n)."""
        inverse = self.frame_map.inverse_jacobian()
        return np.einsum('ak...,fk->fa...', inverse, DIRECTIONS)

    def stress(self):
        """sum_f e gamma_f^2 w_f (x) w_f, which should equal -P Id - R_eps."""
        w = self.wave_directions()
        return self.energy * np.einsum('f...,fa...,fb...->ab...', self.gamma ** 2, w, w)


def solve_amplitudes(R_eps, pressure, frame_map, energy):
    """
    Solve sum_f gamma_f^2 f (x) f = M pointwise and return gamma_f = sqrt(gamma_f^2).

    ``energy`` is e_I(t) at the frame's time sample; where it vanishes all
    amplitudes are zero. Raises AmplitudeConeError naming the worst point when
    some gamma_f^2 is negative.
    """
    if R_eps.rank is not Rank.SYM2 or pressure.rank is not Rank.SCALAR:
        raise ValueError('solve_amplitudes takes a sym2 stress and a scalar pressure')
    grid = R_eps.grid
    if energy <= 0.0:
        return Amplitudes(np.zeros((len(DIRECTIONS),) + grid.shape), pressure, 0.0, frame_map)
    if np.min(np.abs(frame_map.determinant())) < np.finfo(float).eps:
        raise TransportError('the back-to-labels map is singular')

    target = -pressure.samples[None, None] * np.eye(3).reshape(3, 3, 1, 1, 1) - R_eps.samples
    M = _pull_back(frame_map, target) / energy
    squares = np.einsum('fc,c...->f...', np.linalg.inv(cone_matrix()), _components(M))

    worst = np.unravel_index(int(np.argmin(squares)), squares.shape)
    scale = max(float(np.max(np.abs(M))), np.finfo(float).tiny)
    if squares[worst] < -1e-12 * scale:
        f_index, point = worst[0], worst[1:]
        raise AmplitudeConeError(
            f'target outside the cone at grid point {tuple(int(i) for i in point)} '
            f'(x={tuple(round(float(i) / grid.n, 6) for i in point)}): '
            f'gamma^2={squares[worst]:.4e} for f={tuple(int(c) for c in DIRECTIONS[f_index])}'
        )
    gamma = np.sqrt(np.maximum(squares, 0.0))
    logger.debug('amplitudes: gamma in [%.4g, %.4g], e=%.4g', np.min(gamma), np.max(gamma), energy)
    return Amplitudes(gamma, pressure, float(energy), frame_map)


def cancellation_residual(amplitudes, R_eps):
    """
    sup |sum_J v_J (x) v_J + P Id + R_eps| relative to sup |P Id + R_eps|,
    using sum_k chi_k^2 = 1.
    """
    target = -amplitudes.pressure.samples[None, None] * np.eye(3).reshape(3, 3, 1, 1, 1) - R_eps.samples
    if amplitudes.energy <= 0.0:
        return 0.0
    gap = amplitudes.stress() - target
    scale = max(float(np.max(np.abs(target))), np.finfo(float).tiny)
    return float(np.max(np.abs(gap))) / scale

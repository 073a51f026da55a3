"""
Sampled periodic fields on the unit 3-torus.

Types:
    - Grid: uniform n x n x n grid with spacing 1/n on [0, 1)^3
    - Rank: tensor rank of a field (scalar, vector, sym2, antisym2, tensor2, rank3)
    - PeriodicField: samples indexed (component..., i, j, k), i along x1

The spectral helpers use the real-to-complex transform over the last three
axes. Wavevectors are K = 2*pi*m with the Nyquist component zeroed on every
axis, so odd derivatives of real fields stay real.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import fft

from .exceptions import GridError


SPATIAL_AXES = (-3, -2, -1)


class Rank(str, Enum):
    SCALAR = 'scalar'
    VECTOR = 'vector'
    SYM2 = 'sym2'
    ANTISYM2 = 'antisym2'
    TENSOR2 = 'tensor2'
    RANK3 = 'rank3'

    @property
    def component_shape(self):
        return {
            Rank.SCALAR: (),
            Rank.VECTOR: (3,),
            Rank.SYM2: (3, 3),
            Rank.ANTISYM2: (3, 3),
            Rank.TENSOR2: (3, 3),
            Rank.RANK3: (3, 3, 3),
        }[self]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid; n must be even and at least 8."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise GridError(f'grid size must be an even integer >= 8, got {self.n}')

    @property
    def spacing(self):
        return 1.0 / self.n

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def spectral_shape(self):
        return (self.n, self.n, self.n // 2 + 1)

    def coordinates(self):
        """Return the sample points as an array of shape (3, n, n, n)."""
        axis = np.arange(self.n) / self.n
        return np.stack(np.meshgrid(axis, axis, axis, indexing='ij'))

    def wavevectors(self):
        return _wavevectors(self.n)

    def wavenumber_squared(self):
        return _wavenumber_squared(self.n)

    def mode_indices(self):
        """Integer mode numbers m (Nyquist kept) in the rfft layout, shape (3, n, n, n//2+1)."""
        return _mode_indices(self.n)


@lru_cache(maxsize=16)
def _mode_indices(n):
    full = np.fft.fftfreq(n, d=1.0 / n)
    half = np.arange(n // 2 + 1, dtype=float)
    return np.stack(np.meshgrid(full, full, half, indexing='ij'))


@lru_cache(maxsize=16)
def _wavevectors(n):
    m = _mode_indices(n).copy()
    m[np.abs(m) == n // 2] = 0.0  # Nyquist freq=0 for even grid
    wavevectors = 2.0 * np.pi * m
    wavevectors.setflags(write=False)
    return wavevectors


@lru_cache(maxsize=16)
def _wavenumber_squared(n):
    ksq = np.sum(_wavevectors(n) ** 2, axis=0)
    ksq.setflags(write=False)
    return ksq


def to_spectral(samples):
    return fft.rfftn(samples, axes=SPATIAL_AXES)


def to_physical(spectrum, n):
    return fft.irfftn(spectrum, s=(n, n, n), axes=SPATIAL_AXES)


@dataclass(frozen=True, eq=False)
class PeriodicField:
    """
    A real field sampled on a Grid.

    ``samples`` has shape ``rank.component_shape + grid.shape``. Symmetric and
    antisymmetric rank-2 fields are checked exactly on construction; producers
    are expected to symmetrize before wrapping.
    """

    grid: Grid
    rank: Rank
    samples: np.ndarray

    def __post_init__(self):
        rank = Rank(self.rank)
        object.__setattr__(self, 'rank', rank)
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, 'samples', samples)
        expected = rank.component_shape + self.grid.shape
        if samples.shape != expected:
            raise GridError(f'{rank.value} field on n={self.grid.n} needs shape {expected}, got {samples.shape}')
        if rank is Rank.SYM2 and not np.array_equal(samples, samples.swapaxes(0, 1)):
            raise GridError('sym2 samples are not exactly symmetric')
        if rank is Rank.ANTISYM2 and not np.array_equal(samples, -samples.swapaxes(0, 1)):
            raise GridError('antisym2 samples are not exactly antisymmetric')

    @classmethod
    def zeros(cls, grid, rank):
        rank = Rank(rank)
        return cls(grid, rank, np.zeros(rank.component_shape + grid.shape))

    @classmethod
    def from_function(cls, grid, rank, function):
        """Sample ``function(x1, x2, x3)`` at the grid points."""
        x1, x2, x3 = grid.coordinates()
        return cls(grid, rank, np.asarray(function(x1, x2, x3), dtype=float))

    @property
    def n(self):
        return self.grid.n

    @property
    def component_shape(self):
        return self.rank.component_shape

    def spectrum(self):
        return to_spectral(self.samples)

    def mean(self):
        """Spatial mean of every component (the integral over the unit torus)."""
        return self.samples.mean(axis=SPATIAL_AXES)

    def sup_norm(self):
        return float(np.max(np.abs(self.samples))) if self.samples.size else 0.0

    def pointwise_magnitude(self):
        """Euclidean (Frobenius) magnitude of the components at every grid point."""
        if self.rank is Rank.SCALAR:
            return np.abs(self.samples)
        flat = self.samples.reshape((-1,) + self.grid.shape)
        return np.sqrt(np.sum(flat ** 2, axis=0))

    def lebesgue_norm(self, r):
        """L^r norm of the pointwise magnitude over the unit torus."""
        magnitude = self.pointwise_magnitude()
        if np.isinf(r):
            return float(magnitude.max())
        return float(np.mean(magnitude ** r) ** (1.0 / r))

    def with_samples(self, samples, rank=None):
        return PeriodicField(self.grid, rank or self.rank, samples)

    def shifted(self, steps):
        """Translate by whole grid cells; ``steps`` is an (i, j, k) triple."""
        return self.with_samples(np.roll(self.samples, shift=tuple(steps), axis=SPATIAL_AXES))

    def _check_compatible(self, other):
        if not isinstance(other, PeriodicField):
            return NotImplemented
        if other.grid != self.grid or other.rank is not self.rank:
            raise GridError(f'cannot combine {self.rank.value}@{self.n} with {other.rank.value}@{other.n}')
        return True

    def __add__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        return self.with_samples(self.samples + other.samples)

    def __sub__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        return self.with_samples(self.samples - other.samples)

    def __neg__(self):
        return self.with_samples(-self.samples)

    def __mul__(self, scalar):
        if isinstance(scalar, PeriodicField):
            return NotImplemented
        return self.with_samples(float(scalar) * self.samples)

    __rmul__ = __mul__

    def __repr__(self):
        return f'PeriodicField({self.rank.value}, n={self.n})'

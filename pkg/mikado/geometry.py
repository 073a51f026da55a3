"""
Direction set, threaded tube functions and their potentials.

Types:
    - TubeProfile: radial profile g supported in [r0/2, r0] with its potentials in closed form
    - TubeFamily: 48 periodic lines, one per (f, [k]) with f in DIRECTIONS and [k] in (Z/2Z)^3

The profile is g(s) = A b(u) (1 + c1 u + c2 u^2) with u = 4 s / r0 - 3 and
b(u) = (1 - u^2)^p. The coefficients c1, c2 make the first and third radial
moments vanish, so that

    Phi = Delta^-1 psi        is supported in s <= r0 and has zero mean,
    Omega^{ab}  = d^a Phi f^b - d^b Phi f^a,
    Omega~^{abc} = Phi (delta^{ac} f^b - delta^{bc} f^a)

are compactly supported, mean-free, antisymmetric in ab and satisfy
d_a Omega^{ab} = psi f^b, d_c Omega~^{abc} = Omega^{ab}. The spectral
potentials of ``build_potentials`` use the Delta^-1 construction instead.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from django.conf import settings
from numpy.polynomial import Polynomial

from fields.grid import PeriodicField, Rank
from fields.operators import divergence, inverse_gradient_potential, nyquist_filter, vector_potential

from .exceptions import GeometryError


logger = logging.getLogger(__name__)

DIRECTIONS = np.array([
    (1, 1, 0), (1, -1, 0),
    (1, 0, 1), (1, 0, -1),
    (0, 1, 1), (0, 1, -1),
], dtype=float)

PARITIES = tuple(itertools.product((0, 1), repeat=3))

TUBE_KEYS = tuple((f, parity) for f in range(len(DIRECTIONS)) for parity in PARITIES)

# images of a periodic line seen from a point reduced to [-1/2, 1/2]^3
_IMAGES = np.array(list(itertools.product((-1, 0, 1), repeat=3)), dtype=float)

# a tube of direction f stays clear of its own periodic images below this radius
MAX_RADIUS = 0.35


def direction_outer_sum():
    """sum_f f (x) f, which equals 4 Id for this direction set."""
    return np.einsum('fa,fb->ab', DIRECTIONS, DIRECTIONS)


class TubeProfile:
    """
    Radial profile g on [r0/2, r0], normalized so that int_T3 psi^2 = 1 for a line of length sqrt 2.

    Polynomials are held in the rescaled variable u, where they stay well conditioned.
    """

    line_length = math.sqrt(2.0)

    def __init__(self, r0, power=4):
        if not 0.0 < r0 < MAX_RADIUS:
            raise GeometryError(f'r0 must lie in (0, {MAX_RADIUS}), got {r0}')
        if int(power) != power or power < 2:
            raise GeometryError(f'the bump power must be an integer >= 2, got {power}')
        self.r0 = float(r0)
        self.power = int(power)
        u = Polynomial([0.0, 1.0])
        # s as a function of u, and ds = r0/4 du
        self._radius = Polynomial([0.75 * self.r0, 0.25 * self.r0])
        self._bump = (1.0 - u ** 2) ** self.power

        design = np.array([
            [self._moment(self._bump * u, 1), self._moment(self._bump * u ** 2, 1)],
            [self._moment(self._bump * u, 3), self._moment(self._bump * u ** 2, 3)],
        ])
        right = -np.array([self._moment(self._bump, 1), self._moment(self._bump, 3)])
        c1, c2 = np.linalg.solve(design, right)
        shape = self._bump * (1.0 + c1 * u + c2 * u ** 2)
        self.coefficients = (float(c1), float(c2))
        self.amplitude = 1.0 / math.sqrt(self.line_length * 2.0 * math.pi * self._moment(shape ** 2, 1))
        self.g = self.amplitude * shape
        self._slope = self.g.deriv() * (4.0 / self.r0)

        # G(u) = int_{r0/2}^{s} g t dt, so that d Phi / ds = G / s
        self._flux = (self.g * self._radius * (0.25 * self.r0)).integ(lbnd=-1.0)
        # d Phi / du = G(u) / (u + 3); split off the pole at u = -3
        quotient, remainder = divmod(self._flux, Polynomial([3.0, 1.0]))
        pole = float(remainder.coef[0]) if len(remainder.coef) else 0.0
        primitive = quotient.integ()
        self._antiderivative = lambda v: primitive(v) + pole * np.log(v + 3.0)
        self.phi_inner = float(self._antiderivative(-1.0) - self._antiderivative(1.0))

    def _moment(self, poly, k):
        """int_{r0/2}^{r0} p(u(s)) s^k ds."""
        antiderivative = (poly * self._radius ** k * (0.25 * self.r0)).integ()
        return float(antiderivative(1.0) - antiderivative(-1.0))

    def rescaled(self, s):
        return 4.0 * np.asarray(s, dtype=float) / self.r0 - 3.0

    def annulus(self, s):
        return (s >= 0.5 * self.r0) & (s <= self.r0)

    def bump(self, s):
        """The unnormalized bump b(u), used to remove the discrete mean of sampled tubes."""
        return np.where(self.annulus(s), self._bump(self.rescaled(s)), 0.0)

    def value(self, s):
        return np.where(self.annulus(s), self.g(self.rescaled(s)), 0.0)

    def slope(self, s):
        """dg / ds."""
        return np.where(self.annulus(s), self._slope(self.rescaled(s)), 0.0)

    def potential_slope(self, s):
        """d Phi / ds; zero outside the annulus."""
        safe = np.clip(s, 0.5 * self.r0, self.r0)
        return np.where(self.annulus(s), self._flux(self.rescaled(safe)) / safe, 0.0)

    def potential(self, s):
        """Phi(s), constant for s < r0/2 and zero for s > r0."""
        u = self.rescaled(np.clip(s, 0.5 * self.r0, self.r0))
        annulus = self._antiderivative(u) - self._antiderivative(1.0)
        return np.where(s > self.r0, 0.0, np.where(s < 0.5 * self.r0, self.phi_inner, annulus))

    def integrals(self):
        """(int psi, int psi^2, int Phi) over the torus for a single tube, by exact polynomial quadrature."""
        weight = self.line_length * 2.0 * math.pi
        # int Phi s ds = -1/2 int G(s) s ds after integrating by parts
        return (
            weight * self._moment(self.g, 1),
            weight * self._moment(self.g ** 2, 1),
            -0.5 * weight * self._moment(self._flux, 1),
        )


def _perpendicular(points, base, direction):
    """Shortest displacement (3, ...) from the periodic line base + t f to ``points``, and its length."""
    unit = direction / np.linalg.norm(direction)
    shape = (3,) + (1,) * (points.ndim - 1)
    d = points - base.reshape(shape)
    d = d - np.round(d)
    r = d - np.tensordot(unit, d, axes=(0, 0)) * unit.reshape(shape)
    # images that differ by a multiple of f give the same transverse shift
    shifts = np.unique(np.round(_IMAGES - np.outer(_IMAGES @ unit, unit), 12), axis=0)
    shifts = shifts[np.any(shifts != 0.0, axis=1)]
    own_sq = np.sum(r ** 2, axis=0)
    best_sq = own_sq
    choice = np.full(own_sq.shape, len(shifts))
    for index, shift in enumerate(shifts):
        sq = own_sq + 2.0 * np.tensordot(shift, r, axes=(0, 0)) + shift @ shift
        closer = sq < best_sq
        best_sq = np.where(closer, sq, best_sq)
        choice = np.where(closer, index, choice)
    moved = np.concatenate([shifts, np.zeros((1, 3))])[choice]
    return r + np.moveaxis(moved, -1, 0), np.sqrt(np.maximum(best_sq, 0.0))


def line_distances(base, f_index, candidates, g_index):
    """Torus distances between the line (base, f) and lines through ``candidates`` (K, 3) along g."""
    f, g = DIRECTIONS[f_index], DIRECTIONS[g_index]
    delta = candidates - base
    if f_index == g_index:
        _, s = _perpendicular(delta.T, np.zeros(3), f)
        return s
    normal = np.cross(f, g).astype(int)
    period = np.gcd.reduce(np.abs(normal))
    offset = np.mod(delta @ normal, period)
    return np.minimum(offset, period - offset) / np.linalg.norm(normal)


# Line centers, one per direction, in units of 1/12. On each functional n = (+-1, +-1, +-1)
# shared by three directions the centers sit 1/6 apart mod 1/2; coplanar pairs sit
# 1/12 apart mod 1/4 along their common normal.
LINE_CENTERS = np.array([
    (0, 0, 0),
    (1, 0, 1),
    (2, 0, 0),
    (3, 1, 0),
    (4, 0, 0),
    (2, 10, 0),
], dtype=float) / 12.0


def line_offset(f_index, parity):
    """
    Transverse offset of the parity class ``parity`` within direction f.

    With e the axis normal to the plane of f and t = (e x f) / 2, the offset is
    (i t + j e) / 4 with (i, j) = (2 k1 + k3, 2 k2 + k3): a checkerboard of the
    transverse torus that moves every other functional of f by a multiple of 1/2.
    """
    f = DIRECTIONS[f_index]
    axis = np.eye(3)[int(np.flatnonzero(f == 0)[0])]
    k1, k2, k3 = parity
    return ((2 * k1 + k3) * 0.5 * np.cross(axis, f) + (2 * k2 + k3) * axis) / 4.0


@lru_cache(maxsize=1)
def place_lines():
    """
    Base points of the 48 lines, l_(f,[k]) = LINE_CENTERS[f] + line_offset(f, [k]) + R f.

    Returns (bases, separation, closest) with ``closest`` the pair of tube keys
    at the smallest torus distance. The construction separates every pair by 1/12.
    """
    bases = np.array([np.mod(LINE_CENTERS[f] + line_offset(f, parity), 1.0) for f, parity in TUBE_KEYS])

    separation = np.inf
    closest = None
    for a, b in itertools.combinations(range(len(TUBE_KEYS)), 2):
        distance = float(line_distances(bases[a], TUBE_KEYS[a][0], bases[b][None, :], TUBE_KEYS[b][0])[0])
        if distance < separation:
            separation, closest = distance, (TUBE_KEYS[a], TUBE_KEYS[b])
    if not separation > 0.0:
        raise GeometryError(f'lines {closest[0]} and {closest[1]} coincide')
    logger.debug('placed %d lines, separation %.4f', len(TUBE_KEYS), separation)
    bases.setflags(write=False)
    return bases, separation, closest


def default_radius(factor=None):
    """Largest r0 (rounded down to 1e-4) that the placement separates by more than ``factor`` r0."""
    factor = factor or settings.LAB['TUBE_SEPARATION_FACTOR']
    _, separation, _ = place_lines()
    return math.floor(separation / factor * 1e4 - 1) / 1e4


@dataclass(frozen=True, eq=False)
class TubeFamily:
    """
    The 48 threaded tubes psi_(f,[k])(X) = g(dist(X, l_(f,[k]))).

    ``grid`` is the profile grid the tubes are sampled on; the closed forms
    are evaluated at arbitrary label points.
    """

    profile: TubeProfile
    bases: np.ndarray
    separation: float
    closest: tuple
    grid: object

    @property
    def r0(self):
        return self.profile.r0

    def base(self, key):
        return self.bases[TUBE_KEYS.index(key)]

    @staticmethod
    def direction(key):
        return DIRECTIONS[key[0]]

    def radial(self, key, points):
        return _perpendicular(points, self.base(key), self.direction(key))

    def psi(self, key, points):
        _, s = self.radial(key, points)
        return self.profile.value(s)

    def psi_gradient(self, key, points):
        """Closed-form grad psi = g'(s) s_hat, orthogonal to f."""
        r, s = self.radial(key, points)
        slope = self.profile.slope(s)
        return slope * r / np.maximum(s, 0.5 * self.r0)

    def potential(self, key, points):
        _, s = self.radial(key, points)
        return self.profile.potential(s)

    def potential_gradient(self, key, points):
        r, s = self.radial(key, points)
        return self.profile.potential_slope(s) * r / np.maximum(s, 0.5 * self.r0)

    def omega(self, key, points):
        """Closed-form Omega^{ab} = d^a Phi f^b - d^b Phi f^a, shape (3, 3, ...)."""
        grad = self.potential_gradient(key, points)
        f = self.direction(key).reshape((3,) + (1,) * (points.ndim - 1))
        return grad[:, None] * f[None, :] - f[:, None] * grad[None, :]

    def sample(self, key, grid=None):
        """psi sampled at the grid points; supports are exact."""
        grid = grid or self.grid
        return PeriodicField(grid, Rank.SCALAR, self.psi(key, grid.coordinates()))

    def normalized_sample(self, key, grid=None):
        """
        Sampled psi with the discrete mean removed by a multiple of the bump,
        Nyquist modes dropped, and the discrete L2 norm set to 1.
        """
        grid = grid or self.grid
        _, s = self.radial(key, grid.coordinates())
        values = self.profile.value(s)
        bump = self.profile.bump(s)
        values = values - bump * (values.mean() / bump.mean())
        field = nyquist_filter(PeriodicField(grid, Rank.SCALAR, values))
        return field * (1.0 / math.sqrt(np.mean(field.samples ** 2)))

    def support_counts(self, grid=None):
        grid = grid or self.grid
        points = grid.coordinates()
        return {key: int(np.count_nonzero(self.psi(key, points))) for key in TUBE_KEYS}


def build_tube_family(r0=None, profile=4, grid=None):
    """
    Place the 48 lines and attach the profile of radius ``r0``.

    ``profile`` is the bump power p. Raises GeometryError when the lines are
    not separated by more than TUBE_SEPARATION_FACTOR * r0 (naming the
    closest pair) or when some tube holds fewer than PROFILE_MIN_POINTS
    samples of ``grid``.
    """
    factor = settings.LAB['TUBE_SEPARATION_FACTOR']
    bases, separation, closest = place_lines()
    if r0 is None:
        r0 = default_radius(factor)
    if separation <= factor * r0:
        raise GeometryError(
            f'r0={r0} is infeasible: lines {closest[0]} and {closest[1]} are {separation:.4f} apart, '
            f'not more than {factor:g} r0 = {factor * r0:.4f}'
        )
    family = TubeFamily(TubeProfile(r0, profile), bases, separation, closest, grid)
    if grid is not None:
        counts = family.support_counts()
        key = min(counts, key=counts.get)
        minimum = settings.LAB['PROFILE_MIN_POINTS']
        if counts[key] < minimum:
            raise GeometryError(
                f'tube {key} holds {counts[key]} samples of the n={grid.n} grid, fewer than {minimum}; '
                f'refine the grid or raise r0'
            )
    logger.info('tube family: r0=%.4g, separation %.4f (%.2f r0)', r0, separation, separation / r0)
    return family


@dataclass(frozen=True, eq=False)
class TubePotentials:
    """Spectral potentials of one normalized tube sample on the profile grid."""

    key: tuple
    psi: PeriodicField
    omega: PeriodicField
    omega_tilde: PeriodicField

    def residuals(self):
        """(|d_a Omega^{ab} - psi f^b|, |d_c Omega~^{abc} - Omega^{ab}|), both relative."""
        f = DIRECTIONS[self.key[0]].reshape(3, 1, 1, 1)
        first = divergence(self.omega).samples - self.psi.samples[None] * f
        # divergence contracts the first index, so move c to the front
        tilde = PeriodicField(self.omega_tilde.grid, Rank.RANK3, np.moveaxis(self.omega_tilde.samples, 2, 0))
        second = divergence(tilde).samples - self.omega.samples
        return (
            float(np.max(np.abs(first))) / self.psi.sup_norm(),
            float(np.max(np.abs(second))) / max(self.omega.sup_norm(), np.finfo(float).tiny),
        )


def build_potentials(tubes, keys=None):
    """
    Omega = d^a Delta^-1 [psi f^b] - d^b Delta^-1 [psi f^a] and
    Omega~ = d^c Delta^-1 Omega on the profile grid, for ``keys`` (default all 48).

    Yields one TubePotentials per key.
    """
    keys = TUBE_KEYS if keys is None else tuple(keys)
    for key in keys:
        psi = tubes.normalized_sample(key)
        flux = PeriodicField(psi.grid, Rank.VECTOR, psi.samples[None] * DIRECTIONS[key[0]].reshape(3, 1, 1, 1))
        omega = vector_potential(flux)
        omega_tilde = inverse_gradient_potential(omega)
        logger.debug('potentials for tube %s: |Omega|=%.3e |Omega~|=%.3e', key, omega.sup_norm(), omega_tilde.sup_norm())
        yield TubePotentials(key, psi, omega, omega_tilde)


def steady_mikado_field(tubes, grid, parity=(0, 0, 0)):
    """The pressureless steady flow U = sum_f psi_(f,[k]) f for one parity class, sampled on ``grid``."""
    points = grid.coordinates()
    samples = np.zeros((3,) + grid.shape)
    for f_index, f in enumerate(DIRECTIONS):
        samples += tubes.psi((f_index, tuple(parity)), points)[None] * f.reshape(3, 1, 1, 1)
    return PeriodicField(grid, Rank.VECTOR, samples)


def parallel_mikado_field(tubes, grid, direction=0):
    """All eight parity classes of one direction, U = sum_[k] psi_(f,[k]) f; its tubes never cross."""
    points = grid.coordinates()
    profile = sum(tubes.psi((direction, parity), points) for parity in PARITIES)
    return PeriodicField(grid, Rank.VECTOR, profile[None] * DIRECTIONS[direction].reshape(3, 1, 1, 1))

"""
Wave assembly: the divergence-free correction V = sum_J V_J.

For a class J = (I, [k], f) with amplitude s = X_[k](Gamma) e^{1/2} gamma_f,
G = (grad Gamma)^-1, H = G G^T and w = G f,

    V_J^l = lam^-2 d_a d_c [ T^{acl} Phi(lam Gamma) ],   T^{acl} = s (H^{ac} w^l - w^a H^{lc})

which is the double divergence of a tensor antisymmetric in (a, l), hence
exactly divergence free. Its main term is V~_J = s psi(lam Gamma) w.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from django.conf import settings
from scipy.stats import linregress

from fields.grid import PeriodicField, Rank, to_physical, to_spectral
from fields.operators import divergence

from .exceptions import ResolutionError
from .geometry import DIRECTIONS, PARITIES


logger = logging.getLogger(__name__)

SWEEP_FREQUENCIES = (8, 16, 32, 64)


def oscillation_frequency(N, Xi, B_lambda=None):
    """lam = B_lambda N Xi rounded up to an integer."""
    B_lambda = settings.LAB['B_LAMBDA'] if B_lambda is None else B_lambda
    return int(math.ceil(B_lambda * N * Xi - 1e-12))


def mollification_scale(N, Xi, c_v=None):
    """eps_v = c_v N^{-1/2} / Xi, the common mollification scale of v and R."""
    if N < 1:
        raise ValueError(f'N must be at least 1, got {N}')
    c_v = settings.LAB['C_V'] if c_v is None else c_v
    return c_v / (math.sqrt(N) * Xi)


def _divergence_first(array, grid):
    """d_j A^{j...} on a raw sample array of any component shape."""
    k = grid.wavevectors()
    spectrum = to_spectral(array)
    extra = spectrum.ndim - 4
    return to_physical(np.sum(1j * k[(slice(None),) + (None,) * extra] * spectrum, axis=0), grid.n)


def pattern_norms(profile, samples=4001):
    """Sup norms of psi, Phi, |grad Phi| and |Omega|_F over the profile, on a fine radial grid."""
    s = np.linspace(0.0, profile.r0, samples)
    slope = float(np.max(np.abs(profile.potential_slope(s))))
    return {
        'psi': float(np.max(np.abs(profile.value(s)))),
        'potential': float(np.max(np.abs(profile.potential(s)))),
        'potential_gradient': slope,
        # |grad Phi (x) f - f (x) grad Phi|_F = sqrt 2 |f| |grad Phi| with grad Phi orthogonal to f
        'omega': 2.0 * slope,
    }


def _frobenius_sup(array, components):
    return float(np.sqrt(np.max(np.sum(array.reshape((-1,) + array.shape[components:]) ** 2, axis=0))))


@dataclass(frozen=True, eq=False)
class Wave:
    """One class (f, [k]) at one time sample. Field attributes are None unless kept."""

    key: tuple
    members: tuple
    frequency: int
    period: int
    amplitude: PeriodicField
    coefficient_bounds: tuple
    peak: float
    main: PeriodicField = None
    correction: PeriodicField = None
    velocity: PeriodicField = None
    psi: PeriodicField = None
    omega: PeriodicField = None
    omega_tilde: PeriodicField = None

    def correction_bound(self, frequency=None):
        """(C1/lam + C2/lam^2) / C0 with the lam-independent coefficient bounds (C0, C1, C2)."""
        frequency = frequency or self.frequency
        main, first, second = self.coefficient_bounds
        if main == 0.0:
            return 0.0
        return (first / frequency + second / frequency ** 2) / main


@dataclass(eq=False)
class WaveAssembly:
    frequency: int
    time_index: int
    velocity: PeriodicField
    main: PeriodicField
    main_stress: PeriodicField
    amplitude_stress: PeriodicField
    oscillation_stress: PeriodicField
    expansion: PeriodicField
    waves: list = field(default_factory=list)
    disjointness_defect: float = 0.0
    orthogonality_defect: float = 0.0

    @property
    def correction(self):
        return self.velocity - self.main

    def divergence_defect(self):
        """sup |div V| / sup |V|."""
        scale = max(self.velocity.sup_norm(), np.finfo(float).tiny)
        return divergence(self.velocity).sup_norm() / scale

    def expansion_gap(self):
        """sup |V - V~ - dV_expansion| / sup |V - V~|; small when the tubes are resolved."""
        gap = self.correction - self.expansion
        return gap.sup_norm() / max(self.correction.sup_norm(), np.finfo(float).tiny)

    def correction_ratio(self):
        """Measured sup |dV| / sup |V~|."""
        return self.correction.sup_norm() / max(self.main.sup_norm(), np.finfo(float).tiny)

    def correction_bound(self, frequency=None):
        return max((wave.correction_bound(frequency) for wave in self.waves), default=0.0)

    def peak(self):
        """max_J sup |v_J| |psi_J|."""
        return max((wave.peak for wave in self.waves), default=0.0)


def correction_slope(assembly, frequencies=SWEEP_FREQUENCIES):
    """Log-log slope of the correction bound over a frequency sweep; close to -1."""
    bounds = np.array([assembly.correction_bound(f) for f in frequencies])
    if not np.all(bounds > 0.0):
        raise ValueError('the correction bound vanishes; there is nothing to sweep')
    return float(linregress(np.log(frequencies), np.log(bounds)).slope)


def check_frequency(frame, index, frequency):
    grid = frame.grid
    jacobian = frame.maps[index].jacobian()
    # operator norm of grad Gamma
    speed = float(np.max(np.linalg.norm(np.moveaxis(jacobian, (0, 1), (-2, -1)), ord=2, axis=(-2, -1))))
    if int(frequency) != frequency or frequency < 1:
        raise ResolutionError(f'lam must be a positive integer, got {frequency}')
    if frequency * speed >= grid.n / 3.0:
        raise ResolutionError(
            f'lam |grad Gamma| = {frequency * speed:.3g} is not below n/3 = {grid.n / 3.0:.3g}; '
            f'refine the grid or lower lam'
        )


def assemble_waves(tubes, frame, amplitudes, frequency, index=0, keep_fields=False):
    """
    Assemble every class (f, [k]) at time sample ``index`` of ``frame``.

    ``amplitudes`` is the solve at that sample. With ``keep_fields`` each Wave
    carries its own V~, dV, V and composed tube fields.
    """
    check_frequency(frame, index, frequency)
    grid = frame.grid
    frame_map = frame.maps[index]
    labels = frame_map.labels()
    jacobian = frame_map.jacobian()
    inverse = frame_map.inverse_jacobian()
    H = np.einsum('ak...,ck...->ac...', inverse, inverse)
    directions = amplitudes.wave_directions()
    lifted = frequency * labels
    root_energy = math.sqrt(amplitudes.energy)
    norms = pattern_norms(tubes.profile)
    jacobian_norm = _frobenius_sup(jacobian, 2)

    shape = grid.shape
    totals = {
        'velocity': np.zeros((3,) + shape),
        'main': np.zeros((3,) + shape),
        'main_stress': np.zeros((3, 3) + shape),
        'amplitude_stress': np.zeros((3, 3) + shape),
        'oscillation_stress': np.zeros((3, 3) + shape),
        'expansion': np.zeros((3,) + shape),
        'magnitude_sum': np.zeros(shape),
        'magnitude_squares': np.zeros(shape),
    }
    waves = []
    orthogonality = 0.0

    for parity in PARITIES:
        cutoff = frame.partition.class_cutoff(parity, labels)
        for f_index in range(len(DIRECTIONS)):
            key = (f_index, parity)
            s = cutoff * root_energy * amplitudes.gamma[f_index]
            w = directions[f_index]
            T = s * (np.einsum('ac...,l...->cal...', H, w) - np.einsum('a...,lc...->cal...', w, H))

            psi = tubes.psi(key, lifted)
            potential = tubes.potential(key, lifted)
            W = PeriodicField(grid, Rank.RANK3, T * potential)
            velocity = divergence(divergence(W)).samples / frequency ** 2
            main = s * psi * w

            # product-rule expansion of the double divergence
            omega = tubes.omega(key, lifted)
            potential_gradient = tubes.potential_gradient(key, lifted)
            B = _divergence_first(s * np.einsum('ak...,lb...->aklb...', inverse, inverse), grid)
            Z = divergence(PeriodicField(grid, Rank.RANK3, T)).samples
            DDT = divergence(divergence(PeriodicField(grid, Rank.RANK3, T))).samples
            pulled_gradient = np.einsum('da...,d...->a...', jacobian, potential_gradient)
            expansion = (
                np.einsum('alb...,ab...->l...', B, omega) + np.einsum('a...,al...->l...', pulled_gradient, Z)
            ) / frequency + DDT * potential / frequency ** 2

            # v_J . grad psi_J = lam w . grad Gamma^T grad_X psi = lam f . grad_X psi
            gradient_x = frequency * np.einsum('da...,d...->a...', jacobian, tubes.psi_gradient(key, lifted))
            amplitude = s * w
            dot = np.abs(np.einsum('a...,a...->...', amplitude, gradient_x))
            scale = np.sqrt(np.sum(amplitude ** 2, axis=0) * np.sum(gradient_x ** 2, axis=0))
            if np.max(scale) > 0.0:
                orthogonality = max(orthogonality, float(np.max(dot) / np.max(scale)))

            magnitude = np.sqrt(np.sum(main ** 2, axis=0))
            outer = np.einsum('a...,b...->ab...', amplitude, amplitude)
            totals['velocity'] += velocity
            totals['main'] += main
            totals['main_stress'] += np.einsum('a...,b...->ab...', main, main)
            totals['amplitude_stress'] += outer
            totals['oscillation_stress'] += outer * (psi ** 2 - 1.0)
            totals['expansion'] += expansion
            totals['magnitude_sum'] += magnitude
            totals['magnitude_squares'] += magnitude ** 2

            bounds = (
                _frobenius_sup(amplitude, 1) * norms['psi'],
                _frobenius_sup(B, 3) * norms['omega'] + _frobenius_sup(Z, 2) * jacobian_norm * norms['potential_gradient'],
                _frobenius_sup(DDT, 1) * norms['potential'],
            )
            peak = float(np.max(np.sqrt(np.sum(amplitude ** 2, axis=0)) * np.abs(psi)))
            kept = {}
            if keep_fields:
                sample = partial(PeriodicField, grid)
                kept = {
                    'main': sample(Rank.VECTOR, main),
                    'correction': sample(Rank.VECTOR, velocity - main),
                    'velocity': sample(Rank.VECTOR, velocity),
                    'psi': sample(Rank.SCALAR, psi),
                    'omega': sample(Rank.ANTISYM2, omega),
                    'omega_tilde': sample(Rank.RANK3, potential * _tilde_pattern(DIRECTIONS[f_index], shape)),
                }
            waves.append(Wave(
                key=key,
                members=frame.partition.class_members(parity),
                frequency=int(frequency),
                period=frame.partition.period,
                amplitude=PeriodicField(grid, Rank.VECTOR, amplitude),
                coefficient_bounds=bounds,
                peak=peak,
                **kept,
            ))

    disjointness = float(np.max(np.abs(totals['magnitude_sum'] ** 2 - totals['magnitude_squares'])))
    assembly = WaveAssembly(
        frequency=int(frequency),
        time_index=index,
        velocity=PeriodicField(grid, Rank.VECTOR, totals['velocity']),
        main=PeriodicField(grid, Rank.VECTOR, totals['main']),
        main_stress=PeriodicField(grid, Rank.SYM2, _symmetric(totals['main_stress'])),
        amplitude_stress=PeriodicField(grid, Rank.SYM2, _symmetric(totals['amplitude_stress'])),
        oscillation_stress=PeriodicField(grid, Rank.SYM2, _symmetric(totals['oscillation_stress'])),
        expansion=PeriodicField(grid, Rank.VECTOR, totals['expansion']),
        waves=waves,
        disjointness_defect=disjointness,
        orthogonality_defect=orthogonality,
    )
    logger.info(
        'assembled %d waves at lam=%d: |V|=%.3e, div defect %.2e, disjointness %.1e',
        len(waves), frequency, assembly.velocity.sup_norm(), assembly.divergence_defect(), disjointness,
    )
    return assembly


def _symmetric(samples):
    return 0.5 * (samples + np.swapaxes(samples, 0, 1))


def _tilde_pattern(f, shape):
    """delta^{ac} f^b - delta^{bc} f^a, broadcast over the grid and indexed [a, b, c]."""
    identity = np.eye(3)
    pattern = np.einsum('ac,b->abc', identity, f) - np.einsum('bc,a->abc', identity, f)
    return pattern.reshape((3, 3, 3) + (1,) * len(shape))


def mollification_requirement(velocity, mollified, assembly, e_v, e_R, N, log_xihat):
    """
    Both sides of the mollification condition
    |v - v_eps| max_J |v_J| |psi_J| <= (log Xi^)^{1/2} e_v^{1/2} e_R^{1/2} / (500 N).
    """
    lhs = (velocity - mollified).sup_norm() * assembly.peak()
    rhs = math.sqrt(log_xihat * e_v * e_R) / (500.0 * N)
    return {'lhs': lhs, 'rhs': rhs, 'holds': bool(lhs <= rhs)}

"""
Nonstationary-phase parametrix for oscillatory sources U = u * omega(lam * Gamma).

With omega(X) = sum_m w_m exp(2 pi i m . X) and phase xi_m = 2 pi m . Gamma the
recursion, started from u_(0) = u, is

    q_(k),m^{jl} = qbar_a^{jl}(grad xi_m) u_(k-1),m^a
    u_(k),m^l    = -lam^-1 d_j q_(k),m^{jl}

and yields U = d_j Q_(D)^{jl} + U_(D) with

    Q_(D) = sum_m w_m lam^-1 exp(i lam xi_m) sum_{k<=D} q_(k),m
    U_(D) = sum_m w_m exp(i lam xi_m) u_(D),m

Real profiles have w_{-m} = conj(w_m) and the -m amplitudes are conjugate to
the +m ones, so only one mode of each pair is computed and the real part is
doubled.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from django.conf import settings
from scipy import fft, stats

from fields.frame import BackToLabelsMap
from fields.grid import PeriodicField, Rank
from fields.operators import divergence

from .exceptions import PhaseError, ProfileError, ResolutionError
from .symbols import qbar_apply


logger = logging.getLogger(__name__)

# |grad xi_m| below this fraction of 2 pi |m| counts as a stationary point
SINGULAR_PHASE = 1e-8


def _canonical(mode):
    """True for the representative of {m, -m} whose first nonzero entry is positive."""
    for component in mode:
        if component:
            return component > 0
    return False


@dataclass(frozen=True, eq=False)
class OscillatoryField:
    """
    u^l omega(lam Gamma(x)) for a real, mean-free profile omega.

    ``modes`` is an (M, 3) integer array holding one representative of each
    +-m pair and ``coefficients`` the matching complex w_m.
    """

    amplitude: PeriodicField
    modes: np.ndarray
    coefficients: np.ndarray
    frame: BackToLabelsMap
    frequency: int

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=int).reshape((-1, 3))
        coefficients = np.asarray(self.coefficients, dtype=complex).reshape(-1)
        object.__setattr__(self, 'modes', modes)
        object.__setattr__(self, 'coefficients', coefficients)
        if self.amplitude.rank is not Rank.VECTOR:
            raise ProfileError('the amplitude of an oscillatory field must be a vector field')
        if self.amplitude.grid != self.frame.grid:
            raise ProfileError('amplitude and frame live on different grids')
        if len(modes) != len(coefficients):
            raise ProfileError(f'{len(modes)} modes but {len(coefficients)} coefficients')
        if any(not _canonical(m) for m in modes):
            raise ProfileError('modes must be nonzero with a positive first nonzero entry')
        if int(self.frequency) != self.frequency or self.frequency < 1:
            raise ProfileError(f'frequency must be a positive integer, got {self.frequency}')

    @classmethod
    def from_profile(cls, amplitude, profile, frame, frequency, max_modes=None):
        """
        Extract Fourier coefficients of a profile sampled on its own unit grid.

        Coefficients below MODE_TRUNCATION * max|w| are dropped, Nyquist modes of
        the profile grid are ignored, and ``max_modes`` keeps only the largest.
        """
        samples = profile.samples if isinstance(profile, PeriodicField) else np.asarray(profile, dtype=float)
        n = samples.shape[0]
        spectrum = fft.fftn(samples) / samples.size
        scale = np.max(np.abs(spectrum))
        if abs(spectrum[0, 0, 0]) > settings.LAB['MEAN_TOLERANCE'] * max(scale, 1.0):
            raise ProfileError(f'profile mean {spectrum[0, 0, 0].real:.3e} is not zero')

        index = np.fft.fftfreq(n, d=1.0 / n).astype(int)
        keep = np.abs(spectrum) > settings.LAB['MODE_TRUNCATION'] * scale
        modes, coefficients = [], []
        for i, j, k in zip(*np.nonzero(keep)):
            mode = (index[i], index[j], index[k])
            if n // 2 in np.abs(mode) or not _canonical(mode):
                continue
            modes.append(mode)
            coefficients.append(spectrum[i, j, k])
        modes, coefficients = np.array(modes, dtype=int).reshape((-1, 3)), np.array(coefficients)
        if max_modes is not None and len(modes) > max_modes:
            order = np.argsort(-np.abs(coefficients), kind='stable')[:max_modes]
            modes, coefficients = modes[order], coefficients[order]
        logger.debug('profile on n=%d kept %d mode pairs', n, len(modes))
        return cls(amplitude, modes, coefficients, frame, frequency)

    @property
    def grid(self):
        return self.amplitude.grid

    def phase_gradient(self, mode):
        """grad xi_m = 2 pi m . grad Gamma, shape (3, n, n, n)."""
        return 2.0 * np.pi * np.einsum('b,ba...->a...', np.asarray(mode, dtype=float), self.frame.jacobian())

    def carrier(self, mode):
        """exp(i lam xi_m) at the grid points."""
        phase = 2.0 * np.pi * np.einsum('b,b...->...', np.asarray(mode, dtype=float), self.frame.labels())
        return np.exp(1j * self.frequency * phase)

    def profile_values(self):
        """omega(lam Gamma) at the grid points."""
        values = np.zeros(self.grid.shape)
        for mode, coefficient in zip(self.modes, self.coefficients):
            values += 2.0 * np.real(coefficient * self.carrier(mode))
        return values

    def evaluate(self):
        return self.amplitude.with_samples(self.amplitude.samples * self.profile_values())

    def check_resolution(self):
        """Raise ResolutionError when the carrier of some mode exceeds the grid Nyquist frequency."""
        for mode in self.modes:
            speed = np.sqrt(np.max(np.sum(self.phase_gradient(mode) ** 2, axis=0)))
            cycles = self.frequency * speed / (2.0 * np.pi)
            if cycles >= self.grid.n / 2:
                raise ResolutionError(
                    f'mode {tuple(int(c) for c in mode)} at frequency {self.frequency} oscillates at '
                    f'{cycles:.3g} cycles, above n/2 = {self.grid.n // 2}'
                )


@dataclass(frozen=True, eq=False)
class ParametrixResult:
    """
    Output of ``parametrix``.

    ``divergence`` is d_j Q computed with the phase-aware product rule, so that
    U - divergence - remainder vanishes to round-off whatever the resolution.
    """

    order: int
    potential: PeriodicField
    remainder: PeriodicField
    divergence: PeriodicField
    stage_norms: np.ndarray
    amplitudes: dict = field(default_factory=dict)


def _complex_divergence(tensor, grid):
    """d_j T^{jl} of a complex symmetric amplitude, real and imaginary parts separately."""
    real = divergence(PeriodicField(grid, Rank.SYM2, tensor.real)).samples
    imag = divergence(PeriodicField(grid, Rank.SYM2, tensor.imag)).samples
    return real + 1j * imag


def parametrix(oscillatory, order, keep_amplitudes=False):
    """
    Run the recursion to ``order`` D (1 <= D <= MAX_PARAMETRIX_ORDER).

    Raises PhaseError where grad xi_m vanishes on the support of u and
    ResolutionError when the carriers are not resolved by the grid.
    """
    limit = settings.LAB['MAX_PARAMETRIX_ORDER']
    if int(order) != order or not 1 <= order <= limit:
        raise ProfileError(f'parametrix order must be an integer in [1, {limit}], got {order}')
    oscillatory.check_resolution()

    grid = oscillatory.grid
    lam = float(oscillatory.frequency)
    support = oscillatory.amplitude.pointwise_magnitude() > 0
    potential = np.zeros((3, 3) + grid.shape)
    remainder = np.zeros((3,) + grid.shape)
    div_q = np.zeros((3,) + grid.shape)
    stage_norms = np.zeros(order)
    amplitudes = {}

    for mode, coefficient in zip(oscillatory.modes, oscillatory.coefficients):
        grad_xi = oscillatory.phase_gradient(mode)
        speed = np.sqrt(np.sum(grad_xi ** 2, axis=0))
        if np.any(support & (speed <= SINGULAR_PHASE * 2.0 * np.pi * np.linalg.norm(mode))):
            worst = np.unravel_index(np.argmin(np.where(support, speed, np.inf)), grid.shape)
            raise PhaseError(f'grad xi vanishes for mode {tuple(mode)} at grid point {worst} inside supp u')

        u = oscillatory.amplitude.samples.astype(complex)
        q_sum = np.zeros((3, 3) + grid.shape, dtype=complex)
        div_sum = np.zeros((3,) + grid.shape, dtype=complex)
        stages = []
        for k in range(order):
            q = qbar_apply(grad_xi, u)
            u_next = -_complex_divergence(q, grid) / lam
            # d_j(e^{i lam xi} q^{jl}) / lam = e^{i lam xi} (i d_j xi q^{jl} - u_next)
            div_sum += 1j * np.einsum('j...,jl...->l...', grad_xi, q) - u_next
            q_sum += q
            stage_norms[k] += 2.0 * abs(coefficient) * float(np.max(np.abs(u_next)))
            if keep_amplitudes:
                stages.append((q, u_next))
            u = u_next

        carrier = coefficient * oscillatory.carrier(mode)
        potential += 2.0 * np.real(carrier * q_sum) / lam
        remainder += 2.0 * np.real(carrier * u)
        div_q += 2.0 * np.real(carrier * div_sum)
        if keep_amplitudes:
            amplitudes[tuple(int(c) for c in mode)] = stages

    logger.debug(
        'parametrix D=%d lam=%d over %d mode pairs: |U_(D)|_inf=%.3e',
        order, oscillatory.frequency, len(oscillatory.modes), np.max(np.abs(remainder)),
    )
    return ParametrixResult(
        order=order,
        potential=PeriodicField(grid, Rank.SYM2, 0.5 * (potential + potential.swapaxes(0, 1))),
        remainder=PeriodicField(grid, Rank.VECTOR, remainder),
        divergence=PeriodicField(grid, Rank.VECTOR, div_q),
        stage_norms=stage_norms,
        amplitudes=amplitudes,
    )


def parametrix_divergence(oscillatory, order):
    """d_j Q_(D)^{jl} by the phase-aware product rule."""
    return parametrix(oscillatory, order).divergence


def identity_defect(oscillatory, result):
    """sup |U - d_j Q_(D) - U_(D)| relative to sup |U|."""
    source = oscillatory.evaluate()
    defect = source - result.divergence - result.remainder
    return defect.sup_norm() / max(source.sup_norm(), np.finfo(float).tiny)


def with_frequency(oscillatory, frequency):
    return OscillatoryField(
        oscillatory.amplitude, oscillatory.modes, oscillatory.coefficients, oscillatory.frame, frequency,
    )


def decay_slope(oscillatory, order, frequencies):
    """
    Fitted slope of log |U_(D)|_inf against log lam over ``frequencies`` at a fixed frame.

    Returns (slope, norms).
    """
    norms = np.array([
        parametrix(with_frequency(oscillatory, lam), order).remainder.sup_norm()
        for lam in frequencies
    ])
    fit = stats.linregress(np.log(np.asarray(frequencies, dtype=float)), np.log(norms))
    logger.info('remainder decay for D=%d: slope %.3f over lam in %s', order, fit.slope, list(frequencies))
    return float(fit.slope), norms


def monotonicity_threshold(oscillatory, max_order=None):
    """
    Smallest lam above which |U_(D+1)| <= |U_(D)| holds for the stage bounds.

    The stage norms scale exactly like lam^-D at a fixed frame, so the bound
    at lam = 1 determines the threshold max_D a_{D+1} / a_D.
    """
    max_order = max_order or settings.LAB['MAX_PARAMETRIX_ORDER']
    unit = parametrix(with_frequency(oscillatory, 1), max_order).stage_norms
    bounds = np.concatenate(([2.0 * np.sum(np.abs(oscillatory.coefficients)) * oscillatory.amplitude.sup_norm()], unit))
    ratios = np.divide(bounds[1:], bounds[:-1], out=np.zeros(max_order), where=bounds[:-1] > 0)
    return float(ratios.max())

"""
Spectral calculus on the unit 3-torus.

Every operator here is a Fourier multiplier built on the Grid wavevector table,
so each one commutes with grid translations. Inverse operators annihilate the
mean mode and refuse inputs whose mean is not zero.
"""

import logging
from functools import lru_cache

import numpy as np
from django.conf import settings

from divsolve.symbols import qbar_apply

from .exceptions import GridError, MeanModeError
from .grid import Grid, PeriodicField, Rank, to_physical
from .kernels import kernel_transform, validate_scale


logger = logging.getLogger(__name__)

_RAISED = {
    Rank.SCALAR: Rank.VECTOR,
    Rank.VECTOR: Rank.TENSOR2,
    Rank.SYM2: Rank.RANK3,
    Rank.ANTISYM2: Rank.RANK3,
    Rank.TENSOR2: Rank.RANK3,
}

_LOWERED = {
    Rank.VECTOR: Rank.SCALAR,
    Rank.SYM2: Rank.VECTOR,
    Rank.ANTISYM2: Rank.VECTOR,
    Rank.TENSOR2: Rank.VECTOR,
    Rank.RANK3: Rank.TENSOR2,
}


def _inverse_wavenumber_squared(grid):
    ksq = grid.wavenumber_squared()
    inverse = np.zeros_like(ksq)
    np.divide(1.0, ksq, out=inverse, where=ksq > 0)
    return inverse


def require_zero_mean(field, operation):
    """Raise MeanModeError unless every component of ``field`` has zero mean."""
    tolerance = settings.LAB['MEAN_TOLERANCE']
    worst = float(np.max(np.abs(field.mean()))) if field.samples.size else 0.0
    if worst > tolerance * max(field.sup_norm(), np.finfo(float).tiny):
        raise MeanModeError(
            f'{operation} needs a zero-mean {field.rank.value} field; largest component mean is {worst:.3e}'
        )


def spectral_derivative(field, axis):
    """Exact derivative of the trigonometric interpolant along ``axis`` (0, 1, 2)."""
    if axis not in (0, 1, 2):
        raise GridError(f'axis must be 0, 1 or 2, got {axis}')
    k = field.grid.wavevectors()[axis]
    samples = to_physical(1j * k * field.spectrum(), field.n)
    return field.with_samples(samples)


def gradient(field):
    """Append a derivative index: (grad f)^{...a} = d_a f^{...}."""
    if field.rank not in _RAISED:
        raise GridError(f'gradient of a {field.rank.value} field is not supported')
    components = len(field.component_shape)
    k = field.grid.wavevectors()
    k = k.reshape((3,) + (1,) * components + k.shape[1:])
    derivative = to_physical(1j * k * field.spectrum()[None], field.n)
    samples = np.moveaxis(derivative, 0, components)
    return PeriodicField(field.grid, _RAISED[field.rank], samples)


def divergence(field):
    """Contract the first index with the derivative: (div T)^{...} = d_j T^{j...}."""
    if field.rank not in _LOWERED:
        raise GridError(f'divergence of a {field.rank.value} field is not supported')
    k = field.grid.wavevectors()
    spectrum = field.spectrum()
    extra = spectrum.ndim - 4
    contracted = np.sum(1j * k[(slice(None),) + (None,) * extra] * spectrum, axis=0)
    return PeriodicField(field.grid, _LOWERED[field.rank], to_physical(contracted, field.n))


def double_divergence(field):
    """d_j d_l T^{jl} for a rank-2 field."""
    return divergence(divergence(field))


def laplacian(field):
    spectrum = -field.grid.wavenumber_squared() * field.spectrum()
    return field.with_samples(to_physical(spectrum, field.n))


def inverse_laplacian(field):
    """Delta^{-1} with the mean mode zeroed; requires a zero-mean field."""
    require_zero_mean(field, 'inverse_laplacian')
    spectrum = -_inverse_wavenumber_squared(field.grid) * field.spectrum()
    return field.with_samples(to_physical(spectrum, field.n))


def inverse_gradient_potential(field):
    """Append an index gamma: nabla^gamma Delta^{-1} f, so that its divergence in gamma returns f."""
    require_zero_mean(field, 'inverse_gradient_potential')
    potential = gradient(inverse_laplacian(field))
    if field.rank is Rank.ANTISYM2:
        samples = potential.samples
        samples = 0.5 * (samples - samples.swapaxes(0, 1))
        return potential.with_samples(samples, Rank.RANK3)
    return potential


def vector_potential(field):
    """
    Antisymmetric potential of a divergence-free, zero-mean vector field:

        Omega^{ab} = d^a Delta^{-1} y^b - d^b Delta^{-1} y^a,

    so that d_a Omega^{ab} = y^b.
    """
    if field.rank is not Rank.VECTOR:
        raise GridError('vector_potential needs a vector field')
    require_zero_mean(field, 'vector_potential')
    spectrum = field.spectrum()
    k = field.grid.wavevectors()
    inverse = _inverse_wavenumber_squared(field.grid)
    half = to_physical(-1j * k[:, None] * spectrum[None, :] * inverse, field.n)
    return PeriodicField(field.grid, Rank.ANTISYM2, half - half.swapaxes(0, 1))


def divergence_range(field):
    """
    Keep the modes a spectral divergence can produce: those whose wavevector,
    with Nyquist components zeroed, is nonzero. On an even grid this drops the
    mean and the seven corner modes built from Nyquist and zero indices only.
    """
    keep = field.grid.wavenumber_squared() > 0
    return field.with_samples(to_physical(keep * field.spectrum(), field.n))


def anti_divergence_sym(field):
    """
    Symmetric R with d_j R^{jl} = U^l for a zero-mean vector field U.

    The multiplier is the degree -1 symbol of divsolve evaluated at each
    wavevector, which makes the result exactly symmetric. Modes outside
    ``divergence_range`` have no preimage and are dropped, so in general
    d_j R^{jl} = divergence_range(U)^l.
    """
    if field.rank is not Rank.VECTOR:
        raise GridError('anti_divergence_sym needs a vector field')
    require_zero_mean(field, 'anti_divergence_sym')
    spectrum = qbar_apply(field.grid.wavevectors(), field.spectrum())
    samples = to_physical(spectrum, field.n)
    samples = 0.5 * (samples + samples.swapaxes(0, 1))
    return PeriodicField(field.grid, Rank.SYM2, samples)


@lru_cache(maxsize=64)
def _mollifier_multiplier(n, eps, kernel):
    # |m|^2 is an integer, so the radial transform is evaluated once per shell
    msq = np.round(Grid(n).wavenumber_squared() / (2.0 * np.pi) ** 2)
    shells, inverse = np.unique(msq, return_inverse=True)
    values = kernel_transform(kernel, 2.0 * np.pi * eps * np.sqrt(shells))
    multiplier = values[inverse].reshape(msq.shape)
    multiplier.setflags(write=False)
    return multiplier


def mollify(field, eps, kernel='A'):
    """Convolution with eta_eps(h) = eps^-3 eta(h / eps), applied as a spectral multiplier."""
    validate_scale(eps)
    multiplier = _mollifier_multiplier(field.n, float(eps), kernel)
    return field.with_samples(to_physical(multiplier * field.spectrum(), field.n))


def translate(field, shift):
    """Spectral translation f(x - h) for an arbitrary shift vector h."""
    k = field.grid.wavevectors()
    phase = np.exp(-1j * np.tensordot(np.asarray(shift, dtype=float), k, axes=(0, 0)))
    return field.with_samples(to_physical(phase * field.spectrum(), field.n))


def nyquist_filter(field):
    """Drop every mode that has a Nyquist component on some axis."""
    m = field.grid.mode_indices()
    keep = np.all(np.abs(m) < field.n // 2, axis=0)
    return field.with_samples(to_physical(keep * field.spectrum(), field.n))


def band_filter(field, band):
    """Keep modes with |m_i| <= band on every axis."""
    m = field.grid.mode_indices()
    keep = np.all(np.abs(m) <= band, axis=0)
    return field.with_samples(to_physical(keep * field.spectrum(), field.n))


def leray_project(field):
    """Helmholtz projection onto divergence-free fields (mean mode kept)."""
    if field.rank is not Rank.VECTOR:
        raise GridError('leray_project needs a vector field')
    spectrum = field.spectrum()
    k = field.grid.wavevectors()
    inverse = _inverse_wavenumber_squared(field.grid)
    k_dot = np.sum(k * spectrum, axis=0)
    projected = spectrum - k * k_dot * inverse
    return field.with_samples(to_physical(projected, field.n))


def outer(a, b, dealias=False):
    """
    Pointwise product a^j b^l of two vector fields as a tensor2 field.

    Collocation by default: grid-pointwise identities such as disjoint supports
    carry over exactly. With ``dealias`` both factors and the result are cut to
    |m_i| <= n/3 (the 2/3 rule), which makes the retained modes exact.
    """
    if a.grid != b.grid:
        raise GridError('fields live on different grids')
    if a.rank is not Rank.VECTOR or b.rank is not Rank.VECTOR:
        raise GridError('outer needs two vector fields')
    if dealias:
        a, b = band_filter(a, a.n // 3), band_filter(b, b.n // 3)
    product = PeriodicField(a.grid, Rank.TENSOR2, a.samples[:, None] * b.samples[None, :])
    return band_filter(product, a.n // 3) if dealias else product


def self_outer(v, dealias=False):
    """v^j v^l as an exactly symmetric field."""
    if dealias:
        v = band_filter(v, v.n // 3)
    product = PeriodicField(v.grid, Rank.SYM2, v.samples[:, None] * v.samples[None, :])
    return band_filter(product, v.n // 3) if dealias else product


def symmetrize(field):
    """Symmetric part of a rank-2 field."""
    samples = field.samples
    return PeriodicField(field.grid, Rank.SYM2, 0.5 * (samples + samples.swapaxes(0, 1)))


def scale(field, weight):
    """Multiply a field pointwise by a scalar field."""
    if weight.rank is not Rank.SCALAR:
        raise GridError('scale needs a scalar weight field')
    return field.with_samples(field.samples * weight.samples)


def trace(field):
    if field.rank not in (Rank.SYM2, Rank.TENSOR2, Rank.ANTISYM2):
        raise GridError('trace needs a rank-2 field')
    return PeriodicField(field.grid, Rank.SCALAR, np.einsum('jj...->...', field.samples))


def isotropic(scalar):
    """The symmetric field s * delta^{jl}."""
    samples = np.einsum('jl,...->jl...', np.eye(3), scalar.samples)
    return PeriodicField(scalar.grid, Rank.SYM2, samples)


def pressure_solve(velocity=None, stress=None):
    """
    Zero-mean pressure with Delta p = d_j d_l (R^{jl} - v^j v^l).

    Either argument may be omitted; at least one is needed to fix the grid.
    """
    reference = velocity if velocity is not None else stress
    if reference is None:
        raise GridError('pressure_solve needs a velocity or a stress field')
    forcing = PeriodicField.zeros(reference.grid, Rank.SYM2)
    if stress is not None:
        forcing = forcing + stress
    if velocity is not None:
        forcing = forcing - self_outer(velocity)
    k = reference.grid.wavevectors()
    spectrum = forcing.spectrum()
    contracted = np.einsum('j...,l...,jl...->...', k, k, spectrum)
    pressure = to_physical(contracted * _inverse_wavenumber_squared(reference.grid), reference.n)
    logger.debug('pressure solve on n=%d: |p|_inf=%.3e', reference.n, np.max(np.abs(pressure)))
    return PeriodicField(reference.grid, Rank.SCALAR, pressure)

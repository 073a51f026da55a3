"""
Radial mollifier kernels supported in the unit ball.

Two C-infinity bumps are provided so that kernel-dependence can be tested:

    - 'A': exp(-1 / (1 - r^2))
    - 'B': exp(-1 / (1 - r^4))

Both are even, so mollification errors are second order in the scale. The
Fourier transform of a radial kernel is

    eta_hat(s) = 4 pi int_0^1 eta(r) r^2 sinc(s r) dr,

evaluated by Gauss-Legendre quadrature and divided by eta_hat(0) for unit mass.
"""

from functools import lru_cache

import numpy as np
from django.conf import settings
from numpy.polynomial.legendre import leggauss

from .exceptions import MollifierError


def _bump_a(r):
    return np.exp(-1.0 / (1.0 - r ** 2))


def _bump_b(r):
    return np.exp(-1.0 / (1.0 - r ** 4))


KERNELS = {
    'A': _bump_a,
    'B': _bump_b,
}


def kernel_profile(kernel):
    try:
        return KERNELS[kernel]
    except KeyError:
        raise MollifierError(f'unknown mollifier kernel {kernel!r}; choose one of {sorted(KERNELS)}') from None


@lru_cache(maxsize=8)
def _radial_nodes(kernel, nodes):
    profile = kernel_profile(kernel)
    x, w = leggauss(nodes)
    r = 0.5 * (x + 1.0)
    weights = 0.5 * w * profile(r) * r ** 2
    return r, weights / weights.sum()


def kernel_transform(kernel, s):
    """Normalized transform eta_hat(|xi|) at the radial frequencies ``s``."""
    r, weights = _radial_nodes(kernel, settings.LAB['KERNEL_QUADRATURE_NODES'])
    s = np.asarray(s, dtype=float)
    flat = s.reshape(-1)
    values = np.sinc(np.outer(flat, r) / np.pi) @ weights
    return values.reshape(s.shape)


def second_moment(kernel):
    """int |h|^2 eta(h) dh for the unit-mass kernel."""
    r, weights = _radial_nodes(kernel, settings.LAB['KERNEL_QUADRATURE_NODES'])
    return float(weights @ r ** 2)


def validate_scale(eps):
    if not 0.0 < eps < 0.25:
        raise MollifierError(f'mollification scale must lie in (0, 1/4), got {eps}')

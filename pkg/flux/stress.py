"""
Commutator stress, trilinear flux and the local dissipation density.

Sign convention: R_eps = eta_eps * (v (x) v) - v_eps (x) v_eps, so that
T_eps = int d_j (v_eps)^l R_eps^{jl} and D_eps = d_j (v_eps)^l R_eps^{jl}.
"""

import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from fields.grid import PeriodicField, Rank
from fields.operators import gradient, mollify, self_outer

from .exceptions import ExponentError


logger = logging.getLogger(__name__)


def cet_stress(v, eps, kernel='A'):
    """R_eps = eta_eps * (v v) - v_eps v_eps, exactly symmetric."""
    if v.rank is not Rank.VECTOR:
        raise ValueError('cet_stress needs a vector field')
    smoothed = mollify(v, eps, kernel)
    return mollify(self_outer(v), eps, kernel) - self_outer(smoothed)


def _density(v, eps, kernel):
    smoothed = mollify(v, eps, kernel)
    # gradient is indexed [l, j] = d_j v_eps^l
    strain = gradient(smoothed)
    stress = mollify(self_outer(v), eps, kernel) - self_outer(smoothed)
    density = np.einsum('lj...,jl...->...', strain.samples, stress.samples)
    return PeriodicField(v.grid, Rank.SCALAR, density), strain, stress


def trilinear_flux(v, eps, kernel='A'):
    """T_eps[v, v, v] = int d_j (v_eps)^l R_eps^{jl} dx."""
    density, _, _ = _density(v, eps, kernel)
    return float(density.mean())


def duchon_robert_density(v, eps, kernel='A'):
    """The pointwise approximant d_j (v_eps)^l R_eps^{jl} of the dissipation measure."""
    density, _, _ = _density(v, eps, kernel)
    return density


@dataclass(frozen=True)
class HolderChain:
    """|D_eps|_{r/3} <= |grad v_eps|_r |R_eps|_{r/2}, with Frobenius magnitudes."""

    eps: float
    density: float
    gradient: float
    stress: float

    @property
    def bound(self):
        return self.gradient * self.stress

    @property
    def holds(self):
        return self.density <= self.bound * (1.0 + 1e-12)


def holder_chain(v, eps, kernel='A', r=None):
    r = settings.LAB['FLUX_R'] if r is None else r
    if r < 3:
        raise ExponentError(f'the Holder chain needs r >= 3, got {r}')
    density, strain, stress = _density(v, eps, kernel)
    chain = HolderChain(
        eps=float(eps),
        density=density.lebesgue_norm(r / 3.0),
        gradient=strain.lebesgue_norm(r),
        stress=stress.lebesgue_norm(r / 2.0),
    )
    logger.debug('holder chain at eps=%.4g: %.3e <= %.3e', eps, chain.density, chain.bound)
    return chain

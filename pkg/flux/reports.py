"""Mollification sweeps, the kernel-independence test and the FluxReport tables."""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from django.conf import settings
from scipy import stats

from fields.kernels import KERNELS
from fields.operators import mollify

from .besov import besov_norm
from .exceptions import ScaleGridError
from .stress import cet_stress, duchon_robert_density, holder_chain, trilinear_flux


logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    PASS = 'PASS'
    FAIL = 'FAIL'
    INCONCLUSIVE = 'INCONCLUSIVE'


def validate_scales(eps_grid):
    eps = tuple(float(e) for e in eps_grid)
    if not eps:
        raise ScaleGridError('the mollification scale grid is empty')
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ScaleGridError(f'mollification scales must be strictly decreasing, got {eps}')
    return eps


def fit_order(eps, values):
    """Least-squares slope of log |value| against log eps; nan with fewer than two nonzero values."""
    eps, values = np.asarray(eps, dtype=float), np.abs(np.asarray(values, dtype=float))
    keep = values > np.finfo(float).tiny
    if np.count_nonzero(keep) < 2:
        return math.nan
    return float(stats.linregress(np.log(eps[keep]), np.log(values[keep])).slope)


def flux_scale(v):
    """|v|_{L^3}^3, the natural size of a trilinear form in v."""
    return v.lebesgue_norm(3.0) ** 3


@dataclass(frozen=True)
class Extrapolation:
    limit: float
    error: float
    converged: bool


def extrapolate(values, scale):
    """
    Geometric-tail extrapolation of a sequence from its last three terms.

    The sequence counts as converged when the estimated tail is below
    FLUX_CONVERGENCE times its largest term, or when every term is below
    FLUX_TOLERANCE times ``scale``.
    """
    values = np.asarray(values, dtype=float)
    largest = float(np.max(np.abs(values)))
    if largest <= settings.LAB['FLUX_TOLERANCE'] * scale:
        return Extrapolation(0.0, largest, True)
    if len(values) < 3:
        return Extrapolation(float(values[-1]), math.inf, False)
    first, second = values[-2] - values[-3], values[-1] - values[-2]
    if first == 0.0 or not 0.0 < second / first < 1.0:
        return Extrapolation(float(values[-1]), math.inf, False)
    ratio = second / first
    tail = second * ratio / (1.0 - ratio)
    error = abs(tail)
    return Extrapolation(float(values[-1] + tail), error, error <= settings.LAB['FLUX_CONVERGENCE'] * largest)


@dataclass(frozen=True)
class IndependenceResult:
    verdict: Verdict
    eps: tuple
    sequences: dict
    limits: dict

    def as_dict(self):
        return {
            'verdict': self.verdict.value,
            'eps': list(self.eps),
            'sequences': {kernel: list(values) for kernel, values in self.sequences.items()},
            'limits': {kernel: extrapolation.limit for kernel, extrapolation in self.limits.items()},
        }


def compare_limits(sequences, limits, scale):
    if not all(extrapolation.converged for extrapolation in limits.values()):
        return Verdict.INCONCLUSIVE
    largest = max(max(abs(t) for t in values) for values in sequences.values())
    allowance = settings.LAB['FLUX_CONVERGENCE'] * largest + settings.LAB['FLUX_TOLERANCE'] * scale
    values = [extrapolation.limit for extrapolation in limits.values()]
    return Verdict.PASS if max(values) - min(values) <= allowance else Verdict.FAIL


def kernel_independence_test(v0, eps_grid=None, kernels=('A', 'B')):
    """
    Necessary condition on initial data: T_eps[v0, v0, v0] must converge to a
    limit that does not depend on the mollifying kernel.

    PASS when both sequences converge to limits that agree, FAIL when they
    converge to different limits, INCONCLUSIVE otherwise.
    """
    eps = validate_scales(settings.LAB['FLUX_EPS'] if eps_grid is None else eps_grid)
    if len(set(kernels)) < 2:
        raise ValueError('the independence test needs two distinct kernels')
    scale = flux_scale(v0)
    sequences = {kernel: tuple(trilinear_flux(v0, e, kernel) for e in eps) for kernel in kernels}
    limits = {kernel: extrapolate(values, scale) for kernel, values in sequences.items()}

    verdict = compare_limits(sequences, limits, scale)
    logger.info('kernel independence over %d scales: %s', len(eps), verdict.value)
    return IndependenceResult(verdict, eps, sequences, limits)


@dataclass
class FluxReport:
    """Per-scale flux diagnostics of one field; ``rows`` feeds the CSV, ``summary`` the JSON."""

    eps: tuple
    kernels: tuple
    flux: dict = field(default_factory=dict)
    density_norms: dict = field(default_factory=dict)
    stress_norms: dict = field(default_factory=dict)
    holder: list = field(default_factory=list)
    besov: object = None
    independence: IndependenceResult = None
    r: float = 4.0

    def orders(self):
        return {
            kernel: {
                'flux': fit_order(self.eps, self.flux[kernel]),
                'stress': fit_order(self.eps, self.stress_norms[kernel]),
                'density': fit_order(self.eps, self.density_norms[kernel]),
            }
            for kernel in self.kernels
        }

    def bound_ratio(self):
        """max over eps of |D_eps|_{r/3} / |v|_B^3, the constant of the uniform bound for this field."""
        cube = self.besov.norm ** 3
        largest = max(max(values) for values in self.density_norms.values())
        return largest / cube if cube > 0.0 else math.inf if largest > 0.0 else 0.0

    def rows(self):
        holder = {chain.eps: chain for chain in self.holder}
        for kernel in self.kernels:
            for index, e in enumerate(self.eps):
                chain = holder.get(e) if kernel == self.kernels[0] else None
                yield {
                    'eps': e,
                    'kernel': kernel,
                    'flux': self.flux[kernel][index],
                    'density_norm': self.density_norms[kernel][index],
                    'stress_sup': self.stress_norms[kernel][index],
                    'holder_lhs': chain.density if chain else '',
                    'holder_rhs': chain.bound if chain else '',
                }

    def summary(self):
        return {
            'eps': list(self.eps),
            'kernels': list(self.kernels),
            'r': self.r,
            'besov': {
                'norm': self.besov.norm,
                'lebesgue': self.besov.lebesgue,
                'seminorm': self.besov.seminorm,
                'worst_shift': list(self.besov.worst_shift),
                'shifts': self.besov.shifts,
                'lower_bound': True,
            },
            'orders': self.orders(),
            'bound_ratio': self.bound_ratio(),
            'holder_chain_holds': all(chain.holds for chain in self.holder),
            'independence': self.independence.as_dict() if self.independence else None,
        }


def flux_report(v, eps_grid=None, kernels=('A', 'B'), r=None):
    """Run every flux diagnostic of ``v`` over the scale grid."""
    eps = validate_scales(settings.LAB['FLUX_EPS'] if eps_grid is None else eps_grid)
    unknown = [kernel for kernel in kernels if kernel not in KERNELS]
    if unknown:
        raise ValueError(f'unknown kernels {unknown}')
    r = settings.LAB['FLUX_R'] if r is None else r
    report = FluxReport(eps=eps, kernels=tuple(kernels), r=float(r))
    for kernel in kernels:
        report.flux[kernel] = [trilinear_flux(v, e, kernel) for e in eps]
        report.density_norms[kernel] = [duchon_robert_density(v, e, kernel).lebesgue_norm(r / 3.0) for e in eps]
        report.stress_norms[kernel] = [cet_stress(v, e, kernel).sup_norm() for e in eps]
    report.holder = [holder_chain(v, e, kernels[0], r) for e in eps]
    report.besov = besov_norm(v, r)
    if len(kernels) >= 2:
        report.independence = kernel_independence_test(v, eps, kernels[:2])
    logger.info('flux report over %d scales and kernels %s', len(eps), ', '.join(kernels))
    return report


def smoothed_energy(v, eps, kernel='A'):
    """1/2 |v_eps|^2 averaged over the torus."""
    return 0.5 * float(np.mean(np.sum(mollify(v, eps, kernel).samples ** 2, axis=0)))

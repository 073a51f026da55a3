"""
Holder-modulus estimates of the limit flow and the fitted borderline constant B.

At grid scale |dx| = exp(-l) the estimate uses the last stage k_bar whose
frequency Xi_hat_(k_bar) does not exceed 1/|dx|:

    log bound = log(8 C_L) + log L + 1/3 delta log Xi_hat + (1/3 log Xi_hat + 1/2 log e_R) - l/3

all evaluated at k_bar. Writing the bound as |dx|^(1/3 - B sqrt(log log / log))
gives B = (l/3 + log bound - log(8 C_L)) / sqrt(l log l).

The raw bound jumps up each time k_bar changes; ``log_envelope`` is the
nondecreasing envelope over all smaller scales.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, TraceTooShortError
from .levels import run_iteration


logger = logging.getLogger(__name__)

MAX_DELTA_X = 1e-2


@dataclass(frozen=True)
class HolderEstimate:
    log_inv_dx: float
    k_bar: int
    log_bound: float
    log_envelope: float


def _resolve_scale(delta_x, log_inv_dx):
    if (delta_x is None) == (log_inv_dx is None):
        raise ConfigurationError('pass exactly one of delta_x and log_inv_dx')
    if delta_x is not None:
        if not 0.0 < delta_x <= MAX_DELTA_X:
            raise ConfigurationError(f'|dx| must lie in (0, {MAX_DELTA_X}], got {delta_x}')
        return -math.log(delta_x)
    if not log_inv_dx >= -math.log(MAX_DELTA_X):
        raise ConfigurationError(f'log(1/|dx|) must be >= log 100, got {log_inv_dx}')
    return float(log_inv_dx)


def holder_modulus(trace, delta_x=None, log_inv_dx=None):
    """
    Estimate the modulus at one scale, given as ``delta_x`` or as ``log_inv_dx``.

    Scales below about 1e-300 only fit as ``log_inv_dx``. A stage sitting
    exactly on the boundary Xi_hat |dx| = 1 counts as resolved.
    """
    level = _resolve_scale(delta_x, log_inv_dx)
    log_xihat = trace.log_xihat
    resolved = np.nonzero(log_xihat <= level + 1e-12 * max(1.0, abs(level)))[0]
    if not len(resolved):
        raise TraceTooShortError(f'log Xi_hat_(1) = {log_xihat[0]:.6g} already exceeds log(1/|dx|) = {level:.6g}')
    index = int(resolved[-1])
    if index >= trace.k_max - 1:
        raise TraceTooShortError(
            f'log Xi_hat_(k_max) = {log_xihat[-1]:.6g} does not exceed log(1/|dx|) = {level:.6g}; raise k_max'
        )

    constant = math.log(8.0 * trace.config.c_l)
    growth = trace.delta(log_xihat)
    stage = constant + np.log(log_xihat) + growth / 3.0 + 0.5 * trace.log_er
    log_bound = float(stage[index] + log_xihat[index] / 3.0 - level / 3.0)
    finer = stage[index + 1:trace.k_max - 1]
    log_envelope = max(log_bound, float(finer.max())) if len(finer) else log_bound
    return HolderEstimate(level, index + 1, log_bound, log_envelope)


def borderline_constant(estimate, c_l):
    level = estimate.log_inv_dx
    return (level / 3.0 + estimate.log_bound - math.log(8.0 * c_l)) / math.sqrt(level * math.log(level))


@dataclass(frozen=True, eq=False)
class BFit:
    log_inv_dx: np.ndarray
    estimates: np.ndarray
    extrapolated: float
    coefficients: np.ndarray


def default_scale_grid(trace, count=24, first_stage=10):
    """Geometric grid of log(1/|dx|) between stage ``first_stage`` and the end of the trace."""
    log_xihat = trace.log_xihat
    if trace.k_max <= first_stage + 2:
        raise TraceTooShortError(f'a scale grid needs k_max > {first_stage + 2}, got {trace.k_max}')
    low = max(log_xihat[first_stage - 1], -math.log(MAX_DELTA_X))
    high = log_xihat[trace.k_max - 2]
    return np.geomspace(low, high, count)


def fit_B(trace, log_inv_dx_grid=None):
    """
    B per scale and its extrapolation B + c0 / log l + c1 log log l / log l by least squares.
    """
    grid = default_scale_grid(trace) if log_inv_dx_grid is None else np.asarray(log_inv_dx_grid, dtype=float)
    if len(grid) < 3:
        raise ConfigurationError('fit_B needs at least three scales')
    estimates = np.array([
        borderline_constant(holder_modulus(trace, log_inv_dx=level), trace.config.c_l) for level in grid
    ])
    log_level = np.log(grid)
    design = np.column_stack([np.ones_like(grid), 1.0 / log_level, np.log(log_level) / log_level])
    coefficients, *_ = np.linalg.lstsq(design, estimates, rcond=None)
    logger.info(
        'B at the deepest scale %.4f, extrapolated %.4f (gamma=%g, A=%g)',
        estimates[-1], coefficients[0], trace.config.gamma, trace.config.a_exp,
    )
    return BFit(grid, estimates, float(coefficients[0]), coefficients)


def closed_form_b(gamma, a_exp):
    """Leading coefficient (gamma/2 + 2(A/3 + 1/6)) / sqrt(3 gamma / 2)."""
    return (0.5 * gamma + 2.0 * (a_exp / 3.0 + 1.0 / 6.0)) / math.sqrt(1.5 * gamma)


def optimal_gamma(a_exp):
    """The minimizer 4(A/3 + 1/6) of closed_form_b: 4 for A = 5/2, 8/3 for A = 3/2."""
    return 4.0 * (a_exp / 3.0 + 1.0 / 6.0)


def minimize_closed_form(a_exp, gammas):
    gammas = np.asarray(gammas, dtype=float)
    values = np.array([closed_form_b(g, a_exp) for g in gammas])
    return float(gammas[np.argmin(values)])


def sweep_gamma(config, gammas):
    """Fitted B at the deepest scale for each gamma, as a list of (gamma, B) pairs."""
    results = []
    for gamma in gammas:
        fit = fit_B(run_iteration(config.replace(gamma=float(gamma))))
        results.append((float(gamma), float(fit.estimates[-1])))
    return results

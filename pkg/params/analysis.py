"""
Checks on a finished trace: the shrinking condition, the asymptotic ratios, and
the bisection that picks a small enough initial stress level.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from .exceptions import ConfigurationError, LevelDomainError, TraceTooShortError
from .levels import run_iteration
from .sums import c0_geometric_bound


logger = logging.getLogger(__name__)

SHRINKING_THRESHOLD = -math.log(2.0)

# the shrinking margins only come close to -log 2 at small k
CALIBRATION_HORIZON = 200


@dataclass(frozen=True, eq=False)
class ShrinkingReport:
    margins: np.ndarray
    violations: tuple

    @property
    def passes(self):
        return not self.violations


def check_shrinking(trace):
    """
    Margins 1/2 delta log log Xi_hat + 1/2 delta log e_R per k.

    A margin above -log 2 at some k >= 2 is a violation of the halving
    condition (log Xi_hat e_R)^1/2 at k + 1 <= half its value at k.
    """
    if trace.k_max < 3:
        raise TraceTooShortError(f'the shrinking check needs k_max >= 3, got {trace.k_max}')
    margins = trace.shrinking_margin
    violations = tuple(int(k) for k, m in zip(trace.k, margins) if np.isfinite(m) and m > SHRINKING_THRESHOLD)
    if violations:
        logger.info('shrinking condition fails at %d stage(s), first at k=%d', len(violations), violations[0])
    return ShrinkingReport(margins=margins, violations=violations)


ASYMPTOTIC_RATIOS = (
    'log_er', 'energy_gap', 'frequency_growth', 'log_xihat', 'log_log_xihat', 'holder_sum',
)


def asymptotics_report(trace):
    """
    The six ratios that tend to 1 as k grows, as arrays over k (NaN at k = 1).

    - log_er:           -log e_R / ((gamma k^2 / 2) log k)
    - energy_gap:       1/2 log(e_v / e_R) / (1/2 gamma k log k)
    - frequency_growth: delta log Xi_hat / ((3 gamma / 2) k log k)
    - log_xihat:        log Xi_hat / ((3/2)(gamma k^2 / 2) log k)
    - log_log_xihat:    log log Xi_hat / (2 log k)
    - holder_sum:       (1/3 log Xi_hat + 1/2 log e_R) / (2 (A/3 + 1/6) k log k)
    """
    if trace.k_max < 100:
        raise TraceTooShortError(f'asymptotics need k_max >= 100, got {trace.k_max}')
    config = trace.config
    k = trace.k.astype(float)
    with np.errstate(divide='ignore', invalid='ignore'):
        k_log_k = k * np.log(k)
        k_log_k[0] = np.nan
        ratios = {
            'log_er': -trace.log_er / (0.5 * config.gamma * k * k_log_k),
            'energy_gap': 0.5 * (trace.log_ev - trace.log_er) / (0.5 * config.gamma * k_log_k),
            'frequency_growth': trace.delta(trace.log_xihat) / (1.5 * config.gamma * k_log_k),
            'log_xihat': trace.log_xihat / (0.75 * config.gamma * k * k_log_k),
            'log_log_xihat': trace.log_log_xihat / (2.0 * k_log_k / k),
            'holder_sum': trace.holder_exponent_sum / (2.0 * config.key_rule_slope * k_log_k),
        }
    return ratios


def _passes(config, limit):
    try:
        trace = run_iteration(config)
    except (LevelDomainError, ConfigurationError):
        return False
    if not check_shrinking(trace).passes:
        return False
    bound = c0_geometric_bound(float(trace.log_xihat[0]), float(trace.log_er[0]), config.c_l)
    return bound <= limit


def calibrate_initial_stress(config, steps=None):
    """
    Largest log e_R,(1) found by bisection for which the shrinking check passes
    at every k <= k_max and the C0 geometric bound stays within C0_SUM_LIMIT.
    """
    if config.gain.mode == 'power' and config.gamma < 2:
        raise ConfigurationError(f'the shrinking check needs gamma >= 2, got {config.gamma}')
    if config.k_max < 3:
        raise TraceTooShortError(f'calibration needs k_max >= 3, got {config.k_max}')
    steps = steps or settings.LAB['BISECTION_STEPS']
    limit = settings.LAB['C0_SUM_LIMIT']
    trial = config.replace(k_max=min(config.k_max, CALIBRATION_HORIZON))

    # log Xi_hat_(1) = log Xi_bar - log e_R1 / 2 must reach log 3
    high = min(-1e-9, 2.0 * (config.log_xibar - math.log(3.0)))
    low = high - 2000.0
    if _passes(trial.replace(log_er_init=high), limit):
        low = high
    elif not _passes(trial.replace(log_er_init=low), limit):
        raise ConfigurationError(f'no initial stress level down to log e_R1 = {low:.6g} passes the checks')
    else:
        for _ in range(steps):
            middle = 0.5 * (low + high)
            if _passes(trial.replace(log_er_init=middle), limit):
                low = middle
            else:
                high = middle

    if trial.k_max < config.k_max and not _passes(config.replace(log_er_init=low), limit):
        raise ConfigurationError(f'log e_R1 = {low:.6g} passes up to k={trial.k_max} but not up to k_max')
    logger.info('calibrated log e_R1 = %.6g (gamma=%g, c_hat=%g)', low, config.gamma, config.c_hat)
    return low

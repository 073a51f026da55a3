"""
Frequency-energy levels and their iteration, entirely in natural-log space.

Types:
    - FrequencyEnergyLevels: (log Xi, log e_v, log e_R) with the derived log Xi_hat
    - GainSchedule: how the per-stage gain log g_(k) is chosen
    - IterationConfig: constants and initial data of a run
    - IterationTrace: per-k records for k = 1..k_max

With L = log Xi_hat_(k) and log N = A log L + (log e_v - log e_R)/2 + log g one step is

    log Xi'  = log c_hat + log N + log Xi
    log e_v' = log L + log e_R
    log e_R' = log e_R - log g

The levels at k = 1 and k = 2 coincide; stepping starts at k = 2.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from django.conf import settings

from .exceptions import ConfigurationError, LevelDomainError


logger = logging.getLogger(__name__)

LOG_EXPONENTS = (2.5, 1.5)


@dataclass(frozen=True)
class FrequencyEnergyLevels:
    log_xi: float
    log_ev: float
    log_er: float

    def __post_init__(self):
        values = (self.log_xi, self.log_ev, self.log_er)
        if not all(math.isfinite(v) for v in values):
            raise ConfigurationError(f'levels must be finite, got {values}')
        if self.log_ev < self.log_er:
            raise ConfigurationError(f'levels need e_v >= e_R, got log e_v={self.log_ev} < log e_R={self.log_er}')

    @property
    def log_xihat(self):
        return self.log_xi + 0.5 * (self.log_ev - self.log_er)

    @property
    def holder_exponent_sum(self):
        """1/3 log Xi_hat + 1/2 log e_R, the quantity the key rule tracks."""
        return self.log_xihat / 3.0 + 0.5 * self.log_er


@dataclass(frozen=True)
class GainSchedule:
    """
    Choice of log g_(k) for k >= 2.

    - ``power``: gamma k log k
    - ``sequence``: explicit values, ``values[0]`` is log g_(2)
    - ``balanced``: sum_{I<=k} (log log Xi_hat_(I) + log c_hat) + 1/2 log log Xi_hat_(k)
    """

    mode: str = 'power'
    values: tuple = ()

    MODES = ('power', 'sequence', 'balanced')

    def __post_init__(self):
        if self.mode not in self.MODES:
            raise ConfigurationError(f'unknown gain mode {self.mode!r}; choose one of {list(self.MODES)}')
        object.__setattr__(self, 'values', tuple(float(v) for v in self.values))
        if self.mode == 'sequence':
            if not self.values:
                raise ConfigurationError('a sequence gain schedule needs at least one value')
            if not all(math.isfinite(v) and v > 0 for v in self.values):
                raise ConfigurationError('sequence gains must satisfy g > 1 (finite, positive log g)')


@dataclass(frozen=True)
class IterationConfig:
    c_hat: float = math.e
    c_l: float = 1.0
    gamma: float = 4.0
    a_exp: float = 2.5
    log_er_init: float = -20.0
    log_xibar: float = 0.0
    k_max: int = 100
    gain: GainSchedule = field(default_factory=GainSchedule)

    def __post_init__(self):
        for name in ('c_hat', 'c_l', 'gamma', 'a_exp', 'log_er_init', 'log_xibar'):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigurationError(f'{name} must be a finite number, got {value!r}')
        if self.c_hat <= 0 or self.c_l <= 0 or self.gamma <= 0:
            raise ConfigurationError('c_hat, c_l and gamma must be positive')
        if self.a_exp not in LOG_EXPONENTS:
            raise ConfigurationError(f'a_exp must be 5/2 or 3/2, got {self.a_exp}')
        if self.log_er_init >= 0:
            raise ConfigurationError(f'log_er_init must be negative, got {self.log_er_init}')
        if int(self.k_max) != self.k_max or self.k_max < 2:
            raise ConfigurationError(f'k_max must be an integer >= 2, got {self.k_max}')
        if self.gain.mode == 'sequence' and len(self.gain.values) < self.k_max - 2:
            raise ConfigurationError(
                f'sequence gain has {len(self.gain.values)} values, k_max={self.k_max} needs {self.k_max - 2}'
            )

    @classmethod
    def from_settings(cls, **overrides):
        """Config with c_hat and C_L taken from settings.LAB unless overridden."""
        overrides.setdefault('c_hat', settings.LAB['C_HAT'])
        overrides.setdefault('c_l', settings.LAB['C_L'])
        return cls(**overrides)

    @property
    def log_c_hat(self):
        return math.log(self.c_hat)

    @property
    def key_rule_slope(self):
        """A/3 + 1/6."""
        return self.a_exp / 3.0 + 1.0 / 6.0

    def replace(self, **changes):
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values.update(changes)
        return IterationConfig(**values)


def init_levels(config):
    """(log Xi_bar - log e_R1 / 2, log e_R1, log e_R1)."""
    return FrequencyEnergyLevels(
        log_xi=config.log_xibar - 0.5 * config.log_er_init,
        log_ev=config.log_er_init,
        log_er=config.log_er_init,
    )


def _log_log_xihat(levels, k=None):
    log_xihat = levels.log_xihat
    if log_xihat <= 1.0:
        where = '' if k is None else f' at k={k}'
        raise LevelDomainError(f'log Xi_hat = {log_xihat:.6g} <= 1{where}; log log Xi_hat must be positive')
    return math.log(log_xihat)


def power_gain(gamma, k):
    return gamma * k * math.log(k)


def step_levels(levels, k, config, log_g=None):
    """
    Levels at k + 1 from the levels at k >= 2.

    ``log_g`` defaults to the power schedule gamma k log k. Raises
    LevelDomainError when log Xi_hat <= 1.
    """
    if k < 2:
        raise ConfigurationError(f'step_levels needs k >= 2, got {k}')
    log_l = _log_log_xihat(levels, k)
    if log_g is None:
        log_g = power_gain(config.gamma, k)
    log_n = config.a_exp * log_l + 0.5 * (levels.log_ev - levels.log_er) + log_g
    return FrequencyEnergyLevels(
        log_xi=config.log_c_hat + log_n + levels.log_xi,
        log_ev=math.log(levels.log_xihat) + levels.log_er,
        log_er=levels.log_er - log_g,
    )


def key_rule_residual(levels, next_levels, config):
    """
    delta(1/3 log Xi_hat + 1/2 log e_R) - [(A/3 + 1/6) log L + 1/3 log c_hat].

    Zero to round-off for any gain g > 1.
    """
    log_l = _log_log_xihat(levels)
    change = next_levels.holder_exponent_sum - levels.holder_exponent_sum
    return change - (config.key_rule_slope * log_l + config.log_c_hat / 3.0)


@dataclass(frozen=True, eq=False)
class IterationTrace:
    """
    Per-k arrays for k = 1..k_max (index k - 1).

    Entries that do not apply at a given k are NaN: log g, log N and the
    differenced quantities at k = 1, and differenced quantities at k_max.
    """

    config: IterationConfig
    log_xi: np.ndarray
    log_ev: np.ndarray
    log_er: np.ndarray
    log_g: np.ndarray
    log_n: np.ndarray
    key_rule_residual: np.ndarray

    COLUMNS = (
        'k', 'log_xi', 'log_ev', 'log_er', 'log_xihat', 'log_g', 'log_N',
        'key_rule_residual', 'shrinking_margin',
    )

    @property
    def k(self):
        return np.arange(1, len(self.log_xi) + 1)

    @property
    def k_max(self):
        return len(self.log_xi)

    @property
    def log_xihat(self):
        return self.log_xi + 0.5 * (self.log_ev - self.log_er)

    @property
    def log_log_xihat(self):
        return np.log(self.log_xihat)

    @property
    def holder_exponent_sum(self):
        return self.log_xihat / 3.0 + 0.5 * self.log_er

    def delta(self, values):
        """Forward difference x_(k+1) - x_(k); NaN at k_max."""
        return np.append(np.diff(values), np.nan)

    @property
    def shrinking_margin(self):
        """1/2 delta log log Xi_hat + 1/2 delta log e_R, NaN at k = 1 and k_max."""
        return 0.5 * self.delta(self.log_log_xihat) - 0.5 * self.log_g

    def levels(self, k):
        return FrequencyEnergyLevels(
            float(self.log_xi[k - 1]), float(self.log_ev[k - 1]), float(self.log_er[k - 1]),
        )

    def rows(self):
        columns = (
            self.k, self.log_xi, self.log_ev, self.log_er, self.log_xihat, self.log_g, self.log_n,
            self.key_rule_residual, self.shrinking_margin,
        )
        for values in zip(*columns):
            yield dict(zip(self.COLUMNS, (int(values[0]),) + tuple(float(v) for v in values[1:])))


def _next_gain(config, k, log_l_history):
    if config.gain.mode == 'power':
        return power_gain(config.gamma, k)
    if config.gain.mode == 'sequence':
        return config.gain.values[k - 2]
    return sum(log_l + config.log_c_hat for log_l in log_l_history) + 0.5 * log_l_history[-1]


def run_iteration(config):
    """
    Iterate the levels from k = 1 to k_max.

    Raises ConfigurationError if log Xi_hat_(1) < log 3 and LevelDomainError
    if a step leaves the domain.
    """
    levels = init_levels(config)
    if levels.log_xihat < math.log(3.0):
        raise ConfigurationError(f'log Xi_hat_(1) = {levels.log_xihat:.6g} is below log 3')

    k_max = int(config.k_max)
    log_xi = np.empty(k_max)
    log_ev = np.empty(k_max)
    log_er = np.empty(k_max)
    log_g = np.full(k_max, np.nan)
    log_n = np.full(k_max, np.nan)
    residual = np.full(k_max, np.nan)

    log_xi[0], log_ev[0], log_er[0] = levels.log_xi, levels.log_ev, levels.log_er
    log_l_history = [_log_log_xihat(levels, 1)]
    for k in range(2, k_max + 1):
        log_xi[k - 1], log_ev[k - 1], log_er[k - 1] = levels.log_xi, levels.log_ev, levels.log_er
        if k == k_max:
            break
        log_l_history.append(_log_log_xihat(levels, k))
        gain = _next_gain(config, k, log_l_history)
        following = step_levels(levels, k, config, log_g=gain)
        log_g[k - 1] = gain
        log_n[k - 1] = config.a_exp * log_l_history[-1] + 0.5 * (levels.log_ev - levels.log_er) + gain
        residual[k - 1] = key_rule_residual(levels, following, config)
        levels = following

    logger.debug(
        'iterated %d stages (gain=%s): log Xi_hat_(k_max)=%.6g, log e_R_(k_max)=%.6g',
        k_max, config.gain.mode, log_xi[-1] + 0.5 * (log_ev[-1] - log_er[-1]), log_er[-1],
    )
    return IterationTrace(config, log_xi, log_ev, log_er, log_g, log_n, residual)

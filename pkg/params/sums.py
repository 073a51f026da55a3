"""
Series carried along the iteration.

- time support: sum_k Xi_(k)^-1 e_v,(k)^-1/2 bounds how far the time support
  of the corrections can grow; it must converge.
- C0 bound: sum_k C_L (log Xi_hat_(k))^1/2 e_R,(k)^1/2 bounds the total size of
  the corrections; with the shrinking condition it is dominated by the
  geometric series 2 C_L (log Xi_hat_(1))^1/2 e_R,(1)^1/2, which must stay <= 5.
"""

import math
from dataclasses import dataclass

import numpy as np
from django.conf import settings
from scipy.special import logsumexp


@dataclass(frozen=True, eq=False)
class SupportSums:
    log_support_terms: np.ndarray
    log_c0_terms: np.ndarray
    c0_geometric: float
    c0_limit: float

    @property
    def log_support_partial(self):
        return np.logaddexp.accumulate(self.log_support_terms)

    @property
    def log_support_total(self):
        return float(logsumexp(self.log_support_terms))

    @property
    def log_c0_partial(self):
        return np.logaddexp.accumulate(self.log_c0_terms)

    @property
    def c0_total(self):
        return float(np.exp(logsumexp(self.log_c0_terms)))

    @property
    def c0_passes(self):
        return self.c0_geometric <= self.c0_limit

    def support_tail_fraction(self, k):
        """Share of the time-support series contributed by terms with index > k."""
        if k >= len(self.log_support_terms):
            return 0.0
        return float(np.exp(logsumexp(self.log_support_terms[k:]) - self.log_support_total))


def c0_geometric_bound(log_xihat_1, log_er_1, c_l):
    """2 C_L (log Xi_hat_(1))^1/2 e_R,(1)^1/2."""
    return 2.0 * c_l * math.sqrt(log_xihat_1) * math.exp(0.5 * log_er_1)


def support_and_c0_sums(trace):
    config = trace.config
    log_support_terms = -trace.log_xi - 0.5 * trace.log_ev
    log_c0_terms = math.log(config.c_l) + 0.5 * np.log(trace.log_xihat) + 0.5 * trace.log_er
    return SupportSums(
        log_support_terms=log_support_terms,
        log_c0_terms=log_c0_terms,
        c0_geometric=c0_geometric_bound(float(trace.log_xihat[0]), float(trace.log_er[0]), config.c_l),
        c0_limit=settings.LAB['C0_SUM_LIMIT'],
    )


def time_support_radius(trace):
    """Partial sums of Xi^-1 e_v^-1/2, one per k."""
    return np.exp(support_and_c0_sums(trace).log_support_partial)

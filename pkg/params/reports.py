"""JSON-ready summaries of an iteration run."""

import math

from .analysis import ASYMPTOTIC_RATIOS, asymptotics_report, check_shrinking
from .holder import closed_form_b, fit_B, optimal_gamma
from .sums import support_and_c0_sums


def finite_or_none(value):
    value = float(value)
    return value if math.isfinite(value) else None


def iteration_summary(trace, calibrated_log_er=None, fit=None, tail_stage=50):
    """
    Headline numbers of a run: key-rule residual, shrinking verdict, sums,
    fitted and closed-form B, and the asymptotic ratios at k_max - 1.
    """
    config = trace.config
    residual = trace.key_rule_residual
    scale = max(1.0, float(abs(trace.holder_exponent_sum).max()))
    shrinking = check_shrinking(trace) if trace.k_max >= 3 else None
    sums = support_and_c0_sums(trace)

    summary = {
        'config': {
            'c_hat': config.c_hat,
            'c_l': config.c_l,
            'gamma': config.gamma,
            'a_exp': config.a_exp,
            'log_er_init': config.log_er_init,
            'log_xibar': config.log_xibar,
            'k_max': int(config.k_max),
            'gain': config.gain.mode,
        },
        'key_rule_max_relative_residual': finite_or_none(abs(residual[1:-1]).max() / scale) if trace.k_max > 2 else None,
        'shrinking_violations': list(shrinking.violations) if shrinking else None,
        'calibrated_log_er_init': finite_or_none(calibrated_log_er) if calibrated_log_er is not None else None,
        'time_support_total': math.exp(sums.log_support_total),
        'time_support_tail_fraction': sums.support_tail_fraction(tail_stage),
        'c0_geometric': sums.c0_geometric,
        'c0_total': sums.c0_total,
        'c0_passes': sums.c0_passes,
        'b_closed_form': closed_form_b(config.gamma, config.a_exp),
        'gamma_star': optimal_gamma(config.a_exp),
    }
    if fit is None and trace.k_max > 12:
        fit = fit_B(trace)
    if fit is not None:
        summary['b_fit'] = {
            'log_inv_dx': [float(v) for v in fit.log_inv_dx],
            'estimates': [float(v) for v in fit.estimates],
            'extrapolated': fit.extrapolated,
        }
    if trace.k_max >= 100:
        ratios = asymptotics_report(trace)
        summary['asymptotic_ratios'] = {name: finite_or_none(ratios[name][-2]) for name in ASYMPTOTIC_RATIOS}
    return summary

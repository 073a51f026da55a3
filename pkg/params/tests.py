import math

import numpy as np
from django.test import SimpleTestCase, override_settings
from hypothesis import given, settings as hypothesis_settings
from hypothesis import strategies as st

from .analysis import asymptotics_report, calibrate_initial_stress, check_shrinking
from .exceptions import ConfigurationError, LevelDomainError, TraceTooShortError
from .holder import closed_form_b, fit_B, holder_modulus, minimize_closed_form, optimal_gamma, sweep_gamma
from .levels import (
    FrequencyEnergyLevels, GainSchedule, IterationConfig, IterationTrace, init_levels, key_rule_residual,
    run_iteration, step_levels,
)
from .reports import iteration_summary
from .sums import support_and_c0_sums, time_support_radius


def relative_key_rule_residual(trace):
    scale = max(1.0, float(np.abs(trace.holder_exponent_sum).max()))
    return float(np.nanmax(np.abs(trace.key_rule_residual))) / scale


class InitLevelsTest(SimpleTestCase):
    """Test cases for init_levels and config validation."""

    def test_unit_xibar(self):
        """Test (log Xi_bar, log e_R1) = (0, -2) gives (1, -2, -2)."""
        levels = init_levels(IterationConfig(log_xibar=0.0, log_er_init=-2.0))
        self.assertEqual((levels.log_xi, levels.log_ev, levels.log_er), (1.0, -2.0, -2.0))

    def test_xibar_ten(self):
        """Test (log 10, -20) gives (log 10 + 10, -20, -20)."""
        levels = init_levels(IterationConfig(log_xibar=math.log(10.0), log_er_init=-20.0))
        self.assertAlmostEqual(levels.log_xi, math.log(10.0) + 10.0)
        self.assertEqual(levels.log_ev, -20.0)
        self.assertEqual(levels.log_er, -20.0)

    def test_nan_is_rejected(self):
        """Test that a NaN initial stress level is rejected."""
        with self.assertRaises(ConfigurationError):
            IterationConfig(log_er_init=float('nan'))

    def test_log_exponent_must_be_known(self):
        """Test that A must be 5/2 or 3/2."""
        with self.assertRaises(ConfigurationError):
            IterationConfig(a_exp=2.0)

    def test_levels_need_ev_above_er(self):
        """Test that e_v >= e_R is enforced."""
        with self.assertRaises(ConfigurationError):
            FrequencyEnergyLevels(1.0, -3.0, -2.0)

    def test_unknown_gain_mode(self):
        """Test that only the power, sequence and balanced gains exist."""
        with self.assertRaises(ConfigurationError):
            GainSchedule(mode='constant')

    @override_settings(LAB={'C_HAT': 2.0, 'C_L': 3.0})
    def test_constants_from_settings(self):
        """Test that c_hat and C_L default to the LAB settings."""
        config = IterationConfig.from_settings(gamma=4.0)
        self.assertEqual((config.c_hat, config.c_l), (2.0, 3.0))


class StepLevelsTest(SimpleTestCase):
    """Test cases for step_levels."""

    def setUp(self):
        self.config = IterationConfig(c_hat=1.0, gamma=4.0, a_exp=2.5)
        self.levels = FrequencyEnergyLevels(100.0, -10.0, -10.0)

    def test_direct_substitution(self):
        """Test log Xi' = 2.5 log 100 + 2 gamma log 2 + 100 for c_hat = 1, k = 2."""
        following = step_levels(self.levels, 2, self.config)
        self.assertAlmostEqual(following.log_xi, 2.5 * math.log(100.0) + 8.0 * math.log(2.0) + 100.0, places=12)
        self.assertAlmostEqual(following.log_ev, math.log(100.0) - 10.0, places=12)

    def test_stress_level_drops_by_gain(self):
        """Test log e_R' - log e_R = -gamma k log k."""
        for k in (2, 5, 40):
            following = step_levels(self.levels, k, self.config)
            self.assertAlmostEqual(following.log_er - self.levels.log_er, -4.0 * k * math.log(k), places=10)

    def test_frequency_identity(self):
        """Test delta log Xi_hat = log c_hat + (A + 1/2) log L + 3/2 log g."""
        config = IterationConfig(c_hat=math.e ** 2, gamma=3.0, a_exp=1.5)
        levels = FrequencyEnergyLevels(40.0, -5.0, -12.0)
        following = step_levels(levels, 7, config)
        expected = 2.0 + 2.0 * math.log(levels.log_xihat) + 1.5 * 3.0 * 7 * math.log(7)
        self.assertAlmostEqual(following.log_xihat - levels.log_xihat, expected, places=10)

    def test_log_xihat_at_most_one(self):
        """Test that log Xi_hat <= 1 is outside the domain."""
        with self.assertRaises(LevelDomainError):
            step_levels(FrequencyEnergyLevels(1.0, -2.0, -2.0), 2, self.config)

    def test_first_stage_is_not_stepped(self):
        """Test that stepping starts at k = 2."""
        with self.assertRaises(ConfigurationError):
            step_levels(self.levels, 1, self.config)


class KeyRuleTest(SimpleTestCase):
    """Test cases for the key evolution rule."""

    @hypothesis_settings(max_examples=30, deadline=None)
    @given(
        st.lists(st.floats(0.01, 50.0), min_size=30, max_size=30),
        st.sampled_from([1.0, math.e, math.exp(3.0)]),
        st.sampled_from([2.5, 1.5]),
    )
    def test_holds_for_any_gain_sequence(self, gains, c_hat, a_exp):
        """Test that the residual vanishes for arbitrary g > 1."""
        config = IterationConfig(c_hat=c_hat, a_exp=a_exp, k_max=32, gain=GainSchedule('sequence', gains))
        self.assertLess(relative_key_rule_residual(run_iteration(config)), 1e-10)

    def test_long_power_trace(self):
        """Test the residual over 10^4 stages of the power gain."""
        for c_hat, a_exp in ((math.e, 2.5), (1.0, 1.5), (math.exp(5.0), 2.5)):
            trace = run_iteration(IterationConfig(c_hat=c_hat, a_exp=a_exp, k_max=10_000))
            self.assertLess(relative_key_rule_residual(trace), 1e-10)

    def test_no_constant_for_unit_c_hat(self):
        """Test the rule with c_hat = 1 against (A/3 + 1/6) log L alone."""
        config = IterationConfig(c_hat=1.0)
        levels = FrequencyEnergyLevels(30.0, -4.0, -9.0)
        following = step_levels(levels, 3, config)
        change = following.holder_exponent_sum - levels.holder_exponent_sum
        self.assertAlmostEqual(change, math.log(levels.log_xihat), places=12)
        self.assertAlmostEqual(key_rule_residual(levels, following, config), 0.0, places=12)

    def test_perturbation_shows_one_third(self):
        """Test that raising log Xi' by 1 moves the residual by 1/3."""
        config = IterationConfig()
        levels = FrequencyEnergyLevels(30.0, -4.0, -9.0)
        following = step_levels(levels, 3, config)
        bumped = FrequencyEnergyLevels(following.log_xi + 1.0, following.log_ev, following.log_er)
        self.assertAlmostEqual(key_rule_residual(levels, bumped, config), 1.0 / 3.0, places=10)

    def test_balanced_gain_runs(self):
        """Test that the balanced gain keeps the rule and the monotone levels."""
        trace = run_iteration(IterationConfig(k_max=200, gain=GainSchedule('balanced')))
        self.assertLess(relative_key_rule_residual(trace), 1e-10)
        self.assertTrue(np.all(np.diff(trace.log_er[1:]) < 0))

    def test_levels_are_monotone(self):
        """Test that log e_R falls and log Xi, log Xi_hat rise after k = 2."""
        trace = run_iteration(IterationConfig(k_max=500))
        self.assertTrue(np.all(np.diff(trace.log_er[1:]) < 0))
        self.assertTrue(np.all(np.diff(trace.log_xi[1:]) > 0))
        self.assertTrue(np.all(np.diff(trace.log_xihat[1:]) > 0))

    def test_no_overflow_up_to_a_million_stages(self):
        """Test that every level stays finite for k <= 10^6."""
        trace = run_iteration(IterationConfig(k_max=1_000_000))
        self.assertTrue(np.all(np.isfinite(trace.log_xi)))
        self.assertTrue(np.all(np.isfinite(trace.log_er)))


class ShrinkingTest(SimpleTestCase):
    """Test cases for check_shrinking and calibrate_initial_stress."""

    def test_calibrated_stress_passes(self):
        """Test that the bisection finds an initial stress level passing both checks."""
        config = IterationConfig(gamma=4.0, c_hat=math.e, k_max=400)
        log_er = calibrate_initial_stress(config)
        trace = run_iteration(config.replace(log_er_init=log_er))
        report = check_shrinking(trace)
        self.assertTrue(report.passes)
        finite = report.margins[np.isfinite(report.margins)]
        self.assertTrue(np.all(finite <= -math.log(2.0)))
        self.assertLessEqual(support_and_c0_sums(trace).c0_geometric, 5.0)

    def test_large_c_hat_violates(self):
        """Test that gamma = 2, c_hat = e^10 and log e_R1 = -1 violate the condition at small k."""
        config = IterationConfig(gamma=2.0, c_hat=math.exp(10.0), log_xibar=math.log(10.0), log_er_init=-1.0, k_max=20)
        report = check_shrinking(run_iteration(config))
        self.assertFalse(report.passes)
        self.assertIn(2, report.violations)

    def test_constant_levels_keep_only_the_gain(self):
        """Test that frozen levels leave the margin -1/2 gamma k log k."""
        k_max, gamma = 10, 2.0
        k = np.arange(1, k_max + 1)
        log_g = gamma * k * np.log(k)
        log_g[0] = np.nan
        log_g[-1] = np.nan
        flat = np.full(k_max, 20.0)
        trace = IterationTrace(
            IterationConfig(gamma=gamma, k_max=k_max), flat, flat - 30.0, flat - 30.0, log_g,
            np.full(k_max, np.nan), np.full(k_max, np.nan),
        )
        margins = check_shrinking(trace).margins
        np.testing.assert_allclose(margins[1:-1], -0.5 * gamma * k[1:-1] * np.log(k[1:-1]))
        self.assertTrue(np.all(margins[1:-1] < -math.log(2.0)))

    def test_small_gamma_is_rejected(self):
        """Test that calibration needs gamma >= 2."""
        with self.assertRaises(ConfigurationError):
            calibrate_initial_stress(IterationConfig(gamma=1.5))

    def test_short_trace(self):
        """Test that the shrinking check needs three stages."""
        with self.assertRaises(TraceTooShortError):
            check_shrinking(run_iteration(IterationConfig(k_max=2)))


class AsymptoticsTest(SimpleTestCase):
    """Test cases for asymptotics_report."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.trace = run_iteration(IterationConfig(gamma=4.0, a_exp=2.5, k_max=100_001))
        cls.ratios = asymptotics_report(cls.trace)

    def test_ratios_near_one_at_a_thousand(self):
        """Test the five ratios other than log log Xi_hat at k = 10^3."""
        for name, values in self.ratios.items():
            if name != 'log_log_xihat':
                self.assertAlmostEqual(values[999], 1.0, delta=0.15, msg=name)

    def test_log_log_ratio_carries_its_correction(self):
        """Test log log Xi_hat / (2 log k) = 1 + (log log k + log(3 gamma / 4) + log rho) / (2 log k)."""
        # rho is the log Xi_hat ratio; the correction is still 0.21 at k = 10^3
        for k in (1_000, 10_000, 100_000):
            log_k = math.log(k)
            rho = self.ratios['log_xihat'][k - 1]
            expected = 1.0 + (math.log(log_k) + math.log(3.0) + math.log(rho)) / (2.0 * log_k)
            self.assertAlmostEqual(self.ratios['log_log_xihat'][k - 1], expected, delta=1e-12)
        self.assertTrue(1.0 < self.ratios['log_log_xihat'][999] < 1.25)

    def test_ratios_improve_toward_one(self):
        """Test that all six ratios are closer to 1 at k = 10^5 than at k = 10^3."""
        for name, values in self.ratios.items():
            self.assertLess(abs(values[99_999] - 1.0), abs(values[999] - 1.0), msg=name)

    def test_leading_ratios_improve_by_ten_thousand(self):
        """Test that the ratios with 1/k and 1/log k corrections improve from 10^3 to 10^4."""
        for name in ('log_er', 'energy_gap', 'frequency_growth', 'log_xihat', 'log_log_xihat'):
            values = self.ratios[name]
            self.assertLess(abs(values[9999] - 1.0), abs(values[999] - 1.0), msg=name)

    def test_other_gamma(self):
        """Test that the leading ratios stay near 1 for gamma = 8/3."""
        ratios = asymptotics_report(run_iteration(IterationConfig(gamma=8.0 / 3.0, a_exp=1.5, k_max=1_001)))
        for name in ('log_er', 'energy_gap', 'frequency_growth', 'log_xihat'):
            self.assertAlmostEqual(ratios[name][999], 1.0, delta=0.15, msg=name)

    def test_needs_a_hundred_stages(self):
        """Test that the report refuses short traces."""
        with self.assertRaises(TraceTooShortError):
            asymptotics_report(run_iteration(IterationConfig(k_max=50)))


class HolderModulusTest(SimpleTestCase):
    """Test cases for holder_modulus and fit_B."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.trace = run_iteration(IterationConfig(gamma=4.0, a_exp=2.5, k_max=200))

    def test_boundary_scale_counts_as_resolved(self):
        """Test |dx| = 1 / Xi_hat_(5) gives k_bar = 5."""
        estimate = holder_modulus(self.trace, log_inv_dx=float(self.trace.log_xihat[4]))
        self.assertEqual(estimate.k_bar, 5)

    def test_boundary_scale_as_delta_x(self):
        """Test the boundary case through an explicit |dx|."""
        level = float(self.trace.log_xihat[2])
        estimate = holder_modulus(self.trace, delta_x=math.exp(-level))
        self.assertEqual(estimate.k_bar, 3)

    def test_halving_dx_lowers_the_bound(self):
        """Test that halving |dx| inside one stage lowers the bound."""
        level = 0.5 * (self.trace.log_xihat[19] + self.trace.log_xihat[20])
        coarse = holder_modulus(self.trace, log_inv_dx=level)
        fine = holder_modulus(self.trace, log_inv_dx=level + math.log(2.0))
        self.assertEqual(coarse.k_bar, fine.k_bar)
        self.assertLess(fine.log_bound, coarse.log_bound)

    def test_envelope_is_monotone(self):
        """Test that the envelope is nondecreasing in |dx| across stage changes."""
        levels = np.linspace(self.trace.log_xihat[3], self.trace.log_xihat[150], 400)
        envelopes = [holder_modulus(self.trace, log_inv_dx=level).log_envelope for level in levels]
        self.assertTrue(np.all(np.diff(envelopes) <= 1e-9))

    def test_scale_beyond_trace(self):
        """Test that a scale finer than the last stage is refused."""
        with self.assertRaises(TraceTooShortError):
            holder_modulus(self.trace, log_inv_dx=float(self.trace.log_xihat[-1]) + 1.0)

    def test_scale_before_first_stage(self):
        """Test that a scale coarser than Xi_hat_(1) is refused."""
        trace = run_iteration(IterationConfig(log_er_init=-40.0, k_max=10))
        with self.assertRaises(TraceTooShortError):
            holder_modulus(trace, delta_x=1e-2)

    def test_delta_x_out_of_range(self):
        """Test that |dx| must lie in (0, 1e-2]."""
        with self.assertRaises(ConfigurationError):
            holder_modulus(self.trace, delta_x=0.5)

    def assertApproachesOverLastDecade(self, fit, target):
        deepest = fit.log_inv_dx[-1]
        gaps = np.abs(fit.estimates[fit.log_inv_dx >= deepest / 10.0] - target)
        self.assertGreaterEqual(len(gaps), 3)
        self.assertTrue(np.all(np.diff(gaps) < 0.0), msg=f'distances to {target:.5f}: {gaps}')

    def test_borderline_constant(self):
        """Test that B comes within 20% of 2 sqrt(2/3) for gamma = 4, A = 5/2, approaching it monotonically."""
        fit = fit_B(run_iteration(IterationConfig(gamma=4.0, a_exp=2.5, k_max=10_000)))
        target = 2.0 * math.sqrt(2.0 / 3.0)
        self.assertAlmostEqual(fit.estimates[-1], target, delta=0.2 * target)
        self.assertAlmostEqual(fit.extrapolated, target, delta=0.2 * target)
        self.assertApproachesOverLastDecade(fit, target)

    def test_improved_constant(self):
        """Test that B comes within 20% of 4/3 for gamma = 8/3, A = 3/2, approaching it monotonically."""
        fit = fit_B(run_iteration(IterationConfig(gamma=8.0 / 3.0, a_exp=1.5, k_max=10_000)))
        self.assertAlmostEqual(fit.estimates[-1], 4.0 / 3.0, delta=0.2 * 4.0 / 3.0)
        self.assertApproachesOverLastDecade(fit, 4.0 / 3.0)

    def test_gamma_sweep_is_insensitive_to_c_hat(self):
        """Test that the sweep settles on gamma = 4 for c_hat = 1 and e, with B agreeing to 2%."""
        gammas = (2.0, 4.0, 8.0)
        sweeps = [sweep_gamma(IterationConfig(c_hat=c_hat, k_max=10_000), gammas) for c_hat in (1.0, math.e)]
        for sweep in sweeps:
            self.assertEqual([gamma for gamma, _ in sweep], list(gammas))
            self.assertEqual(min(sweep, key=lambda pair: pair[1])[0], 4.0)
        for (_, plain), (_, scaled) in zip(*sweeps):
            self.assertAlmostEqual(plain, scaled, delta=0.02 * scaled)

    def test_closed_form_minimizers(self):
        """Test that the closed-form coefficient is minimized at gamma = 4 and 8/3."""
        grid = np.arange(1.0, 8.0001, 0.05)
        self.assertAlmostEqual(minimize_closed_form(2.5, grid), 4.0, delta=0.05)
        self.assertAlmostEqual(minimize_closed_form(1.5, grid), 8.0 / 3.0, delta=0.05)
        self.assertAlmostEqual(optimal_gamma(2.5), 4.0)
        self.assertAlmostEqual(closed_form_b(4.0, 2.5), 2.0 * math.sqrt(2.0 / 3.0))
        self.assertAlmostEqual(closed_form_b(8.0 / 3.0, 1.5), 4.0 / 3.0)


class SumsTest(SimpleTestCase):
    """Test cases for the time-support and C0 sums."""

    def test_time_support_tail(self):
        """Test that terms beyond k = 50 contribute below 1e-12 of the total."""
        sums = support_and_c0_sums(run_iteration(IterationConfig(gamma=4.0, k_max=200)))
        self.assertLess(sums.support_tail_fraction(50), 1e-12)

    def test_time_support_radius_converges(self):
        """Test that the partial sums are nondecreasing and settle."""
        radius = time_support_radius(run_iteration(IterationConfig(k_max=100)))
        self.assertTrue(np.all(np.diff(radius) >= 0))
        self.assertEqual(radius[-1], radius[-2])

    def test_geometric_bound(self):
        """Test the C0 geometric sum 2 C_L (log Xi_hat_1)^1/2 e_R1^1/2."""
        config = IterationConfig(c_l=1.5, log_er_init=-30.0, k_max=20)
        sums = support_and_c0_sums(run_iteration(config))
        expected = 2.0 * 1.5 * math.sqrt(15.0) * math.exp(-15.0)
        self.assertAlmostEqual(sums.c0_geometric, expected, delta=1e-15)
        self.assertLessEqual(sums.c0_total, sums.c0_geometric)

    def test_smaller_stress_shrinks_the_bound(self):
        """Test that e_R1 -> 0 drives the C0 sum to 0."""
        bounds = [
            support_and_c0_sums(run_iteration(IterationConfig(log_er_init=log_er, k_max=10))).c0_geometric
            for log_er in (-20.0, -40.0, -80.0)
        ]
        self.assertTrue(bounds[0] > bounds[1] > bounds[2])
        self.assertLess(bounds[2], 1e-15)


class SummaryTest(SimpleTestCase):
    """Test cases for the run summary."""

    def test_summary_is_json_ready(self):
        """Test that the summary carries the headline numbers without NaN."""
        trace = run_iteration(IterationConfig(k_max=150))
        summary = iteration_summary(trace)
        self.assertEqual(summary['config']['k_max'], 150)
        self.assertLess(summary['key_rule_max_relative_residual'], 1e-10)
        self.assertIn('b_fit', summary)
        self.assertEqual(set(summary['asymptotic_ratios']), {
            'log_er', 'energy_gap', 'frequency_growth', 'log_xihat', 'log_log_xihat', 'holder_sum',
        })

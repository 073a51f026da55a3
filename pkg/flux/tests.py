import math

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase
from hypothesis import given, settings as hypothesis_settings
from hypothesis import strategies as st

from fields.grid import Grid, PeriodicField, Rank
from fields.kernels import kernel_transform
from fields.operators import translate
from fields.synthetic import band_limited_random_field
from mikado.geometry import build_tube_family, parallel_mikado_field, steady_mikado_field
from .besov import besov_norm, shift_directions
from .exceptions import ExponentError, ScaleGridError
from .lacunary import lacunary_field
from .reports import (
    Extrapolation, Verdict, compare_limits, extrapolate, fit_order, flux_report, flux_scale,
    kernel_independence_test, smoothed_energy,
)
from .stress import cet_stress, duchon_robert_density, holder_chain, trilinear_flux


TWO_PI = 2.0 * np.pi


def shear(grid, amplitude=1.0):
    """v = (a sin 2 pi x2, 0, 0)."""
    return PeriodicField.from_function(
        grid, Rank.VECTOR, lambda x1, x2, x3: np.stack([amplitude * np.sin(TWO_PI * x2), 0 * x1, 0 * x1])
    )


class CommutatorStressTest(SimpleTestCase):
    """Test cases for the commutator stress R_eps."""

    def setUp(self):
        self.grid = Grid(16)

    def test_constant_field_has_no_stress(self):
        """Test that mollification commutes with products of constants."""
        constant = np.array([1.0, -2.0, 0.5]).reshape(3, 1, 1, 1)
        v = PeriodicField(self.grid, Rank.VECTOR, np.broadcast_to(constant, (3,) + self.grid.shape))
        self.assertLess(cet_stress(v, 0.05).sup_norm(), 1e-12)

    def test_shear_closed_form(self):
        """Test R^11 = (1 - a1^2)/2 - (a2 - a1^2)/2 cos(4 pi x2) for a single shear mode."""
        eps = 0.05
        a1, a2 = (float(kernel_transform('A', TWO_PI * eps * m)) for m in (1, 2))
        R = cet_stress(shear(self.grid), eps)
        x2 = self.grid.coordinates()[1]
        expected = 0.5 * (1.0 - a1 ** 2) - 0.5 * (a2 - a1 ** 2) * np.cos(2.0 * TWO_PI * x2)
        np.testing.assert_allclose(R.samples[0, 0], expected, atol=1e-12)
        rest = R.samples.copy()
        rest[0, 0] = 0.0
        self.assertLess(np.max(np.abs(rest)), 1e-12)

    def test_stress_is_second_order(self):
        """Test that |R_eps|_sup decays like eps^2 for smooth data."""
        v = band_limited_random_field(self.grid, Rank.VECTOR, 2, seed=3, solenoidal=True)
        eps = (0.02, 0.01, 0.005)
        order = fit_order(eps, [cet_stress(v, e).sup_norm() for e in eps])
        self.assertGreaterEqual(order, 1.9)
        self.assertLessEqual(order, 2.1)


class TrilinearFluxTest(SimpleTestCase):
    """Test cases for T_eps and the density D_eps."""

    def setUp(self):
        self.grid = Grid(16)
        self.v = band_limited_random_field(self.grid, Rank.VECTOR, 3, seed=11, solenoidal=True)

    def test_zero_field(self):
        """Test that the zero field carries no flux."""
        self.assertEqual(trilinear_flux(PeriodicField.zeros(self.grid, Rank.VECTOR), 0.05), 0.0)

    def test_shear_carries_no_flux(self):
        """Test that the density of a shear flow vanishes pointwise."""
        self.assertLess(duchon_robert_density(shear(self.grid), 0.05).sup_norm(), 1e-12)

    def test_flux_is_the_mean_density(self):
        """Test that T_eps integrates D_eps over the torus."""
        self.assertAlmostEqual(
            trilinear_flux(self.v, 0.04), float(duchon_robert_density(self.v, 0.04).mean()), places=14,
        )

    @hypothesis_settings(max_examples=10, deadline=None)
    @given(st.tuples(*(st.floats(-1.0, 1.0),) * 3))
    def test_translation_invariance(self, shift):
        """Test that T_eps does not change under a translation of the field."""
        moved = translate(self.v, shift)
        self.assertAlmostEqual(trilinear_flux(moved, 0.04), trilinear_flux(self.v, 0.04), delta=1e-12)

    def test_cubic_homogeneity(self):
        """Test T_eps[2v] = 8 T_eps[v]."""
        self.assertAlmostEqual(trilinear_flux(self.v * 2.0, 0.04), 8.0 * trilinear_flux(self.v, 0.04), delta=1e-12)

    def test_parallel_tubes_carry_no_flux(self):
        """Test that a Mikado field of one direction has zero flux at every scale."""
        grid = Grid(96)
        v = parallel_mikado_field(build_tube_family(grid=grid), grid)
        scale = flux_scale(v)
        for eps in (0.08, 0.04, 0.02):
            self.assertLess(abs(trilinear_flux(v, eps)), 1e-10 * scale)

    def test_steady_mikado_flow_carries_no_flux(self):
        """Test that the six crossing tubes of one class transfer energy locally but not on average."""
        grid = Grid(96)
        tubes = build_tube_family(r0=0.0137, grid=grid)
        v = steady_mikado_field(tubes, grid, parity=(1, 0, 1))
        self.assertGreater(v.sup_norm(), 0.0)
        for eps in (0.08, 0.06):
            density = duchon_robert_density(v, eps)
            local = float(np.mean(np.abs(density.samples)))
            self.assertGreater(local, 0.0)
            self.assertLess(abs(trilinear_flux(v, eps)), 1e-6 * local)

    def test_smoothed_energy_of_shear(self):
        """Test 1/2 <|v_eps|^2> = eta_hat(2 pi eps)^2 / 4 for v = (sin 2 pi x2, 0, 0)."""
        v = shear(self.grid)
        for kernel in ('A', 'B'):
            for eps in (0.08, 0.02):
                expected = 0.25 * float(kernel_transform(kernel, TWO_PI * eps)) ** 2
                self.assertAlmostEqual(smoothed_energy(v, eps, kernel), expected, delta=1e-12)
        self.assertLess(smoothed_energy(v, 0.08), smoothed_energy(v, 0.02))

    def test_holder_chain_holds(self):
        """Test |D_eps|_{r/3} <= |grad v_eps|_r |R_eps|_{r/2} at several exponents."""
        for r in (3.0, 4.0, 6.0):
            for eps in (0.08, 0.02):
                chain = holder_chain(self.v, eps, r=r)
                self.assertTrue(chain.holds, msg=f'r={r} eps={eps}: {chain}')

    def test_holder_chain_needs_r_at_least_three(self):
        """Test that exponents below 3 are rejected."""
        with self.assertRaises(ExponentError):
            holder_chain(self.v, 0.04, r=2.0)


class BesovTest(SimpleTestCase):
    """Test cases for the discrete Besov estimate."""

    def setUp(self):
        self.grid = Grid(16)

    def test_thirteen_unit_directions(self):
        """Test that the shift directions are 13 distinct unit vectors up to sign."""
        directions = shift_directions()
        self.assertEqual(len(directions), 13)
        np.testing.assert_allclose(np.linalg.norm(directions, axis=1), 1.0)
        for i, d in enumerate(directions):
            for e in directions[i + 1:]:
                self.assertLess(abs(np.dot(d, e)), 1.0 - 1e-9)

    def test_single_mode_closed_form(self):
        """Test the estimate on sin(2 pi x1) against 2 |sin pi h| |cos|_4 / h^{1/3}."""
        v = PeriodicField.from_function(
            self.grid, Rank.VECTOR, lambda x1, x2, x3: np.stack([np.sin(TWO_PI * x1), 0 * x1, 0 * x1])
        )
        estimate = besov_norm(v, r=4.0, magnitudes=[0.25])
        cosine_norm = (3.0 / 8.0) ** 0.25
        self.assertAlmostEqual(estimate.lebesgue, cosine_norm, places=12)
        self.assertAlmostEqual(
            estimate.seminorm, 2.0 * math.sin(math.pi / 4.0) * cosine_norm / 0.25 ** (1.0 / 3.0), places=10,
        )
        np.testing.assert_allclose(estimate.worst_shift, (0.25, 0.0, 0.0), atol=1e-12)

    def test_homogeneity(self):
        """Test that the estimate is one-homogeneous."""
        v = band_limited_random_field(self.grid, Rank.VECTOR, 3, seed=5)
        self.assertAlmostEqual(besov_norm(v * 2.0).norm, 2.0 * besov_norm(v).norm, places=10)

    def test_more_shifts_never_decrease_the_estimate(self):
        """Test that the sampled sup is monotone in the shift set."""
        v = band_limited_random_field(self.grid, Rank.VECTOR, 3, seed=6)
        coarse = besov_norm(v, magnitudes=[0.125, 0.5])
        fine = besov_norm(v, magnitudes=[0.0625, 0.125, 0.25, 0.5])
        self.assertGreaterEqual(fine.seminorm, coarse.seminorm)


class ExtrapolationTest(SimpleTestCase):
    """Test cases for the convergence verdicts."""

    def test_geometric_sequence_limit(self):
        """Test that 1 + 4^-k extrapolates to 1."""
        result = extrapolate([1.25, 1.0625, 1.015625], scale=1.0)
        self.assertTrue(result.converged)
        self.assertAlmostEqual(result.limit, 1.0, places=12)

    def test_slow_sequences_do_not_converge(self):
        """Test that a sequence with a large tail is not declared converged."""
        self.assertFalse(extrapolate([1.0, 0.5, 0.25], scale=1.0).converged)
        self.assertFalse(extrapolate([1.0, 2.0, 3.0], scale=1.0).converged)
        self.assertFalse(extrapolate([1.0, 0.5], scale=1.0).converged)

    def test_negligible_sequences_converge_to_zero(self):
        """Test that values below the flux tolerance count as a zero limit."""
        result = extrapolate([1e-12, -1e-12, 1e-13], scale=1.0)
        self.assertTrue(result.converged)
        self.assertEqual(result.limit, 0.0)

    def test_verdicts(self):
        """Test PASS, FAIL and INCONCLUSIVE from given limits."""
        sequences = {'A': (1.0,), 'B': (2.0,)}
        same = {'A': Extrapolation(1.0, 0.0, True), 'B': Extrapolation(1.0, 0.0, True)}
        apart = {'A': Extrapolation(1.0, 0.0, True), 'B': Extrapolation(2.0, 0.0, True)}
        open_ = {'A': Extrapolation(1.0, 0.0, True), 'B': Extrapolation(2.0, math.inf, False)}
        self.assertIs(compare_limits(sequences, same, 1.0), Verdict.PASS)
        self.assertIs(compare_limits(sequences, apart, 1.0), Verdict.FAIL)
        self.assertIs(compare_limits(sequences, open_, 1.0), Verdict.INCONCLUSIVE)

    def test_fit_order(self):
        """Test the log-log slope and its degenerate cases."""
        self.assertAlmostEqual(fit_order([0.1, 0.05, 0.025], [0.02, 0.005, 0.00125]), 2.0, places=12)
        self.assertTrue(math.isnan(fit_order([0.1, 0.05], [0.0, 1.0])))


class KernelIndependenceTest(SimpleTestCase):
    """Test cases for the kernel-independence test on initial data."""

    def setUp(self):
        self.grid = Grid(16)

    def test_smooth_field_passes(self):
        """Test that smooth data has a kernel-independent (zero) flux limit."""
        v = band_limited_random_field(self.grid, Rank.VECTOR, 2, seed=21, solenoidal=True)
        result = kernel_independence_test(v)
        self.assertIs(result.verdict, Verdict.PASS)
        self.assertEqual(len(result.sequences['B']), len(settings.LAB['FLUX_EPS']))

    def test_shear_passes(self):
        """Test that shear flow passes with zero flux at every scale."""
        result = kernel_independence_test(shear(self.grid))
        self.assertIs(result.verdict, Verdict.PASS)
        self.assertEqual(result.as_dict()['verdict'], 'PASS')

    def test_scales_must_decrease(self):
        """Test that the scale grid must be strictly decreasing."""
        with self.assertRaises(ScaleGridError):
            kernel_independence_test(shear(self.grid), eps_grid=(0.01, 0.02, 0.04))
        with self.assertRaises(ScaleGridError):
            kernel_independence_test(shear(self.grid), eps_grid=())

    def test_needs_two_kernels(self):
        """Test that a single kernel is refused."""
        with self.assertRaises(ValueError):
            kernel_independence_test(shear(self.grid), kernels=('A', 'A'))


class FluxReportTest(SimpleTestCase):
    """Test cases for the flux report tables."""

    def test_report_tables(self):
        """Test that every scale and kernel produces one row and the summary is complete."""
        grid = Grid(16)
        report = flux_report(band_limited_random_field(grid, Rank.VECTOR, 2, seed=8, solenoidal=True))
        rows = list(report.rows())
        self.assertEqual(len(rows), 2 * len(settings.LAB['FLUX_EPS']))
        self.assertEqual({row['kernel'] for row in rows}, {'A', 'B'})
        summary = report.summary()
        self.assertTrue(summary['holder_chain_holds'])
        self.assertTrue(summary['besov']['lower_bound'])
        self.assertEqual(summary['independence']['verdict'], 'PASS')
        self.assertGreater(summary['bound_ratio'], 0.0)
        self.assertGreaterEqual(summary['orders']['A']['stress'], 1.5)

    def test_lacunary_field_report(self):
        """Test that the Onsager-critical lacunary field runs through the report."""
        grid = Grid(32)
        v = lacunary_field(grid, seed=1)
        report = flux_report(v, eps_grid=(0.1, 0.05, 0.025))
        self.assertEqual(len(list(report.rows())), 6)
        self.assertIn(report.independence.verdict, tuple(Verdict))
        self.assertTrue(np.isfinite(report.summary()['besov']['norm']))

    def test_lacunary_field_is_divergence_free(self):
        """Test that each lacunary component is independent of its own coordinate."""
        v = lacunary_field(Grid(16), seed=2)
        for component in range(3):
            np.testing.assert_allclose(np.diff(v.samples[component], axis=component), 0.0, atol=1e-12)

    def test_unknown_kernel(self):
        """Test that kernels outside the registry are refused."""
        with self.assertRaises(ValueError):
            flux_report(shear(Grid(16)), eps_grid=(0.04, 0.02), kernels=('A', 'Z'))

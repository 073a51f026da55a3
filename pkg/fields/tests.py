import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, override_settings
from scipy import stats

from divsolve.symbols import qbar_symbol
from .exceptions import FieldFormatError, GridError, MeanModeError, MollifierError, TimeSamplingError
from .frame import BackToLabelsMap
from .grid import Grid, PeriodicField, Rank
from .kernels import kernel_transform
from .operators import (
    anti_divergence_sym, divergence, divergence_range, double_divergence, gradient, inverse_laplacian, laplacian,
    mollify, nyquist_filter, pressure_solve, self_outer, spectral_derivative, vector_potential,
)
from .pfld import HEADER, read_field, read_fields, write_fields
from .state import EulerReynoldsState, euler_reynolds_residual
from .synthetic import band_limited_random_field


TWO_PI = 2.0 * np.pi


def shear(grid):
    """v = (sin 2 pi x2, 0, 0)."""
    return PeriodicField.from_function(
        grid, Rank.VECTOR, lambda x1, x2, x3: np.stack([np.sin(TWO_PI * x2), 0 * x1, 0 * x1])
    )


class GridTest(SimpleTestCase):
    """Test cases for Grid and PeriodicField."""

    def test_rejects_small_and_odd_grids(self):
        """Test that n must be even and at least 8."""
        for n in (4, 6, 9, 15):
            with self.assertRaises(GridError):
                Grid(n)

    def test_nyquist_wavevector_is_zeroed(self):
        """Test that the Nyquist component of every wavevector is dropped."""
        k = Grid(8).wavevectors()
        self.assertEqual(k[0, 4, 0, 0], 0.0)
        self.assertEqual(k[2, 0, 0, 4], 0.0)
        self.assertAlmostEqual(k[0, 1, 0, 0], TWO_PI)
        self.assertAlmostEqual(k[0, 7, 0, 0], -TWO_PI)

    def test_sym2_must_be_exactly_symmetric(self):
        """Test that symmetric fields are validated exactly."""
        grid = Grid(8)
        samples = np.zeros((3, 3) + grid.shape)
        samples[0, 1] = 1.0
        with self.assertRaises(GridError):
            PeriodicField(grid, Rank.SYM2, samples)
        samples[1, 0] = 1.0
        PeriodicField(grid, Rank.SYM2, samples)

    def test_sample_shape_is_checked(self):
        """Test that the sample array must match the rank and grid."""
        with self.assertRaises(GridError):
            PeriodicField(Grid(8), Rank.VECTOR, np.zeros((3, 8, 8, 4)))

    def test_fields_on_different_grids_do_not_combine(self):
        """Test that arithmetic refuses mismatched grids."""
        with self.assertRaises(GridError):
            PeriodicField.zeros(Grid(8), Rank.SCALAR) + PeriodicField.zeros(Grid(16), Rank.SCALAR)


class SpectralDerivativeTest(SimpleTestCase):
    """Test cases for spectral differentiation."""

    def setUp(self):
        self.grid = Grid(32)

    def test_single_mode(self):
        """Test d_1 sin(2 pi x1) = 2 pi cos(2 pi x1)."""
        f = PeriodicField.from_function(self.grid, Rank.SCALAR, lambda x1, x2, x3: np.sin(TWO_PI * x1))
        expected = TWO_PI * np.cos(TWO_PI * self.grid.coordinates()[0])
        np.testing.assert_allclose(spectral_derivative(f, 0).samples, expected, atol=1e-12)

    def test_constant_has_zero_derivative(self):
        """Test that constants differentiate to zero."""
        f = PeriodicField(self.grid, Rank.SCALAR, np.full(self.grid.shape, 3.5))
        for axis in range(3):
            self.assertLess(spectral_derivative(f, axis).sup_norm(), 1e-12)

    def test_product_rule_on_band_limited_fields(self):
        """Test the product rule on fields band-limited to n/8 each."""
        f = band_limited_random_field(self.grid, Rank.SCALAR, 4, seed=1)
        g = band_limited_random_field(self.grid, Rank.SCALAR, 4, seed=2)
        fg = f.with_samples(f.samples * g.samples)
        for axis in range(3):
            left = spectral_derivative(fg, axis).samples
            right = f.samples * spectral_derivative(g, axis).samples + g.samples * spectral_derivative(f, axis).samples
            self.assertLess(np.max(np.abs(left - right)), 1e-10 * np.max(np.abs(right)))

    def test_gradient_layout_appends_derivative_index(self):
        """Test that gradient(v)[j, a] = d_a v^j."""
        v = band_limited_random_field(self.grid, Rank.VECTOR, 4, seed=3)
        grad = gradient(v)
        self.assertIs(grad.rank, Rank.TENSOR2)
        np.testing.assert_allclose(grad.samples[1, 2], spectral_derivative(v, 2).samples[1], atol=1e-12)

    def test_bad_axis(self):
        """Test that only axes 0, 1, 2 are accepted."""
        f = PeriodicField.zeros(self.grid, Rank.SCALAR)
        with self.assertRaises(GridError):
            spectral_derivative(f, 3)


class MollifyTest(SimpleTestCase):
    """Test cases for mollification."""

    def setUp(self):
        self.grid = Grid(32)
        self.smooth = PeriodicField.from_function(
            self.grid, Rank.SCALAR, lambda x1, x2, x3: np.sin(TWO_PI * x1) * np.cos(TWO_PI * x2) + 0.25,
        )

    def test_kernel_has_unit_mass(self):
        """Test that both kernels transform to 1 at the origin."""
        for kernel in ('A', 'B'):
            self.assertAlmostEqual(float(kernel_transform(kernel, 0.0)), 1.0, places=14)

    def test_constant_is_unchanged(self):
        """Test that mollifying a constant returns it."""
        f = PeriodicField(self.grid, Rank.SCALAR, np.full(self.grid.shape, 2.0))
        np.testing.assert_allclose(mollify(f, 0.1).samples, 2.0, atol=1e-13)

    def test_mean_is_preserved(self):
        """Test that the spatial mean survives mollification."""
        for kernel in ('A', 'B'):
            self.assertAlmostEqual(float(mollify(self.smooth, 0.07, kernel).mean()), 0.25, delta=1e-12)

    def test_second_order_convergence(self):
        """Test that the mollification error is second order in eps."""
        scales = np.array([0.01, 0.02, 0.04, 0.08])
        for kernel in ('A', 'B'):
            errors = [(mollify(self.smooth, eps, kernel) - self.smooth).sup_norm() for eps in scales]
            slope = stats.linregress(np.log(scales), np.log(errors)).slope
            self.assertGreaterEqual(slope, 1.9)

    def test_scale_out_of_range(self):
        """Test that eps outside (0, 1/4) is rejected."""
        for eps in (0.0, -0.1, 0.25, 1.0):
            with self.assertRaises(MollifierError):
                mollify(self.smooth, eps)

    def test_unknown_kernel(self):
        """Test that only kernels A and B exist."""
        with self.assertRaises(MollifierError):
            mollify(self.smooth, 0.1, 'C')

    def test_commutes_with_translation(self):
        """Test that mollifying a shifted field equals shifting the mollified field."""
        f = band_limited_random_field(self.grid, Rank.VECTOR, 6, seed=4)
        steps = (3, -5, 7)
        np.testing.assert_allclose(
            mollify(f.shifted(steps), 0.05).samples, mollify(f, 0.05).shifted(steps).samples, atol=1e-12,
        )


class InverseOperatorTest(SimpleTestCase):
    """Test cases for the inverse Laplacian, vector potentials and anti-divergence."""

    def setUp(self):
        self.grid = Grid(32)

    def test_inverse_laplacian_round_trip(self):
        """Test that Laplacian undoes inverse_laplacian on zero-mean fields."""
        f = band_limited_random_field(self.grid, Rank.SCALAR, 8, seed=5)
        np.testing.assert_allclose(laplacian(inverse_laplacian(f)).samples, f.samples, atol=1e-10)

    def test_nonzero_mean_is_rejected(self):
        """Test that inverse operators refuse a nonzero mean."""
        f = PeriodicField(self.grid, Rank.SCALAR, np.ones(self.grid.shape))
        with self.assertRaises(MeanModeError):
            inverse_laplacian(f)
        u = PeriodicField(self.grid, Rank.VECTOR, np.ones((3,) + self.grid.shape))
        with self.assertRaises(MeanModeError):
            anti_divergence_sym(u)
        with self.assertRaises(MeanModeError):
            vector_potential(u)

    def test_vector_potential_of_tube_function(self):
        """Test d_a Omega^{ab} = psi f^b for a pipe-like psi(x2, x3) along f = e1."""
        psi = np.sin(TWO_PI * self.grid.coordinates()[1]) * np.cos(2 * TWO_PI * self.grid.coordinates()[2])
        y = PeriodicField(self.grid, Rank.VECTOR, np.stack([psi, 0 * psi, 0 * psi]))
        omega = vector_potential(y)
        self.assertIs(omega.rank, Rank.ANTISYM2)
        np.testing.assert_array_equal(omega.samples, -omega.samples.swapaxes(0, 1))
        np.testing.assert_allclose(divergence(omega).samples, y.samples, atol=1e-10)

    def test_vector_potential_of_solenoidal_field(self):
        """Test the potential identity for a random divergence-free field."""
        y = band_limited_random_field(self.grid, Rank.VECTOR, 8, seed=6, solenoidal=True)
        np.testing.assert_allclose(divergence(vector_potential(y)).samples, y.samples, atol=1e-10)

    def test_anti_divergence_of_zero(self):
        """Test that U = 0 gives R = 0."""
        zero = PeriodicField.zeros(self.grid, Rank.VECTOR)
        self.assertEqual(anti_divergence_sym(zero).sup_norm(), 0.0)

    def test_anti_divergence_round_trip(self):
        """Test div(anti_divergence_sym(div S)) = div S for symmetric S."""
        stress = band_limited_random_field(self.grid, Rank.SYM2, 8, seed=7)
        u = divergence(stress)
        r = anti_divergence_sym(u)
        np.testing.assert_array_equal(r.samples, r.samples.swapaxes(0, 1))
        self.assertLess((divergence(r) - u).sup_norm(), 1e-10 * u.sup_norm())

    def test_anti_divergence_of_white_noise(self):
        """Test div R = U on every reachable mode of an unfiltered random U."""
        samples = np.random.default_rng(9).standard_normal((3,) + self.grid.shape)
        samples -= samples.mean(axis=(1, 2, 3), keepdims=True)
        u = PeriodicField(self.grid, Rank.VECTOR, samples)
        reachable = divergence_range(u)
        self.assertLess((divergence(anti_divergence_sym(u)) - reachable).sup_norm(), 1e-10 * u.sup_norm())

        corners = u - reachable
        self.assertGreater(corners.sup_norm(), 1e-3 * u.sup_norm())
        self.assertLess(divergence_range(corners).sup_norm(), 1e-12 * u.sup_norm())
        filtered = nyquist_filter(u)
        self.assertLess((divergence(anti_divergence_sym(filtered)) - filtered).sup_norm(), 1e-10 * u.sup_norm())

    def test_anti_divergence_single_mode(self):
        """Test the closed form R = sin(K.x) (i qbar(K))_a w^a for U = cos(K.x) w."""
        m = np.array([1.0, 2.0, 0.0])
        w = np.array([0.3, -0.2, 1.0])
        phase = TWO_PI * np.tensordot(m, self.grid.coordinates(), axes=(0, 0))
        u = PeriodicField(self.grid, Rank.VECTOR, w.reshape(3, 1, 1, 1) * np.cos(phase))
        amplitude = np.einsum('ajl,a->jl', (1j * qbar_symbol(TWO_PI * m)).real, w)
        expected = amplitude.reshape(3, 3, 1, 1, 1) * np.sin(phase)
        np.testing.assert_allclose(anti_divergence_sym(u).samples, expected, atol=1e-12)

    def test_anti_divergence_commutes_with_translation(self):
        """Test translation invariance of the anti-divergence."""
        u = divergence(band_limited_random_field(self.grid, Rank.SYM2, 8, seed=8))
        steps = (1, 2, 3)
        np.testing.assert_allclose(
            anti_divergence_sym(u.shifted(steps)).samples, anti_divergence_sym(u).shifted(steps).samples, atol=1e-12,
        )


class PressureSolveTest(SimpleTestCase):
    """Test cases for pressure_solve."""

    def setUp(self):
        self.grid = Grid(32)

    def test_constant_velocity(self):
        """Test that a constant velocity has zero pressure."""
        v = PeriodicField(self.grid, Rank.VECTOR, np.ones((3,) + self.grid.shape))
        self.assertLess(pressure_solve(v).sup_norm(), 1e-12)

    def test_shear_flow_has_no_pressure(self):
        """Test that the shear flow sin(2 pi x2) e1 needs no pressure."""
        self.assertLess(pressure_solve(shear(self.grid)).sup_norm(), 1e-10)

    def test_poisson_equation(self):
        """Test Delta p = d_j d_l (R - v v) with zero mean."""
        v = band_limited_random_field(self.grid, Rank.VECTOR, 4, seed=9, solenoidal=True)
        r = band_limited_random_field(self.grid, Rank.SYM2, 8, seed=10)
        p = pressure_solve(v, r)
        forcing = double_divergence(r - self_outer(v))
        self.assertLess(abs(float(p.mean())), 1e-12)
        self.assertLess((laplacian(p) - forcing).sup_norm(), 1e-9 * forcing.sup_norm())


class EulerReynoldsStateTest(SimpleTestCase):
    """Test cases for EulerReynoldsState and its residual."""

    def setUp(self):
        self.grid = Grid(16)
        self.zero_p = PeriodicField.zeros(self.grid, Rank.SCALAR)
        self.zero_r = PeriodicField.zeros(self.grid, Rank.SYM2)

    def test_zero_state(self):
        """Test that the zero state has zero residual."""
        state = EulerReynoldsState.steady(
            PeriodicField.zeros(self.grid, Rank.VECTOR), self.zero_p, self.zero_r, np.linspace(0, 1, 4),
        )
        self.assertEqual(euler_reynolds_residual(state), 0.0)

    def test_steady_shear_flow(self):
        """Test that the steady shear flow solves Euler."""
        state = EulerReynoldsState.steady(shear(self.grid), self.zero_p, self.zero_r, np.linspace(0, 1, 3))
        self.assertLessEqual(euler_reynolds_residual(state), 1e-8)

    def test_forced_shear_converges_at_second_order(self):
        """Test that sin(t) U with R solving div R = cos(t) U has an O(dt^2) residual."""
        u = shear(self.grid)
        stress = anti_divergence_sym(u)

        def residual(dt):
            times = 0.3 + dt * np.arange(5)
            return euler_reynolds_residual(EulerReynoldsState(
                [u * np.sin(t) for t in times], [self.zero_p] * 5, [stress * np.cos(t) for t in times], times,
            ))

        ratio = residual(0.02) / residual(0.01)
        self.assertGreater(ratio, 3.5)
        self.assertLess(ratio, 4.5)

    def test_needs_three_samples(self):
        """Test that the residual refuses fewer than three samples."""
        state = EulerReynoldsState.steady(shear(self.grid), self.zero_p, self.zero_r, [0.0, 0.1])
        with self.assertRaises(TimeSamplingError):
            euler_reynolds_residual(state)

    def test_nonuniform_times_are_rejected(self):
        """Test that time samples must be uniformly spaced."""
        with self.assertRaises(TimeSamplingError):
            EulerReynoldsState.steady(shear(self.grid), self.zero_p, self.zero_r, [0.0, 0.1, 0.3])

    def test_divergent_velocity_is_rejected(self):
        """Test that velocity snapshots must be divergence-free."""
        v = PeriodicField.from_function(
            self.grid, Rank.VECTOR, lambda x1, x2, x3: np.stack([np.sin(TWO_PI * x1), 0 * x1, 0 * x1])
        )
        with self.assertRaises(GridError):
            EulerReynoldsState.steady(v, self.zero_p, self.zero_r, [0.0])


class BackToLabelsMapTest(SimpleTestCase):
    """Test cases for back-to-labels maps."""

    def test_identity_frame(self):
        """Test that the identity map has unit Jacobian."""
        frame = BackToLabelsMap.identity(Grid(8))
        np.testing.assert_allclose(frame.determinant(), 1.0)
        self.assertEqual(frame.deformation(), 0.0)

    def test_inverse_jacobian(self):
        """Test G^a_alpha d_a Gamma^beta = delta for a distorted frame."""
        grid = Grid(16)
        frame = BackToLabelsMap(0.02 * band_limited_random_field(grid, Rank.VECTOR, 3, seed=11))
        product = np.einsum('aA...,Ba...->BA...', frame.inverse_jacobian(), frame.jacobian())
        np.testing.assert_allclose(product, np.eye(3).reshape(3, 3, 1, 1, 1) * np.ones(grid.shape), atol=1e-12)


class PfldTest(SimpleTestCase):
    """Test cases for PFLD v1 files."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = Path(self.tmp.name) / 'field.pfld'
        self.grid = Grid(8)

    def test_header_is_eighteen_bytes(self):
        """Test the packed header size."""
        self.assertEqual(HEADER.itemsize, 18)

    def test_time_series_round_trip(self):
        """Test that a vector time series survives a write and read exactly."""
        series = [band_limited_random_field(self.grid, Rank.VECTOR, 3, seed=s) for s in range(3)]
        write_fields(self.path, series)
        loaded = read_fields(self.path)
        self.assertEqual(len(loaded), 3)
        for before, after in zip(series, loaded):
            np.testing.assert_array_equal(before.samples, after.samples)

    def test_symmetric_field_round_trip(self):
        """Test that sym2 fields keep exact symmetry through the file."""
        stress = band_limited_random_field(self.grid, Rank.SYM2, 3, seed=12)
        write_fields(self.path, stress)
        loaded = read_field(self.path)
        self.assertIs(loaded.rank, Rank.SYM2)
        np.testing.assert_array_equal(loaded.samples, stress.samples)

    def test_i_is_fastest(self):
        """Test that the data block runs fastest along x1."""
        x1 = PeriodicField.from_function(self.grid, Rank.SCALAR, lambda x1, x2, x3: x1)
        write_fields(self.path, x1)
        data = np.frombuffer(self.path.read_bytes(), dtype='<f8', offset=HEADER.itemsize)
        np.testing.assert_array_equal(data[:8], np.arange(8) / 8)

    def test_bad_magic(self):
        """Test that a wrong magic is reported."""
        write_fields(self.path, PeriodicField.zeros(self.grid, Rank.SCALAR))
        raw = bytearray(self.path.read_bytes())
        raw[:4] = b'XFLD'
        self.path.write_bytes(bytes(raw))
        with self.assertRaises(FieldFormatError):
            read_fields(self.path)

    def test_truncated_file(self):
        """Test that a truncated data block is reported."""
        write_fields(self.path, PeriodicField.zeros(self.grid, Rank.VECTOR))
        self.path.write_bytes(self.path.read_bytes()[:-8])
        with self.assertRaises(FieldFormatError):
            read_fields(self.path)

    def test_short_header(self):
        """Test that a file shorter than the header is reported."""
        self.path.write_bytes(b'PFLD')
        with self.assertRaises(FieldFormatError):
            read_fields(self.path)


@override_settings(LAB={'MEAN_TOLERANCE': 1e-10, 'KERNEL_QUADRATURE_NODES': 40})
class QuadratureSettingTest(SimpleTestCase):
    """Test cases for the kernel quadrature setting."""

    def test_coarse_quadrature_still_has_unit_mass(self):
        """Test that fewer quadrature nodes still normalize the kernel."""
        self.assertAlmostEqual(float(kernel_transform('B', 0.0)), 1.0, places=14)

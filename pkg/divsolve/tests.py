import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings as hypothesis_settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from fields.frame import BackToLabelsMap
from fields.grid import Grid, PeriodicField, Rank
from fields.operators import divergence
from fields.synthetic import band_limited_random_field
from .exceptions import PhaseError, ProfileError, ResolutionError, SupportLeakError
from .moments import moment_check, solve_remainder
from .parametrix import (
    OscillatoryField, decay_slope, identity_defect, monotonicity_threshold, parametrix, parametrix_divergence,
    with_frequency,
)
from .symbols import qbar_apply, qbar_symbol


TWO_PI = 2.0 * np.pi

nonzero_vectors = arrays(
    np.float64, 3, elements=st.floats(-100.0, 100.0, allow_nan=False, allow_infinity=False),
).filter(lambda p: np.linalg.norm(p) > 1e-3)


def cosine_profile(mode):
    """omega(X) = 2 cos(2 pi m . X) as an oscillatory profile pair."""
    return np.array([mode]), np.array([1.0 + 0j])


def distorted_frame(grid, amplitude=0.02, seed=21):
    return BackToLabelsMap(amplitude * band_limited_random_field(grid, Rank.VECTOR, 2, seed=seed))


def compact_bump(grid, center, radius, sharpness=10.0):
    """
    exp(a - a / (1 - r^2 / rho^2)) inside the ball and its exact gradient.

    Returns (b, grad b, y) with y = x - center.
    """
    y = grid.coordinates() - np.asarray(center, dtype=float).reshape(3, 1, 1, 1)
    s = 1.0 - np.sum(y ** 2, axis=0) / radius ** 2
    inside = s > 0
    safe = np.where(inside, s, 1.0)
    b = np.where(inside, np.exp(sharpness - sharpness / safe), 0.0)
    grad = np.where(inside, -2.0 * sharpness * y * b / (radius ** 2 * safe ** 2), 0.0)
    return b, grad, y


class SymbolTest(SimpleTestCase):
    """Test cases for the degree -1 symbol."""

    def test_unit_vector(self):
        """Test i p_j qbar_1^{j1}(e1) = 1."""
        q = qbar_symbol([1.0, 0.0, 0.0])
        self.assertEqual(complex(1j * q[0, 0, 0]), 1.0)

    @hypothesis_settings(max_examples=200, deadline=None)
    @given(nonzero_vectors)
    def test_contraction_identity(self, p):
        """Test i p_j qbar_a^{jl}(p) = delta_a^l."""
        contracted = 1j * np.einsum('j,ajl->al', p, qbar_symbol(p))
        np.testing.assert_allclose(contracted, np.eye(3), atol=1e-12)

    @hypothesis_settings(max_examples=100, deadline=None)
    @given(nonzero_vectors)
    def test_symmetric_in_jl(self, p):
        """Test qbar_a^{jl} = qbar_a^{lj} exactly."""
        q = qbar_symbol(p)
        np.testing.assert_array_equal(q, q.swapaxes(1, 2))

    @hypothesis_settings(max_examples=100, deadline=None)
    @given(nonzero_vectors)
    def test_homogeneous_of_degree_minus_one(self, p):
        """Test qbar(2p) = qbar(p) / 2."""
        np.testing.assert_allclose(qbar_symbol(2.0 * p), 0.5 * qbar_symbol(p), rtol=1e-13, atol=0.0)

    def test_zero_vector(self):
        """Test that p = 0 is rejected."""
        with self.assertRaises(PhaseError):
            qbar_symbol([0.0, 0.0, 0.0])

    def test_apply_matches_symbol(self):
        """Test that the vectorized contraction agrees with the closed form."""
        rng = np.random.default_rng(3)
        p = rng.standard_normal((3, 5))
        u = rng.standard_normal((3, 5))
        applied = qbar_apply(p, u)
        for i in range(5):
            np.testing.assert_allclose(applied[..., i], np.einsum('ajl,a->jl', qbar_symbol(p[:, i]), u[:, i]))

    def test_apply_is_zero_at_zero_wavevector(self):
        """Test that p = 0 contracts to zero."""
        self.assertEqual(np.abs(qbar_apply(np.zeros((3, 2)), np.ones((3, 2)))).max(), 0.0)


class OscillatoryFieldTest(SimpleTestCase):
    """Test cases for OscillatoryField."""

    def setUp(self):
        self.grid = Grid(16)
        self.frame = BackToLabelsMap.identity(self.grid)
        self.amplitude = band_limited_random_field(self.grid, Rank.VECTOR, 2, seed=1)

    def test_from_profile_extracts_cosine(self):
        """Test that 2 cos(2 pi X1) yields the single pair m = (1, 0, 0) with w = 1."""
        profile = 2.0 * np.cos(TWO_PI * Grid(16).coordinates()[0])
        field = OscillatoryField.from_profile(self.amplitude, profile, self.frame, 3)
        np.testing.assert_array_equal(field.modes, [[1, 0, 0]])
        np.testing.assert_allclose(field.coefficients, [1.0], atol=1e-14)

    def test_from_profile_rejects_mean(self):
        """Test that a profile with nonzero mean is rejected."""
        profile = 1.0 + np.cos(TWO_PI * Grid(16).coordinates()[0])
        with self.assertRaises(ProfileError):
            OscillatoryField.from_profile(self.amplitude, profile, self.frame, 3)

    def test_mode_cap_keeps_largest(self):
        """Test that max_modes keeps the largest coefficients."""
        x = Grid(16).coordinates()
        profile = 2.0 * np.cos(TWO_PI * x[0]) + 0.2 * np.cos(2 * TWO_PI * x[1])
        field = OscillatoryField.from_profile(self.amplitude, profile, self.frame, 3, max_modes=1)
        np.testing.assert_array_equal(field.modes, [[1, 0, 0]])

    def test_evaluate(self):
        """Test U = u omega(lam x) on the identity frame."""
        modes, coefficients = cosine_profile((0, 1, 0))
        field = OscillatoryField(self.amplitude, modes, coefficients, self.frame, 2)
        expected = self.amplitude.samples * 2.0 * np.cos(2 * TWO_PI * self.grid.coordinates()[1])
        np.testing.assert_allclose(field.evaluate().samples, expected, atol=1e-13)

    def test_noncanonical_modes_are_rejected(self):
        """Test that only one representative of each +-m pair is accepted."""
        with self.assertRaises(ProfileError):
            OscillatoryField(self.amplitude, [[-1, 0, 0]], [1.0], self.frame, 2)


class ParametrixTest(SimpleTestCase):
    """Test cases for the nonstationary-phase parametrix."""

    def setUp(self):
        self.grid = Grid(32)
        self.identity = BackToLabelsMap.identity(self.grid)
        self.amplitude = band_limited_random_field(self.grid, Rank.VECTOR, 2, seed=5)

    def oscillatory(self, frame, frequency=4):
        modes = np.array([[1, 0, 0], [0, 1, 1]])
        coefficients = np.array([1.0, 0.3 - 0.2j])
        return OscillatoryField(self.amplitude, modes, coefficients, frame, frequency)

    def test_identity_holds_for_every_order(self):
        """Test U = d_j Q_(D) + U_(D) to round-off on identity and distorted frames."""
        frames = (self.identity, distorted_frame(self.grid))
        for frame in frames:
            det = frame.determinant()
            self.assertTrue(0.5 <= det.min() and det.max() <= 2.0)
            field = self.oscillatory(frame)
            for order in (1, 2, 3, 4):
                result = parametrix(field, order)
                self.assertLess(identity_defect(field, result), 1e-11)

    def test_potential_is_exactly_symmetric(self):
        """Test that Q_(D) is an exactly symmetric field."""
        result = parametrix(self.oscillatory(distorted_frame(self.grid)), 3)
        self.assertIs(result.potential.rank, Rank.SYM2)
        np.testing.assert_array_equal(result.potential.samples, result.potential.samples.swapaxes(0, 1))

    def test_phase_aware_divergence_matches_spectral(self):
        """Test that the product-rule divergence of Q equals its spectral divergence on the identity frame."""
        field = self.oscillatory(self.identity)
        for order in (1, 3):
            div_q = parametrix_divergence(field, order)
            spectral = divergence(parametrix(field, order).potential)
            self.assertLess((div_q - spectral).sup_norm(), 1e-10 * div_q.sup_norm())

    def test_constant_amplitude_has_no_remainder(self):
        """Test that U_(1) = 0 for constant u on the identity frame."""
        constant = PeriodicField(self.grid, Rank.VECTOR, np.array([0.2, -1.0, 0.5]).reshape(3, 1, 1, 1)
                                 * np.ones(self.grid.shape))
        modes, coefficients = cosine_profile((1, 2, 0))
        field = OscillatoryField(constant, modes, coefficients, self.identity, 3)
        self.assertLess(parametrix(field, 1).remainder.sup_norm(), 1e-12)

    def test_first_order_closed_form(self):
        """Test Q_(1) = 2 Re(exp(2 pi i lam m.x) qbar(2 pi m) u) / lam on the identity frame."""
        mode, lam = np.array([1, 2, 0]), 3
        modes, coefficients = cosine_profile(mode)
        field = OscillatoryField(self.amplitude, modes, coefficients, self.identity, lam)
        q = np.einsum('ajl,a...->jl...', qbar_symbol(TWO_PI * mode), self.amplitude.samples)
        carrier = np.exp(1j * lam * TWO_PI * np.tensordot(mode, self.grid.coordinates(), axes=(0, 0)))
        expected = 2.0 * np.real(carrier * q) / lam
        np.testing.assert_allclose(parametrix(field, 1).potential.samples, expected, atol=1e-12)

        u1 = -divergence(PeriodicField(self.grid, Rank.SYM2, q.imag)).samples / lam
        np.testing.assert_allclose(parametrix(field, 1).remainder.samples, 2.0 * np.real(carrier * 1j * u1), atol=1e-12)

    def test_remainder_decays_like_lambda_to_minus_d(self):
        """Test that |U_(D)| decays with slope -D under frequency doubling."""
        field = self.oscillatory(distorted_frame(self.grid))
        for order in (1, 2, 3):
            slope, norms = decay_slope(field, order, [2, 4, 8])
            self.assertAlmostEqual(slope, -order, delta=0.15 * order)

    def test_stage_bounds_decrease_above_threshold(self):
        """Test that the stage bounds decrease for lam above the reported threshold."""
        field = self.oscillatory(self.identity)
        threshold = monotonicity_threshold(field)
        self.assertGreater(threshold, 0.0)
        lam = max(2, int(np.ceil(threshold)))
        result = parametrix(with_frequency(field, lam), 4)
        self.assertTrue(np.all(np.diff(result.stage_norms) <= 0.0))
        self.assertLessEqual(result.remainder.sup_norm(), result.stage_norms[-1])

    def test_order_out_of_range(self):
        """Test that D must lie in [1, 4]."""
        field = self.oscillatory(self.identity)
        for order in (0, 5):
            with self.assertRaises(ProfileError):
                parametrix(field, order)

    def test_unresolved_frequency(self):
        """Test that carriers above the Nyquist frequency are refused."""
        with self.assertRaises(ResolutionError):
            parametrix(self.oscillatory(self.identity, frequency=20), 1)

    def test_stationary_phase_is_rejected(self):
        """Test that a vanishing phase gradient on supp u raises PhaseError."""
        fold = PeriodicField.from_function(
            self.grid, Rank.VECTOR,
            lambda x1, x2, x3: np.stack([np.sin(TWO_PI * x1) / TWO_PI, 0 * x1, 0 * x1]),
        )
        field = OscillatoryField(self.amplitude, [[1, 0, 0]], [1.0], BackToLabelsMap(fold), 2)
        with self.assertRaises(PhaseError):
            parametrix(field, 1)

    def test_amplitudes_are_retained_on_request(self):
        """Test that per-stage amplitudes are kept for diagnostics."""
        result = parametrix(self.oscillatory(self.identity), 2, keep_amplitudes=True)
        self.assertEqual(sorted(result.amplitudes), [(0, 1, 1), (1, 0, 0)])
        self.assertEqual(len(result.amplitudes[(1, 0, 0)]), 2)


class MomentCheckTest(SimpleTestCase):
    """Test cases for moment_check."""

    def setUp(self):
        self.grid = Grid(32)
        self.box = ((0.1, 0.1, 0.1), (0.9, 0.9, 0.9))

    def test_divergence_of_compact_symmetric_tensor(self):
        """Test that U = d_j S^{jl} has vanishing linear and angular momenta."""
        b, grad_b, y = compact_bump(self.grid, (0.5, 0.5, 0.5), 0.35)
        a = np.array([[1.0, 0.3, -0.2], [0.3, 0.5, 0.1], [-0.2, 0.1, 2.0]])
        tensor = a.reshape(3, 3, 1, 1, 1) + y[:, None] * y[None, :]
        stress_norm = np.max(np.abs(b * tensor))
        u = np.einsum('j...,jl...->l...', grad_b, tensor) + 4.0 * b * y
        linear, angular = moment_check(PeriodicField(self.grid, Rank.VECTOR, u), self.box)
        self.assertLess(np.abs(linear).max(), 1e-10 * stress_norm)
        self.assertLess(np.abs(angular).max(), 1e-10 * stress_norm)

    def test_bump_with_mean_is_flagged(self):
        """Test that a compact bump along e1 has a linear moment."""
        b, _, _ = compact_bump(self.grid, (0.5, 0.5, 0.5), 0.35)
        u = np.stack([b, 0 * b, 0 * b])
        linear, _ = moment_check(PeriodicField(self.grid, Rank.VECTOR, u), self.box)
        self.assertGreater(linear[0], 1e-3)

    def test_zero_field(self):
        """Test that U = 0 has zero moments."""
        linear, angular = moment_check(PeriodicField.zeros(self.grid, Rank.VECTOR), self.box)
        self.assertEqual(np.abs(linear).max(), 0.0)
        self.assertEqual(np.abs(angular).max(), 0.0)

    def test_leak_outside_box(self):
        """Test that a field reaching outside its box is rejected."""
        u = PeriodicField(self.grid, Rank.VECTOR, np.ones((3,) + self.grid.shape))
        with self.assertRaises(SupportLeakError):
            moment_check(u, self.box)

    def test_leak_tolerance_is_round_off(self):
        """Test that a leak of 1e-11 |U| is rejected while 1e-15 |U| passes."""
        b, _, _ = compact_bump(self.grid, (0.5, 0.5, 0.5), 0.35)
        for leak, rejected in ((1e-11, True), (1e-15, False)):
            samples = np.stack([b, 0 * b, 0 * b])
            samples[0, 0, 0, 0] = leak * b.max()
            u = PeriodicField(self.grid, Rank.VECTOR, samples)
            if rejected:
                with self.assertRaisesRegex(SupportLeakError, 'leaks outside'):
                    moment_check(u, self.box)
            else:
                moment_check(u, self.box)


class SolveRemainderTest(SimpleTestCase):
    """Test cases for solve_remainder."""

    def setUp(self):
        self.grid = Grid(32)

    def test_divergence_round_trip(self):
        """Test d_j R^{jl} = U^l for a zero-mean U."""
        u = divergence(band_limited_random_field(self.grid, Rank.SYM2, 8, seed=2))
        r = solve_remainder(u)
        self.assertLess((divergence(r) - u).sup_norm(), 1e-10 * u.sup_norm())

    def test_remainder_stress_decays_with_frequency(self):
        """Test that |R| for R solving div R = U_(2) decays at least like lam^-2."""
        amplitude = band_limited_random_field(self.grid, Rank.VECTOR, 1, seed=9)
        field = OscillatoryField(
            amplitude, [[1, 0, 0]], [1.0], BackToLabelsMap.identity(self.grid), 2,
        )
        frequencies = [2, 4, 8]
        norms = [solve_remainder(parametrix(with_frequency(field, lam), 2).remainder).sup_norm() for lam in frequencies]
        slope = stats.linregress(np.log(frequencies), np.log(norms)).slope
        self.assertLessEqual(slope, -1.7)

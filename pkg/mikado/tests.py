import itertools
import math

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings
from hypothesis import given, settings as hypothesis_settings
from hypothesis import strategies as st

from fields.frame import BackToLabelsMap
from fields.grid import Grid, PeriodicField, Rank
from fields.operators import divergence, isotropic, mollify
from fields.state import EulerReynoldsState, euler_reynolds_residual
from fields.synthetic import band_limited_random_field, cellular_flow
from .amplitudes import Amplitudes, TimeCutoff, cancellation_residual, choose_pressure, cone_matrix, solve_amplitudes
from .decomposition import decompose_errors, new_flow
from .exceptions import AmplitudeConeError, GeometryError, PartitionError, ResolutionError, TransportError
from .geometry import (
    DIRECTIONS, TUBE_KEYS, TubeProfile, build_potentials, build_tube_family, default_radius, direction_outer_sum,
    line_distances, place_lines,
)
from .partition import QuadraticPartition, build_partition, cutoff_profile
from .transport import advect_frame, refinement_gap
from .waves import (
    assemble_waves, correction_slope, mollification_requirement, mollification_scale, oscillation_frequency,
)


def isotropic_stress(grid, c):
    return isotropic(PeriodicField(grid, Rank.SCALAR, np.full(grid.shape, -c)))


def torus_distance(points, center):
    d = points - np.asarray(center).reshape(3, 1, 1, 1)
    d = d - np.round(d)
    return np.sqrt(np.sum(d ** 2, axis=0))


class DirectionSetTest(SimpleTestCase):
    """Test cases for the direction set."""

    def test_six_directions(self):
        """Test that there are six directions e_i +- e_j."""
        self.assertEqual(DIRECTIONS.shape, (6, 3))
        self.assertTrue(np.all(np.sum(np.abs(DIRECTIONS), axis=1) == 2))

    def test_outer_sum_is_four_identity(self):
        """Test that sum_f f (x) f = 4 Id."""
        np.testing.assert_array_equal(direction_outer_sum(), 4.0 * np.eye(3))

    def test_rank_one_tensors_are_independent(self):
        """Test that the six tensors f (x) f span the symmetric matrices."""
        self.assertEqual(np.linalg.matrix_rank(cone_matrix()), 6)


class TubeProfileTest(SimpleTestCase):
    """Test cases for the radial tube profile."""

    def setUp(self):
        self.profile = TubeProfile(0.05)

    def test_mean_zero_and_unit_square_integral(self):
        """Test that int psi = 0 and int psi^2 = 1 for a single tube."""
        integral, square, potential = self.profile.integrals()
        self.assertLess(abs(integral), 1e-12)
        self.assertAlmostEqual(square, 1.0, delta=1e-10)
        self.assertLess(abs(potential), 1e-12)

    def test_potential_is_compactly_supported(self):
        """Test that Phi vanishes beyond r0 and is flat inside r0/2."""
        r0 = self.profile.r0
        self.assertEqual(float(self.profile.potential(np.array(1.01 * r0))), 0.0)
        self.assertAlmostEqual(float(self.profile.potential(np.array(r0))), 0.0, delta=1e-12)
        self.assertEqual(float(self.profile.potential_slope(np.array(0.4 * r0))), 0.0)
        self.assertEqual(float(self.profile.potential(np.array(0.1 * r0))), self.profile.phi_inner)

    def test_potential_solves_radial_poisson(self):
        """Test that (1/s)(s Phi')' = g inside the annulus."""
        h = 1e-6
        for s in (0.6, 0.75, 0.9):
            s = s * self.profile.r0
            upper, lower = (self.profile.potential_slope(np.array(t)) * t for t in (s + h, s - h))
            laplacian = (upper - lower) / (2 * h) / s
            self.assertAlmostEqual(float(laplacian), float(self.profile.value(np.array(s))), delta=1e-5 * self.profile.amplitude)

    def test_invalid_radius(self):
        """Test that radii outside (0, 0.35) are rejected."""
        with self.assertRaises(GeometryError):
            TubeProfile(0.0)
        with self.assertRaises(GeometryError):
            TubeProfile(0.5)

    def test_invalid_power(self):
        """Test that the bump power must be an integer of at least 2."""
        with self.assertRaises(GeometryError):
            TubeProfile(0.05, power=1)


class TubeFamilyTest(SimpleTestCase):
    """Test cases for the threaded tube family."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = Grid(settings.LAB['PROFILE_GRID'])
        cls.tubes = build_tube_family(grid=cls.grid)

    def test_48_tubes_separated_by_six_radii(self):
        """Test that all 48 lines are more than 6 r0 apart."""
        self.assertEqual(len(TUBE_KEYS), 48)
        self.assertEqual(len(set(TUBE_KEYS)), 48)
        self.assertGreater(self.tubes.separation, 6.0 * self.tubes.r0)

    def test_supports_are_disjoint(self):
        """Test that pointwise products of distinct tubes vanish on the grid."""
        supports = np.stack([self.tubes.sample(key).samples != 0.0 for key in TUBE_KEYS])
        self.assertEqual(int(np.max(np.sum(supports, axis=0))), 1)

    def test_normalized_sample(self):
        """Test that the normalized sample has zero mean and unit mean square."""
        for key in TUBE_KEYS[::7]:
            psi = self.tubes.normalized_sample(key)
            self.assertLess(abs(float(psi.mean())), 1e-12)
            self.assertAlmostEqual(float(np.mean(psi.samples ** 2)), 1.0, delta=1e-10)

    def test_gradient_is_orthogonal_to_direction(self):
        """Test that grad psi . f = 0."""
        points = self.grid.coordinates()
        for key in TUBE_KEYS[::5]:
            gradient = self.tubes.psi_gradient(key, points)
            dot = np.einsum('a...,a->...', gradient, self.tubes.direction(key))
            self.assertLessEqual(np.max(np.abs(dot)), 1e-8 * np.max(np.abs(gradient)))

    def test_every_tube_is_resolved(self):
        """Test that every tube holds at least PROFILE_MIN_POINTS samples."""
        counts = self.tubes.support_counts()
        self.assertGreaterEqual(min(counts.values()), settings.LAB['PROFILE_MIN_POINTS'])

    def test_coarse_grid_misses_thin_tubes(self):
        """Test that the default radius is rejected on a 32 grid, where grid-aligned tubes catch no samples."""
        with self.assertRaisesRegex(GeometryError, 'refine the grid'):
            build_tube_family(grid=Grid(32))

    def test_infeasible_radius(self):
        """Test that a radius too large for the placement names the closest pair."""
        with self.assertRaisesRegex(GeometryError, 'infeasible'):
            build_tube_family(r0=0.2)

    def test_unresolved_profile(self):
        """Test that a profile with too few samples is rejected."""
        with override_settings(LAB={**settings.LAB, 'PROFILE_MIN_POINTS': 10 ** 6}):
            with self.assertRaisesRegex(GeometryError, 'samples'):
                build_tube_family(grid=Grid(8))

    def test_line_distance_to_itself(self):
        """Test that a line has distance zero from itself and its translates along f."""
        base = np.array([0.25, 0.5, 0.0])
        candidates = np.array([base, base + DIRECTIONS[0] * 0.5, base + np.array([0.0, 0.0, 0.5])])
        distances = line_distances(base, 0, candidates, 0)
        self.assertAlmostEqual(distances[0], 0.0, delta=1e-15)
        self.assertAlmostEqual(distances[1], 0.0, delta=1e-15)
        self.assertAlmostEqual(distances[2], 0.5, delta=1e-15)

    def test_placement_is_deterministic(self):
        """Test that repeated placements agree."""
        bases, separation, closest = place_lines()
        np.testing.assert_array_equal(bases, self.tubes.bases)
        self.assertEqual(separation, self.tubes.separation)
        self.assertEqual(closest, self.tubes.closest)

    def test_placement_separates_every_pair(self):
        """Test that every pair of lines, parallel or crossing, is 1/12 or more apart."""
        bases, separation, _ = place_lines()
        self.assertAlmostEqual(separation, 1.0 / 12.0, delta=1e-12)
        for a, (f_index, _) in enumerate(TUBE_KEYS):
            others = [b for b in range(len(TUBE_KEYS)) if b != a]
            for g_index in range(len(DIRECTIONS)):
                group = [b for b in others if TUBE_KEYS[b][0] == g_index]
                distances = line_distances(bases[a], f_index, bases[group], g_index)
                self.assertGreaterEqual(float(np.min(distances)), 1.0 / 12.0 - 1e-12)

    def test_parallel_lines_are_far_apart(self):
        """Test that the eight lines of one direction are at least 0.3 apart."""
        bases, _, _ = place_lines()
        for f_index in range(len(DIRECTIONS)):
            rows = [index for index, key in enumerate(TUBE_KEYS) if key[0] == f_index]
            for a, b in itertools.combinations(rows, 2):
                distance = float(line_distances(bases[a], f_index, bases[b][None, :], f_index)[0])
                self.assertGreater(distance, 0.3)

    def test_default_radius_is_feasible(self):
        """Test that the default radius is 0.0137 and the lines clear TUBE_SEPARATION_FACTOR r0."""
        self.assertAlmostEqual(default_radius(), 0.0137, delta=1e-12)
        tubes = build_tube_family()
        self.assertGreater(tubes.separation, settings.LAB['TUBE_SEPARATION_FACTOR'] * tubes.r0)


class PotentialsTest(SimpleTestCase):
    """Test cases for the spectral tube potentials."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        tubes = build_tube_family(grid=Grid(settings.LAB['PROFILE_GRID']))
        cls.residuals = []
        for potentials in build_potentials(tubes, keys=(TUBE_KEYS[0], TUBE_KEYS[17], TUBE_KEYS[46])):
            cls.residuals.append(potentials.residuals())
        cls.potentials = potentials

    def test_divergence_identities(self):
        """Test that d_a Omega^{ab} = psi f^b and d_c Omega~^{abc} = Omega^{ab}."""
        self.assertEqual(len(self.residuals), 3)
        for first, second in self.residuals:
            self.assertLess(first, 1e-10)
            self.assertLess(second, 1e-10)

    def test_omega_is_antisymmetric(self):
        """Test that Omega^{ab} = -Omega^{ba} exactly."""
        omega = self.potentials.omega.samples
        np.testing.assert_array_equal(omega, -omega.swapaxes(0, 1))

    def test_omega_tilde_is_mean_free(self):
        """Test that all 27 components of Omega~ have zero mean."""
        self.assertLess(float(np.max(np.abs(self.potentials.omega_tilde.mean()))), 1e-12)


class PartitionTest(SimpleTestCase):
    """Test cases for the quadratic partition of unity."""

    @given(st.floats(-50.0, 50.0, allow_nan=False))
    @hypothesis_settings(max_examples=100, deadline=None)
    def test_profile_squares_sum_to_one(self, s):
        """Test that sum_m chi1^2(s - m) = 1."""
        nearest = round(s)
        total = sum(float(cutoff_profile(s - m)) ** 2 for m in range(nearest - 2, nearest + 3))
        self.assertAlmostEqual(total, 1.0, delta=1e-12)

    def test_period_six(self):
        """Test the 216-member partition for Pi = 6, Xi = 2."""
        grid = Grid(24)
        partition = build_partition(6, grid, Xi=2.0)
        self.assertEqual(len(partition.members), 216)
        points = grid.coordinates()
        self.assertLess(float(np.max(np.abs(partition.sum_of_squares(points) - 1.0))), 1e-10)
        self.assertLessEqual(partition.support_radius, 1.0 / 2.0)
        for k in partition.members[::17]:
            member = partition.member(k, points)
            distance = torus_distance(points, partition.center(k))
            self.assertTrue(np.all(distance[member > 0.0] < partition.support_radius))

    def test_smallest_partition(self):
        """Test that Pi = 2 gives 8 members, one per parity class."""
        partition = build_partition(2, Grid(8))
        self.assertEqual(len(partition.members), 8)
        for parity in partition.members:
            self.assertEqual(partition.class_members(parity), (parity,))

    def test_class_cutoff_sums_members(self):
        """Test that a class cutoff is the sum of its disjoint members."""
        grid = Grid(16)
        partition = QuadraticPartition(4, grid)
        points = grid.coordinates()
        members = [partition.member(k, points) for k in partition.class_members((0, 1, 0))]
        np.testing.assert_allclose(partition.class_cutoff((0, 1, 0), points), sum(members), atol=1e-14)
        self.assertEqual(float(np.max(np.abs(members[0] * members[1]))), 0.0)

    def test_odd_period(self):
        """Test that an odd period is rejected."""
        with self.assertRaises(PartitionError):
            build_partition(5, Grid(32))

    def test_period_out_of_range(self):
        """Test that Pi must lie in [3 Xi, 6 Xi]."""
        with self.assertRaises(PartitionError):
            build_partition(14, Grid(64), Xi=2.0)

    def test_unresolved_period(self):
        """Test that the grid must resolve the cells."""
        with self.assertRaises(PartitionError):
            build_partition(6, Grid(16))


class TransportTest(SimpleTestCase):
    """Test cases for the back-to-labels transport."""

    def setUp(self):
        self.grid = Grid(16)
        self.partition = build_partition(2, self.grid)

    def test_zero_flow(self):
        """Test that a zero velocity keeps Gamma = x and freezes the partition."""
        frame = advect_frame(PeriodicField.zeros(self.grid, Rank.VECTOR), 0.0, 5, 0.01, self.partition)
        self.assertEqual(len(frame), 6)
        for frame_map in frame.maps:
            self.assertEqual(frame_map.displacement.sup_norm(), 0.0)
        self.assertLess(frame.partition_defect(), 1e-12)

    def test_constant_flow_translates(self):
        """Test that a constant velocity c gives Gamma = x - c (t - t_I)."""
        c = np.array([0.1, -0.05, 0.02])
        velocity = PeriodicField(self.grid, Rank.VECTOR, np.broadcast_to(c.reshape(3, 1, 1, 1), (3,) + self.grid.shape).copy())
        frame = advect_frame(velocity, 1.0, 10, 0.01)
        for t, frame_map in zip(frame.times, frame.maps):
            expected = -c * (t - 1.0)
            np.testing.assert_allclose(frame_map.displacement.samples, np.broadcast_to(expected.reshape(3, 1, 1, 1), (3,) + self.grid.shape), atol=1e-12)

    def test_initial_sample_is_identity(self):
        """Test that Gamma(t_I, x) = x exactly."""
        frame = advect_frame(cellular_flow(self.grid, 0.05), 0.0, 3, 0.005)
        self.assertEqual(frame.maps[0].displacement.sup_norm(), 0.0)
        np.testing.assert_allclose(frame.times, [0.0, 0.005, 0.01, 0.015])

    def test_cellular_flow_preserves_partition(self):
        """Test that sum chi^2 = 1 survives 100 steps of a cellular flow."""
        frame = advect_frame(cellular_flow(self.grid, 0.05), 0.0, 100, 0.005, self.partition)
        self.assertLess(frame.partition_defect(), 1e-6)
        low, high = frame.determinant_range()
        self.assertGreaterEqual(low, 0.5)
        self.assertLessEqual(high, 2.0)
        self.assertGreater(frame.maps[-1].deformation(), 0.0)

    def test_refinement_gap_is_small(self):
        """Test that halving dt changes the final map very little."""
        self.assertLess(refinement_gap(cellular_flow(self.grid, 0.05), 0.0, 10, 0.01), 1e-3)

    def test_cfl_violation(self):
        """Test that dt |v| n >= 1/2 is rejected."""
        with self.assertRaisesRegex(TransportError, 'CFL'):
            advect_frame(cellular_flow(self.grid, 1.0), 0.0, 1, 0.05)

    def test_strain_budget(self):
        """Test that runs longer than the b0 budget are rejected."""
        with self.assertRaisesRegex(TransportError, 'budget'):
            advect_frame(cellular_flow(self.grid, 0.05), 0.0, 1000, 0.005)

    def test_sample_index(self):
        """Test lookup of time samples."""
        frame = advect_frame(PeriodicField.zeros(self.grid, Rank.VECTOR), 2.0, 4, 0.25)
        self.assertEqual(frame.sample_index(2.5), 2)
        with self.assertRaises(TransportError):
            frame.sample_index(2.1)


class AmplitudeTest(SimpleTestCase):
    """Test cases for the amplitude solve."""

    def setUp(self):
        self.grid = Grid(8)
        self.identity = BackToLabelsMap.identity(self.grid)
        self.zero_pressure = PeriodicField.zeros(self.grid, Rank.SCALAR)

    def test_isotropic_stress(self):
        """Test that R = -c Id gives gamma_f^2 = c/4."""
        amplitudes = solve_amplitudes(isotropic_stress(self.grid, 2.0), self.zero_pressure, self.identity, 1.0)
        np.testing.assert_allclose(amplitudes.gamma ** 2, 0.5, atol=1e-12)

    def test_pressure_only(self):
        """Test that R = 0, P = -c reduces to the isotropic case."""
        pressure = PeriodicField(self.grid, Rank.SCALAR, np.full(self.grid.shape, -2.0))
        amplitudes = solve_amplitudes(PeriodicField.zeros(self.grid, Rank.SYM2), pressure, self.identity, 1.0)
        np.testing.assert_allclose(amplitudes.gamma ** 2, 0.5, atol=1e-12)

    def test_chosen_pressure_fixes_the_trace(self):
        """Test that the chosen pressure makes tr M = 3 kappa."""
        stress = PeriodicField.zeros(self.grid, Rank.SYM2)
        pressure = choose_pressure(stress, self.identity, 1.0, trace_target=1.0)
        np.testing.assert_allclose(pressure.samples, -1.0)
        amplitudes = solve_amplitudes(stress, pressure, self.identity, 1.0)
        np.testing.assert_allclose(amplitudes.gamma ** 2, 0.25, atol=1e-12)

    def test_round_trip_in_a_distorted_frame(self):
        """Test that the solved amplitudes rebuild -P Id - R_eps."""
        frame_map = BackToLabelsMap(0.02 * band_limited_random_field(self.grid, Rank.VECTOR, 2, seed=3))
        perturbation = band_limited_random_field(self.grid, Rank.SYM2, 2, seed=4)
        stress = isotropic_stress(self.grid, 1.0) + perturbation * 0.01
        amplitudes = solve_amplitudes(stress, self.zero_pressure, frame_map, 0.8)
        self.assertLess(cancellation_residual(amplitudes, stress), 1e-10)

    def test_target_outside_cone(self):
        """Test that a stress outside the cone names the worst point."""
        samples = np.zeros((3, 3) + self.grid.shape)
        samples[0, 0] = 1.0
        samples[1, 1] = samples[2, 2] = -1.0
        stress = PeriodicField(self.grid, Rank.SYM2, samples)
        with self.assertRaisesRegex(AmplitudeConeError, 'grid point'):
            solve_amplitudes(stress, self.zero_pressure, self.identity, 1.0)

    def test_zero_energy(self):
        """Test that amplitudes vanish where the time cutoff does."""
        amplitudes = solve_amplitudes(isotropic_stress(self.grid, 1.0), self.zero_pressure, self.identity, 0.0)
        self.assertEqual(float(np.max(amplitudes.gamma)), 0.0)
        self.assertEqual(cancellation_residual(amplitudes, isotropic_stress(self.grid, 1.0)), 0.0)


class TimeCutoffTest(SimpleTestCase):
    """Test cases for the time cutoff."""

    def setUp(self):
        self.cutoff = TimeCutoff(1.0, 0.2)

    def test_plateau_and_support(self):
        """Test that e^{1/2} is one on the plateau and zero outside the support."""
        np.testing.assert_array_equal(self.cutoff.sqrt_value(np.array([0.9, 1.0, 1.1])), 1.0)
        np.testing.assert_array_equal(self.cutoff.value(np.array([0.8, 1.2, 1.5])), 0.0)
        self.assertEqual(self.cutoff.support, (0.8, 1.2))

    def test_monotone_transition(self):
        """Test that the cutoff decreases between theta/2 and theta."""
        values = self.cutoff.sqrt_value(np.linspace(1.1, 1.2, 21))
        self.assertTrue(np.all(np.diff(values) <= 0.0))
        self.assertTrue(np.all((values[1:-1] > 0.0) & (values[1:-1] < 1.0)))

    def test_invalid_theta(self):
        """Test that theta must be positive."""
        with self.assertRaises(ValueError):
            TimeCutoff(0.0, 0.0)


class WaveAssemblyTest(SimpleTestCase):
    """Test cases for the wave assembly."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = Grid(32)
        cls.tubes = build_tube_family()
        cls.frame = advect_frame(PeriodicField.zeros(cls.grid, Rank.VECTOR), 0.0, 0, 0.01, build_partition(2, cls.grid))
        cls.stress = isotropic_stress(cls.grid, 1.0)
        cls.amplitudes = solve_amplitudes(cls.stress, PeriodicField.zeros(cls.grid, Rank.SCALAR), cls.frame.maps[0], 1.0)
        cls.assembly = assemble_waves(cls.tubes, cls.frame, cls.amplitudes, 8, keep_fields=True)

    def test_48_waves(self):
        """Test that one wave is assembled per class."""
        self.assertEqual(len(self.assembly.waves), 48)
        self.assertEqual({wave.key for wave in self.assembly.waves}, set(TUBE_KEYS))

    def test_divergence_free(self):
        """Test that div V vanishes to round-off."""
        self.assertLess(self.assembly.divergence_defect(), 1e-9)
        for wave in self.assembly.waves[::11]:
            scale = max(wave.velocity.sup_norm(), 1e-300)
            self.assertLess(divergence(wave.velocity).sup_norm() / scale, 1e-9)

    def test_main_supports_are_disjoint(self):
        """Test that off-diagonal products of the main terms vanish exactly."""
        self.assertEqual(self.assembly.disjointness_defect, 0.0)

    def test_orthogonality(self):
        """Test that v_J . grad psi_J = 0."""
        self.assertLess(self.assembly.orthogonality_defect, 1e-8)

    def test_amplitudes_cancel_the_stress(self):
        """Test that sum_J v_J (x) v_J = -R_eps through the partition."""
        gap = self.assembly.amplitude_stress + self.stress
        self.assertLess(gap.sup_norm(), 1e-10)

    def test_static_wave_in_identity_frame(self):
        """Test that V~_J = chi gamma psi(lam x) f in the identity frame."""
        points = self.grid.coordinates()
        wave = self.assembly.waves[0]
        f_index, parity = wave.key
        cutoff = self.frame.partition.class_cutoff(parity, points)
        expected = 0.5 * cutoff * self.tubes.psi(wave.key, 8 * points) * DIRECTIONS[f_index].reshape(3, 1, 1, 1)
        np.testing.assert_allclose(wave.main.samples, expected, atol=1e-12)
        np.testing.assert_allclose(wave.velocity.samples, (wave.main + wave.correction).samples, atol=1e-12)

    def test_correction_bound_slope(self):
        """Test that the correction bound decays like 1/lam over a sweep."""
        self.assertAlmostEqual(correction_slope(self.assembly), -1.0, delta=0.15)

    def test_unresolved_frequency(self):
        """Test that lam |grad Gamma| >= n/3 is rejected."""
        with self.assertRaises(ResolutionError):
            assemble_waves(self.tubes, self.frame, self.amplitudes, 16)

    def test_mollification_requirement(self):
        """Test both sides of the mollification condition."""
        velocity = PeriodicField.zeros(self.grid, Rank.VECTOR)
        report = mollification_requirement(velocity, velocity, self.assembly, 1.0, 0.1, 4, math.log(10.0))
        self.assertEqual(report['lhs'], 0.0)
        self.assertAlmostEqual(report['rhs'], math.sqrt(0.1 * math.log(10.0)) / 2000.0)
        self.assertTrue(report['holds'])
        self.assertGreater(self.assembly.peak(), 0.0)


class ScalesTest(SimpleTestCase):
    """Test cases for the mollification scale and the frequency."""

    def test_mollification_scale(self):
        """Test eps_v = c_v N^{-1/2} / Xi."""
        self.assertAlmostEqual(mollification_scale(1, 4.0, 1.0), 0.25)
        self.assertAlmostEqual(mollification_scale(4, 4.0, 1.0), 0.125)
        self.assertAlmostEqual(mollification_scale(16, 4.0, 1.0), 0.0625)

    def test_mollification_scale_needs_n_at_least_one(self):
        """Test that N < 1 is rejected."""
        with self.assertRaises(ValueError):
            mollification_scale(0.5, 4.0)

    @override_settings(LAB={**settings.LAB, 'B_LAMBDA': 2.0})
    def test_frequency_is_rounded_up(self):
        """Test lam = ceil(B_lambda N Xi)."""
        self.assertEqual(oscillation_frequency(2, 3.0), 12)
        self.assertEqual(oscillation_frequency(1.5, 3.1), 10)


class DecompositionTest(SimpleTestCase):
    """Test cases for the error decomposition and the new flow."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = Grid(16)
        cls.tubes = build_tube_family(grid=Grid(settings.LAB['PROFILE_GRID']))
        zero = PeriodicField.zeros(cls.grid, Rank.VECTOR)
        cls.frame = advect_frame(zero, 0.0, 2, 0.01, build_partition(2, cls.grid))
        cls.stress = isotropic_stress(cls.grid, 1.0)
        pressure = PeriodicField.zeros(cls.grid, Rank.SCALAR)
        cls.state = EulerReynoldsState.steady(zero, pressure, cls.stress, cls.frame.times)
        cls.amplitudes = [
            solve_amplitudes(cls.stress, pressure, frame_map, 1.0) for frame_map in cls.frame.maps
        ]
        cls.assemblies = [
            assemble_waves(cls.tubes, cls.frame, amplitudes, 4, index=i)
            for i, amplitudes in enumerate(cls.amplitudes)
        ]

    def test_zero_correction(self):
        """Test that V = 0 leaves R_M = R - R_eps and R_S = 0."""
        zero = PeriodicField.zeros(self.grid, Rank.VECTOR)
        bump = band_limited_random_field(self.grid, Rank.SYM2, 3, seed=8)
        stress = self.stress + bump * 0.1
        mollified = mollify(stress, 0.1)
        state = EulerReynoldsState.steady(zero, PeriodicField.zeros(self.grid, Rank.SCALAR), stress, self.frame.times)
        quiet = Amplitudes(np.zeros((6,) + self.grid.shape), PeriodicField.zeros(self.grid, Rank.SCALAR), 0.0, self.frame.maps[0])
        assemblies = [assemble_waves(self.tubes, self.frame, quiet, 4, index=i) for i in range(len(self.frame))]
        decomposition = decompose_errors(state, 1, zero, mollified, assemblies, quiet)
        np.testing.assert_allclose(decomposition.mollification.samples, (stress - mollified).samples, atol=1e-14)
        self.assertEqual(decomposition.stress.sup_norm(), 0.0)

    def test_off_diagonal_terms_vanish(self):
        """Test that the off-diagonal products of the main terms are exactly zero."""
        zero = PeriodicField.zeros(self.grid, Rank.VECTOR)
        decomposition = decompose_errors(self.state, 1, zero, self.stress, self.assemblies, self.amplitudes[1])
        self.assertEqual(decomposition.off_diagonal, 0.0)
        gap = decomposition.high - decomposition.high_reduced
        self.assertLess(gap.sup_norm(), 1e-9 * max(decomposition.high.sup_norm(), 1.0))

    def test_new_flow_keeps_the_residual(self):
        """Test that the corrected flow has the same Euler-Reynolds residual."""
        zero = PeriodicField.zeros(self.grid, Rank.VECTOR)
        corrected, decompositions = new_flow(self.state, zero, self.stress, self.assemblies, self.amplitudes)
        self.assertEqual(len(decompositions), 3)
        scale = self.assemblies[1].velocity.sup_norm() ** 2 * self.grid.n
        self.assertLess(euler_reynolds_residual(corrected), 1e-9 * max(scale, 1.0))

    def test_oscillatory_sources(self):
        """Test that the transport and high-frequency sources are emitted per wave."""
        zero = PeriodicField.zeros(self.grid, Rank.VECTOR)
        decomposition = decompose_errors(
            self.state, 1, zero, self.stress, self.assemblies, self.amplitudes[1],
            tubes=self.tubes, frame=self.frame, max_modes=8,
        )
        self.assertEqual(len(decomposition.high_sources), 48)
        self.assertEqual(len(decomposition.transport_sources), 48)
        for source in decomposition.high_sources[::12]:
            self.assertLessEqual(len(source.modes), 8)
            self.assertEqual(source.frequency, 4)

import csv
import json
import math
import tempfile
from pathlib import Path
from unittest import mock

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.db import DatabaseError
from django.test import SimpleTestCase, TestCase

from fields.grid import Grid, Rank
from fields.pfld import write_fields
from fields.synthetic import band_limited_random_field
from flux.reports import flux_scale
from .artifacts import recorded_run, write_csv, write_json
from .exceptions import ConfigSchemaError
from .forms import BuildStepConfigForm, FluxConfigForm, IterateConfigForm, MikadoCheckConfigForm, load_config
from .models import RunManifest
from .pipelines import flux_input


def read_rows(path):
    with open(path, newline='') as handle:
        return list(csv.DictReader(handle))


class ConfigDirectoryMixin:
    def setUp(self):
        super().setUp()
        self.directory = tempfile.TemporaryDirectory()
        self.root = Path(self.directory.name)

    def tearDown(self):
        self.directory.cleanup()
        super().tearDown()

    def config(self, document, name='config.json'):
        path = self.root / name
        path.write_text(json.dumps(document))
        return str(path)


class ConfigFormTest(ConfigDirectoryMixin, SimpleTestCase):
    """Test cases for the run config schemas."""

    def test_defaults_fill_missing_keys(self):
        """Test that a config holding only its schema validates with defaults."""
        form = IterateConfigForm({'schema': IterateConfigForm.SCHEMA})
        self.assertTrue(form.is_valid(), form.errors)
        self.assertEqual(form.cleaned_data['gamma'], 4.0)
        self.assertEqual(form.iteration_config().a_exp, 2.5)

    def test_wrong_schema(self):
        """Test that a config for another command is refused."""
        form = IterateConfigForm({'schema': FluxConfigForm.SCHEMA})
        self.assertFalse(form.is_valid())
        self.assertIn('schema', form.errors)

    def test_unknown_log_exponent(self):
        """Test that A must be 5/2 or 3/2."""
        form = IterateConfigForm({'schema': IterateConfigForm.SCHEMA, 'a_exp': 2.0})
        self.assertFalse(form.is_valid())
        self.assertIn('a_exp', form.errors)

    def test_uncalibrated_run_needs_initial_stress(self):
        """Test that calibrate=false requires log_er_init."""
        form = IterateConfigForm({'schema': IterateConfigForm.SCHEMA, 'calibrate': False})
        self.assertFalse(form.is_valid())
        form = IterateConfigForm({'schema': IterateConfigForm.SCHEMA, 'calibrate': False, 'log_er_init': -30.0})
        self.assertTrue(form.is_valid(), form.errors)

    def test_sequence_gain_needs_values(self):
        """Test that library validation errors surface as form errors."""
        form = IterateConfigForm({'schema': IterateConfigForm.SCHEMA, 'gain': 'sequence', 'gain_values': [1.0]})
        self.assertFalse(form.is_valid())
        self.assertIn('__all__', form.errors)

    def test_build_step_mollification_scale(self):
        """Test that eps must lie in (0, 1/4) and grids must be even."""
        self.assertFalse(BuildStepConfigForm({'schema': BuildStepConfigForm.SCHEMA, 'eps': 0.3}).is_valid())
        self.assertFalse(BuildStepConfigForm({'schema': BuildStepConfigForm.SCHEMA, 'n': 33}).is_valid())
        self.assertTrue(BuildStepConfigForm({'schema': BuildStepConfigForm.SCHEMA}).is_valid())

    def test_flux_needs_exactly_one_source(self):
        """Test that a flux config names either a PFLD file or a synthetic field."""
        schema = FluxConfigForm.SCHEMA
        self.assertFalse(FluxConfigForm({'schema': schema}).is_valid())
        self.assertFalse(FluxConfigForm({'schema': schema, 'input': 'v.pfld', 'synthetic': 'shear'}).is_valid())
        self.assertTrue(FluxConfigForm({'schema': schema, 'synthetic': 'shear'}).is_valid())

    def test_flux_scales_and_kernels(self):
        """Test that scales must decrease and kernels must be known."""
        schema = FluxConfigForm.SCHEMA
        form = FluxConfigForm({'schema': schema, 'synthetic': 'shear', 'eps': [0.01, 0.02]})
        self.assertIn('eps', form.errors)
        form = FluxConfigForm({'schema': schema, 'synthetic': 'shear', 'kernels': ['A', 'C']})
        self.assertIn('kernels', form.errors)

    def test_load_config_reports_every_error(self):
        """Test that schema violations name the offending keys."""
        path = self.config({'schema': MikadoCheckConfigForm.SCHEMA, 'profile': 1, 'n': 'many'})
        with self.assertRaises(ConfigSchemaError) as raised:
            load_config(path, MikadoCheckConfigForm)
        self.assertIn('profile', raised.exception.errors)
        self.assertIn('n', raised.exception.errors)

    def test_load_config_rejects_malformed_json(self):
        """Test that unreadable JSON is a schema error."""
        path = self.root / 'broken.json'
        path.write_text('{"schema": ')
        with self.assertRaisesRegex(ConfigSchemaError, 'cannot read config'):
            load_config(path, IterateConfigForm)


class ArtifactsTest(ConfigDirectoryMixin, SimpleTestCase):
    """Test cases for the CSV and JSON writers."""

    def test_csv_uses_repr_floats(self):
        """Test that floats are written with repr and missing cells stay empty."""
        path = write_csv(self.root / 't.csv', [{'a': 0.1, 'b': np.float64(1 / 3)}, {'a': None, 'b': 2}], ['a', 'b'])
        self.assertEqual(path.read_text(), 'a,b\n0.1,0.3333333333333333\n,2\n')

    def test_json_is_sorted_and_finite(self):
        """Test that JSON keys are sorted and non-finite numbers become null."""
        path = write_json(self.root / 's.json', {'b': np.array([1.0, math.inf]), 'a': np.int64(3)})
        self.assertEqual(json.loads(path.read_text()), {'a': 3, 'b': [1.0, None]})
        self.assertLess(path.read_text().index('"a"'), path.read_text().index('"b"'))


class RecordedRunTest(ConfigDirectoryMixin, TestCase):
    """Test cases for the recorded_run context manager."""

    def test_error_is_recorded_and_reraised(self):
        """Test that an error inside the block is saved with verdict 'error' and re-raised."""
        with self.assertRaisesRegex(ValueError, 'boom'):
            with recorded_run('flux', {'n': 16}, 4, self.root / 'out'):
                raise ValueError('boom')
        manifest = RunManifest.objects.get()
        self.assertEqual((manifest.verdict, manifest.message), ('error', 'boom'))
        document = json.loads((self.root / 'out' / 'manifest.json').read_text())
        self.assertEqual(document['verdict'], 'error')

    def test_failed_save_keeps_the_original_error(self):
        """Test that a database failure while recording an error does not replace it."""
        with mock.patch.object(RunManifest, 'save', side_effect=DatabaseError('database is locked')):
            with self.assertLogs('lab.artifacts', level='ERROR'):
                with self.assertRaisesRegex(ValueError, 'boom'):
                    with recorded_run('flux', {}, 4, self.root / 'out'):
                        raise ValueError('boom')

    def test_failed_save_after_success_is_raised(self):
        """Test that a database failure after a clean run surfaces."""
        with mock.patch.object(RunManifest, 'save', side_effect=DatabaseError('database is locked')):
            with self.assertRaisesRegex(DatabaseError, 'locked'):
                with recorded_run('flux', {}, 4, self.root / 'out'):
                    pass


class RunManifestTest(TestCase):
    """Test cases for the RunManifest model."""

    def test_verdict_follows_checks(self):
        """Test that one failed check fails the run."""
        manifest = RunManifest(command='flux', seed=3)
        manifest.record_checks({'holder_chain': True})
        self.assertTrue(manifest.passed)
        manifest.record_checks({'kernel_independence': False})
        self.assertFalse(manifest.passed)
        self.assertEqual(manifest.failed_checks(), ['kernel_independence'])

    def test_document_leaves_out_timings(self):
        """Test that the JSON copy holds no database id or wall-clock."""
        manifest = RunManifest.objects.create(command='iterate', seed=1, wall_clock=2.5)
        document = manifest.as_document()
        self.assertNotIn('wall_clock', document)
        self.assertNotIn('id', document)
        self.assertEqual(str(manifest), 'iterate (seed 1) - Pass')

    def test_missing_outputs(self):
        """Test that outputs that do not exist are reported."""
        manifest = RunManifest(command='flux', output_paths=['/nonexistent/flux.csv'])
        self.assertEqual(manifest.missing_outputs(), ['/nonexistent/flux.csv'])


class IterateCommandTest(ConfigDirectoryMixin, TestCase):
    """Test cases for the iterate command."""

    def run_iterate(self, **config):
        out = self.root / 'out'
        call_command('iterate', config=self.config({'schema': IterateConfigForm.SCHEMA, **config}), out=str(out))
        return out, json.loads((out / 'summary.json').read_text())

    def test_borderline_target(self):
        """Test that gamma = 4, A = 5/2 reports B and the target 2 sqrt(2/3)."""
        out, summary = self.run_iterate(gamma=4.0, a_exp=2.5, k_max=200)
        self.assertAlmostEqual(summary['b_target'], 2.0 * math.sqrt(2.0 / 3.0), places=12)
        self.assertIn('b_fit', summary)
        self.assertEqual(len(read_rows(out / 'trace.csv')), 200)
        manifest = RunManifest.objects.get()
        self.assertTrue(manifest.passed)
        self.assertTrue((out / 'manifest.json').exists())

    def test_improved_target(self):
        """Test that gamma = 8/3, A = 3/2 reports the target 4/3."""
        _, summary = self.run_iterate(gamma=8.0 / 3.0, a_exp=1.5, k_max=100, gamma_grid=[2.0, 2.5, 8.0 / 3.0, 3.0])
        self.assertAlmostEqual(summary['b_target'], 4.0 / 3.0, places=12)
        self.assertAlmostEqual(summary['gamma_grid_minimizer'], 8.0 / 3.0)

    def test_malformed_config(self):
        """Test that a schema violation exits with an error naming the schema."""
        with self.assertRaisesRegex(CommandError, 'schema'):
            call_command('iterate', config=self.config({'schema': 'onsager-lab/iterate@2'}), out=str(self.root))
        self.assertFalse(RunManifest.objects.exists())


class MikadoCheckCommandTest(ConfigDirectoryMixin, TestCase):
    """Test cases for the mikado_check command."""

    def test_default_radius_passes(self):
        """Test that all 48 tubes pass separation and normalization."""
        out = self.root / 'out'
        config = self.config({'schema': MikadoCheckConfigForm.SCHEMA, 'potentials': False})
        call_command('mikado_check', config=config, out=str(out))
        rows = read_rows(out / 'tubes.csv')
        self.assertEqual(len(rows), 48)
        geometry = json.loads((out / 'geometry.json').read_text())
        self.assertTrue(all(geometry['checks'].values()))
        self.assertEqual(geometry['partition_members'], 8)

    def test_outputs_are_deterministic(self):
        """Test that identical config and seed give byte-identical outputs."""
        config = self.config({'schema': MikadoCheckConfigForm.SCHEMA, 'potentials': False})
        for name in ('a', 'b'):
            call_command('mikado_check', config=config, out=str(self.root / name), seed=7)
        for artifact in ('tubes.csv', 'geometry.json', 'manifest.json'):
            self.assertEqual((self.root / 'a' / artifact).read_bytes(), (self.root / 'b' / artifact).read_bytes())

    def test_transported_partition(self):
        """Test that the partition identity survives 100 steps of a cellular flow."""
        out = self.root / 'out'
        config = self.config({
            'schema': MikadoCheckConfigForm.SCHEMA, 'potentials': False, 'n': 16,
            'transport_steps': 100, 'flow_amplitude': 0.05, 'dt': 0.005,
        })
        call_command('mikado_check', config=config, out=str(out))
        geometry = json.loads((out / 'geometry.json').read_text())
        self.assertLess(geometry['partition_drift'], 1e-6)

    def test_infeasible_radius(self):
        """Test that a radius too large names the closest pair."""
        config = self.config({'schema': MikadoCheckConfigForm.SCHEMA, 'r0': 0.2})
        with self.assertRaisesRegex(CommandError, 'infeasible'):
            call_command('mikado_check', config=config, out=str(self.root / 'out'))
        self.assertEqual(RunManifest.objects.get().verdict, 'error')

    def test_odd_partition_period(self):
        """Test that an odd Pi is a validation error."""
        config = self.config({'schema': MikadoCheckConfigForm.SCHEMA, 'potentials': False, 'Pi': 3})
        with self.assertRaisesRegex(CommandError, 'PartitionError'):
            call_command('mikado_check', config=config, out=str(self.root / 'out'))


class BuildStepCommandTest(ConfigDirectoryMixin, TestCase):
    """Test cases for the build_step command."""

    def test_identity_frame_smoke_run(self):
        """Test that v = 0 with an isotropic stress cancels and stays divergence-free."""
        out = self.root / 'out'
        call_command('build_step', config=self.config({'schema': BuildStepConfigForm.SCHEMA}), out=str(out))
        rows = read_rows(out / 'residuals.csv')
        self.assertEqual(len(rows), 3)
        for row in rows:
            self.assertLess(float(row['cancellation']), 1e-9)
            self.assertLess(float(row['divergence']), 1e-9)
        summary = json.loads((out / 'summary.json').read_text())
        self.assertTrue(all(summary['checks'].values()))
        for name in ('velocity', 'pressure', 'stress', 'correction', 'stress_transport'):
            self.assertTrue((out / f'{name}.pfld').exists())

    def test_coarse_grid(self):
        """Test that a grid too coarse for lam trips the resolution guard."""
        config = self.config({'schema': BuildStepConfigForm.SCHEMA, 'n': 16})
        with self.assertRaisesRegex(CommandError, 'refine the grid'):
            call_command('build_step', config=config, out=str(self.root / 'out'))


class FluxCommandTest(ConfigDirectoryMixin, TestCase):
    """Test cases for the flux command."""

    def test_parallel_mikado_field(self):
        """Test that a one-direction Mikado field has a vanishing flux column."""
        out = self.root / 'out'
        document = {'schema': FluxConfigForm.SCHEMA, 'synthetic': 'mikado_parallel', 'n': 96, 'eps': [0.08, 0.04]}
        call_command('flux', config=self.config(document), out=str(out))
        scale = flux_scale(flux_input(FluxConfigForm(document).data, 0))
        for row in read_rows(out / 'flux.csv'):
            self.assertLess(abs(float(row['flux'])), 1e-10 * scale)

    def test_smooth_random_field(self):
        """Test that the stress order fitted over the sweep is at least 1.9."""
        out = self.root / 'out'
        document = {
            'schema': FluxConfigForm.SCHEMA, 'synthetic': 'random', 'n': 16, 'band': 2,
            'eps': [0.02, 0.01, 0.005],
        }
        call_command('flux', config=self.config(document), out=str(out), seed=4)
        summary = json.loads((out / 'flux.json').read_text())
        self.assertGreaterEqual(summary['orders']['A']['stress'], 1.9)
        self.assertTrue(summary['holder_chain_holds'])

    def test_pfld_input(self):
        """Test that a PFLD file is read and recorded as an input."""
        path = self.root / 'v.pfld'
        write_fields(path, band_limited_random_field(Grid(16), Rank.VECTOR, 2, seed=1, solenoidal=True))
        out = self.root / 'out'
        call_command('flux', config=self.config({'schema': FluxConfigForm.SCHEMA, 'input': str(path)}), out=str(out))
        manifest = RunManifest.objects.get()
        self.assertIn(str(path), manifest.input_paths)
        self.assertIn('v.pfld', json.loads((out / 'manifest.json').read_text())['inputs'])

    def test_truncated_pfld(self):
        """Test that a truncated PFLD file is a clean I/O error."""
        path = self.root / 'v.pfld'
        write_fields(path, band_limited_random_field(Grid(16), Rank.VECTOR, 2, seed=1))
        path.write_bytes(path.read_bytes()[:-8])
        config = self.config({'schema': FluxConfigForm.SCHEMA, 'input': str(path)})
        with self.assertRaisesRegex(CommandError, 'FieldFormatError'):
            call_command('flux', config=config, out=str(self.root / 'out'))

    def test_seed_must_be_unsigned(self):
        """Test that a negative seed is refused."""
        config = self.config({'schema': FluxConfigForm.SCHEMA, 'synthetic': 'shear', 'n': 16})
        with self.assertRaisesRegex(CommandError, 'seed'):
            call_command('flux', config=config, out=str(self.root / 'out'), seed=-1)

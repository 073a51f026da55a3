"""Shared base for the lab management commands."""

import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from onsager_lab.exceptions import OnsagerLabError

from .artifacts import recorded_run
from .exceptions import ConfigSchemaError
from .forms import load_config
from .pipelines import PIPELINES


LAB_APPS = ('params', 'fields', 'mikado', 'divsolve', 'flux', 'lab')
MAX_SEED = 2 ** 64


class LabCommand(BaseCommand):
    """
    Run one pipeline from a JSON config.

    Library errors become CommandError with return code 1; so does any
    failed invariant check, after the manifest has been written.
    """

    command_name = None
    form_class = None

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Path to the JSON run config')
        parser.add_argument('--out', help='Output directory (default: LAB OUTPUT_DIR/<command>)')
        parser.add_argument('--seed', type=int, help='Seed for every random field of the run')
        parser.add_argument('--verbose', action='store_true', help='Log per-step numbers')

    def handle(self, *args, **options):
        if options['verbose']:
            options['verbosity'] = max(options['verbosity'], 2)
            for app in LAB_APPS:
                logging.getLogger(app).setLevel(logging.DEBUG)
        seed = settings.LAB['SEED'] if options['seed'] is None else options['seed']
        if not 0 <= seed < MAX_SEED:
            raise CommandError(f'--seed must be an unsigned 64-bit integer, got {seed}', returncode=1)
        out_dir = Path(options['out']) if options['out'] else Path(settings.LAB['OUTPUT_DIR']) / self.command_name

        try:
            form = load_config(options['config'], self.form_class)
        except ConfigSchemaError as exc:
            raise CommandError(str(exc), returncode=1)

        try:
            with recorded_run(self.command_name, form.echo(), seed, out_dir) as manifest:
                manifest.input_paths = [str(options['config'])]
                checks = PIPELINES[self.command_name](form, out_dir, manifest)
                manifest.record_checks(checks)
        except (OnsagerLabError, ValueError) as exc:
            raise CommandError(f'{type(exc).__name__}: {exc}', returncode=1)

        if options['verbosity'] >= 1:
            for name, passed in sorted(manifest.checks.items()):
                style = self.style.SUCCESS if passed else self.style.ERROR
                self.stdout.write(style(f'{name:<24} {"pass" if passed else "FAIL"}'))
            self.stdout.write(f'outputs written to {out_dir}')
        if not manifest.passed:
            raise CommandError(f'failed checks: {", ".join(manifest.failed_checks())}', returncode=1)
        self.stdout.write(self.style.SUCCESS(f'{self.command_name} finished: all checks pass'))

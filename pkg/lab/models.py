"""
Run bookkeeping for the lab commands.

Models:
    - RunManifest: one batch run (command, config echo, seed, inputs, outputs,
      package versions, tolerances, verdict)
"""

from importlib import metadata
from pathlib import Path

from django.db import models


TRACKED_PACKAGES = ('Django', 'numpy', 'scipy')


def package_versions():
    versions = {}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


class RunManifest(models.Model):
    """
    A record of one command run.

    The JSON copy written next to the outputs (``as_document``) leaves out
    the database id and timings, so identical config and seed give identical
    manifests.
    """

    COMMAND_CHOICES = [
        ('iterate', 'Iterate'),
        ('build_step', 'Build step'),
        ('flux', 'Flux'),
        ('mikado_check', 'Mikado check'),
    ]
    VERDICT_CHOICES = [
        ('pass', 'Pass'),
        ('fail', 'Fail'),
        ('error', 'Error'),
    ]

    command = models.CharField(max_length=20, choices=COMMAND_CHOICES)
    config = models.JSONField(default=dict)
    seed = models.BigIntegerField(default=0)
    input_paths = models.JSONField(default=list, blank=True)
    output_paths = models.JSONField(default=list, blank=True)
    versions = models.JSONField(default=package_versions)
    tolerances = models.JSONField(default=dict, blank=True)
    checks = models.JSONField(default=dict, blank=True, help_text="Named invariant checks: {'name': true/false}")
    verdict = models.CharField(max_length=10, choices=VERDICT_CHOICES, default='pass')
    message = models.TextField(blank=True)
    wall_clock = models.FloatField(default=0.0, help_text="Seconds spent in the command")
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f'{self.command} (seed {self.seed}) - {self.get_verdict_display()}'

    @property
    def passed(self):
        return self.verdict == 'pass'

    def record_checks(self, checks):
        """Merge named check results and set the verdict from them."""
        self.checks = {**self.checks, **{name: bool(value) for name, value in checks.items()}}
        if self.verdict != 'error':
            self.verdict = 'pass' if all(self.checks.values()) else 'fail'

    def failed_checks(self):
        return sorted(name for name, value in self.checks.items() if not value)

    def missing_outputs(self):
        return [path for path in self.output_paths if not Path(path).exists()]

    def as_document(self):
        return {
            'command': self.command,
            'config': self.config,
            'seed': self.seed,
            'inputs': [Path(path).name for path in self.input_paths],
            'outputs': [Path(path).name for path in self.output_paths],
            'versions': self.versions,
            'tolerances': self.tolerances,
            'checks': self.checks,
            'verdict': self.verdict,
            'message': self.message,
        }

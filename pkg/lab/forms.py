"""
Run configuration schemas.

A run config is a JSON document whose ``schema`` key names one of the forms
below. Missing keys take the defaults of the form; ``load_config`` raises
ConfigSchemaError with the form errors when the document does not validate.
"""

import json
import math
from pathlib import Path

from django import forms
from django.conf import settings
from django.core.validators import MinValueValidator

from fields.kernels import KERNELS
from params.exceptions import ConfigurationError
from params.levels import GainSchedule, IterationConfig

from .exceptions import ConfigSchemaError


def _positive(value):
    if not value > 0:
        raise forms.ValidationError('must be positive')


def _number_list(value, name, positive=False, minimum_length=1):
    if value is None:
        return None
    if not isinstance(value, list) or len(value) < minimum_length:
        raise forms.ValidationError(f'{name} must be a list of at least {minimum_length} numbers')
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in value):
        raise forms.ValidationError(f'{name} must hold finite numbers only')
    if positive and not all(v > 0 for v in value):
        raise forms.ValidationError(f'{name} must hold positive numbers only')
    return [float(v) for v in value]


class RunConfigForm(forms.Form):
    SCHEMA = None

    schema = forms.CharField()

    def __init__(self, data=None, **kwargs):
        super().__init__(data={**self.defaults(), **(data or {})}, **kwargs)

    @classmethod
    def defaults(cls):
        return {}

    def clean_schema(self):
        schema = self.cleaned_data['schema']
        if schema != self.SCHEMA:
            raise forms.ValidationError(f'expected schema {self.SCHEMA!r}, got {schema!r}')
        return schema

    def echo(self):
        """The validated config, JSON-ready."""
        return {name: value for name, value in self.cleaned_data.items() if value is not None}


class IterateConfigForm(RunConfigForm):
    SCHEMA = 'onsager-lab/iterate@1'

    c_hat = forms.FloatField(validators=[_positive])
    c_l = forms.FloatField(validators=[_positive])
    gamma = forms.FloatField(validators=[_positive])
    a_exp = forms.TypedChoiceField(choices=[(2.5, '5/2'), (1.5, '3/2')], coerce=float)
    log_er_init = forms.FloatField(required=False)
    log_xibar = forms.FloatField()
    k_max = forms.IntegerField(validators=[MinValueValidator(3)])
    gain = forms.ChoiceField(choices=[(mode, mode) for mode in GainSchedule.MODES])
    gain_values = forms.JSONField(required=False)
    calibrate = forms.BooleanField(required=False)
    gamma_grid = forms.JSONField(required=False)

    @classmethod
    def defaults(cls):
        return {
            'c_hat': settings.LAB['C_HAT'],
            'c_l': settings.LAB['C_L'],
            'gamma': 4.0,
            'a_exp': 2.5,
            'log_xibar': 0.0,
            'k_max': 1000,
            'gain': 'power',
            'calibrate': True,
        }

    def clean_gain_values(self):
        return _number_list(self.cleaned_data.get('gain_values'), 'gain_values', positive=True)

    def clean_gamma_grid(self):
        return _number_list(self.cleaned_data.get('gamma_grid'), 'gamma_grid', positive=True, minimum_length=2)

    def clean(self):
        cleaned = super().clean()
        if self.errors:
            return cleaned
        if not cleaned.get('calibrate') and cleaned.get('log_er_init') is None:
            raise forms.ValidationError('log_er_init is required when calibrate is false')
        try:
            self.iteration_config()
        except ConfigurationError as exc:
            raise forms.ValidationError(str(exc))
        return cleaned

    def iteration_config(self):
        data = self.cleaned_data
        overrides = {} if data.get('log_er_init') is None else {'log_er_init': data['log_er_init']}
        return IterationConfig(
            c_hat=data['c_hat'],
            c_l=data['c_l'],
            gamma=data['gamma'],
            a_exp=data['a_exp'],
            log_xibar=data['log_xibar'],
            k_max=data['k_max'],
            gain=GainSchedule(data['gain'], tuple(data.get('gain_values') or ())),
            **overrides,
        )


class BuildStepConfigForm(RunConfigForm):
    SCHEMA = 'onsager-lab/build-step@1'

    n = forms.IntegerField(validators=[MinValueValidator(8)])
    profile_grid = forms.IntegerField(validators=[MinValueValidator(16)])
    r0 = forms.FloatField(required=False, validators=[_positive])
    frequency = forms.IntegerField(validators=[MinValueValidator(1)])
    Pi = forms.IntegerField(validators=[MinValueValidator(2)])
    energy = forms.FloatField(validators=[_positive])
    stress_amplitude = forms.FloatField(validators=[MinValueValidator(0.0)])
    perturbation = forms.FloatField(validators=[MinValueValidator(0.0)])
    velocity = forms.ChoiceField(choices=[('zero', 'zero'), ('cellular', 'cellular')])
    velocity_amplitude = forms.FloatField()
    eps = forms.FloatField(validators=[_positive])
    samples = forms.IntegerField(validators=[MinValueValidator(3)])
    dt = forms.FloatField(validators=[_positive])
    theta = forms.FloatField(required=False, validators=[_positive])
    source_modes = forms.IntegerField(validators=[MinValueValidator(1)])
    parametrix_order = forms.IntegerField(validators=[MinValueValidator(0)])
    sweep = forms.BooleanField(required=False)
    e_v = forms.FloatField(validators=[_positive])
    e_r = forms.FloatField(validators=[_positive])
    big_n = forms.FloatField(validators=[MinValueValidator(1.0)])
    log_xihat = forms.FloatField(validators=[_positive])

    @classmethod
    def defaults(cls):
        return {
            'n': 32,
            'profile_grid': settings.LAB['PROFILE_GRID'],
            'frequency': 8,
            'Pi': 2,
            'energy': 1.0,
            'stress_amplitude': 0.5,
            'perturbation': 0.0,
            'velocity': 'zero',
            'velocity_amplitude': 0.0,
            'eps': 0.1,
            'samples': 3,
            'dt': 0.01,
            'source_modes': 8,
            'parametrix_order': 0,
            'sweep': False,
            'e_v': 1.0,
            'e_r': 0.1,
            'big_n': 4.0,
            'log_xihat': math.log(10.0),
        }

    def clean_eps(self):
        eps = self.cleaned_data['eps']
        if not eps < 0.25:
            raise forms.ValidationError(f'the mollification scale must lie in (0, 1/4), got {eps}')
        return eps

    def clean_parametrix_order(self):
        order = self.cleaned_data['parametrix_order']
        if order > settings.LAB['MAX_PARAMETRIX_ORDER']:
            raise forms.ValidationError(f'parametrix_order must not exceed {settings.LAB["MAX_PARAMETRIX_ORDER"]}')
        return order

    def clean(self):
        cleaned = super().clean()
        for name in ('n', 'profile_grid'):
            if cleaned.get(name) is not None and cleaned[name] % 2:
                self.add_error(name, 'grid sizes must be even')
        return cleaned


class FluxConfigForm(RunConfigForm):
    SCHEMA = 'onsager-lab/flux@1'
    SYNTHETIC = ('random', 'shear', 'lacunary', 'mikado', 'mikado_parallel')

    input = forms.CharField(required=False)
    time_index = forms.IntegerField(validators=[MinValueValidator(0)])
    synthetic = forms.ChoiceField(choices=[('', '')] + [(name, name) for name in SYNTHETIC], required=False)
    n = forms.IntegerField(validators=[MinValueValidator(8)])
    band = forms.IntegerField(validators=[MinValueValidator(1)])
    exponent = forms.FloatField(validators=[_positive])
    eps = forms.JSONField(required=False)
    kernels = forms.JSONField(required=False)
    r = forms.FloatField(validators=[MinValueValidator(3.0)])

    @classmethod
    def defaults(cls):
        return {
            'time_index': 0,
            'n': 32,
            'band': 3,
            'exponent': 1.0 / 3.0,
            'eps': list(settings.LAB['FLUX_EPS']),
            'kernels': ['A', 'B'],
            'r': settings.LAB['FLUX_R'],
        }

    def clean_eps(self):
        eps = _number_list(self.cleaned_data.get('eps'), 'eps', positive=True)
        if eps is None:
            raise forms.ValidationError('eps must list the mollification scales')
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise forms.ValidationError('eps must be strictly decreasing')
        if eps[0] >= 0.25:
            raise forms.ValidationError('mollification scales must lie in (0, 1/4)')
        return eps

    def clean_kernels(self):
        kernels = self.cleaned_data.get('kernels')
        if not isinstance(kernels, list) or not kernels:
            raise forms.ValidationError('kernels must be a non-empty list')
        unknown = [kernel for kernel in kernels if kernel not in KERNELS]
        if unknown:
            raise forms.ValidationError(f'unknown kernels {unknown}; choose from {sorted(KERNELS)}')
        if len(set(kernels)) != len(kernels):
            raise forms.ValidationError('kernels must be distinct')
        return kernels

    def clean(self):
        cleaned = super().clean()
        if bool(cleaned.get('input')) == bool(cleaned.get('synthetic')):
            raise forms.ValidationError('give exactly one of input (a PFLD path) and synthetic')
        if cleaned.get('n') is not None and cleaned['n'] % 2:
            self.add_error('n', 'grid sizes must be even')
        return cleaned


class MikadoCheckConfigForm(RunConfigForm):
    SCHEMA = 'onsager-lab/mikado-check@1'

    r0 = forms.FloatField(required=False, validators=[_positive])
    profile = forms.IntegerField(validators=[MinValueValidator(2)])
    profile_grid = forms.IntegerField(validators=[MinValueValidator(16)])
    Pi = forms.IntegerField()
    n = forms.IntegerField(validators=[MinValueValidator(8)])
    potentials = forms.BooleanField(required=False)
    transport_steps = forms.IntegerField(validators=[MinValueValidator(0)])
    flow_amplitude = forms.FloatField()
    dt = forms.FloatField(validators=[_positive])

    @classmethod
    def defaults(cls):
        return {
            'profile': 4,
            'profile_grid': settings.LAB['PROFILE_GRID'],
            'Pi': 2,
            'n': 32,
            'potentials': True,
            'transport_steps': 0,
            'flow_amplitude': 0.0,
            'dt': 0.002,
        }


FORMS = {form.SCHEMA: form for form in (IterateConfigForm, BuildStepConfigForm, FluxConfigForm, MikadoCheckConfigForm)}


def load_config(path, form_class, overrides=None):
    """Read and validate the JSON config at ``path``; returns the bound, valid form."""
    try:
        document = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigSchemaError(f'{path}: cannot read config: {exc}') from None
    if not isinstance(document, dict):
        raise ConfigSchemaError(f'{path}: a config must be a JSON object')
    form = form_class({**document, **(overrides or {})})
    if not form.is_valid():
        details = '; '.join(
            f'{name}: {" ".join(messages)}' if name != '__all__' else ' '.join(messages)
            for name, messages in form.errors.items()
        )
        raise ConfigSchemaError(f'{path}: schema {form_class.SCHEMA} violated: {details}', form.errors)
    return form

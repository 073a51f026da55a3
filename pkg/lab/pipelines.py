"""
The work behind each lab command.

Every ``run_*`` function takes a validated config form, the output directory
and the RunManifest of the run. It writes its artifacts, appends them to the
manifest and returns the named invariant checks.
"""

import logging
from pathlib import Path

import numpy as np
from django.conf import settings

from divsolve.parametrix import decay_slope, identity_defect, parametrix
from fields.exceptions import FieldFormatError
from fields.grid import Grid, PeriodicField, Rank
from fields.operators import isotropic, mollify, pressure_solve
from fields.pfld import read_fields, write_fields
from fields.state import EulerReynoldsState, euler_reynolds_residual
from fields.synthetic import band_limited_random_field, cellular_flow
from flux.lacunary import lacunary_field
from flux.reports import Verdict, flux_report
from mikado.amplitudes import TimeCutoff, cancellation_residual, choose_pressure, solve_amplitudes
from mikado.decomposition import decompose_errors, new_flow
from mikado.geometry import (
    TUBE_KEYS, build_potentials, build_tube_family, parallel_mikado_field, steady_mikado_field,
)
from mikado.partition import build_partition
from mikado.transport import advect_frame
from mikado.waves import assemble_waves, correction_slope, mollification_requirement
from params.analysis import calibrate_initial_stress
from params.holder import closed_form_b, minimize_closed_form, optimal_gamma
from params.levels import IterationTrace, run_iteration
from params.reports import iteration_summary
from params.sums import time_support_radius

from .artifacts import write_csv, write_json


logger = logging.getLogger(__name__)

KEY_RULE_TOLERANCE = 1e-10
DIVERGENCE_TOLERANCE = 1e-9
PARTITION_DRIFT = 1e-6
MOMENT_TOLERANCE = 1e-12
NORMALIZATION_TOLERANCE = 1e-10
POTENTIAL_TOLERANCE = 1e-10
PARAMETRIX_TOLERANCE = 1e-9
SLOPE_TOLERANCE = 0.15

FLUX_COLUMNS = ('eps', 'kernel', 'flux', 'density_norm', 'stress_sup', 'holder_lhs', 'holder_rhs')
STEP_COLUMNS = (
    't', 'energy', 'pressure_sup', 'cancellation', 'divergence', 'disjointness', 'orthogonality',
    'expansion_gap', 'correction_ratio', 'R_M', 'R_S', 'R_T', 'R_H', 'R_H_reduced',
)
TUBE_COLUMNS = ('direction', 'parity', 'base', 'support_points', 'mean', 'mean_square')


def _emit(manifest, path, writer, *args):
    writer(path, *args)
    manifest.output_paths = list(manifest.output_paths) + [str(path)]
    return path


def run_iterate(form, out_dir, manifest):
    data = form.cleaned_data
    config = form.iteration_config()
    calibrated = None
    if data['calibrate']:
        calibrated = calibrate_initial_stress(config)
        config = config.replace(log_er_init=calibrated)
    trace = run_iteration(config)

    summary = iteration_summary(trace, calibrated_log_er=calibrated)
    summary['b_target'] = closed_form_b(optimal_gamma(config.a_exp), config.a_exp)
    if data.get('gamma_grid'):
        summary['gamma_grid_minimizer'] = minimize_closed_form(config.a_exp, data['gamma_grid'])

    support = time_support_radius(trace)
    rows = ({**row, 'time_support': float(radius)} for row, radius in zip(trace.rows(), support))
    _emit(manifest, Path(out_dir) / 'trace.csv', write_csv, rows, IterationTrace.COLUMNS + ('time_support',))
    _emit(manifest, Path(out_dir) / 'summary.json', write_json, summary)

    residual = summary['key_rule_max_relative_residual']
    checks = {'key_rule': residual is not None and residual < KEY_RULE_TOLERANCE}
    if config.gain.mode != 'balanced':
        checks['shrinking'] = not summary['shrinking_violations']
    manifest.tolerances = {**manifest.tolerances, 'key_rule': KEY_RULE_TOLERANCE}
    return checks


def synthetic_state(data, grid, seed):
    """
    v = 0 or a cellular flow, R = -c (1 + cos cos cos / 2) Id plus an optional
    seeded perturbation, and the pressure solving the divergence constraint.
    """
    x1, x2, x3 = grid.coordinates()
    bump = 1.0 + 0.5 * np.cos(2 * np.pi * x1) * np.cos(2 * np.pi * x2) * np.cos(2 * np.pi * x3)
    stress = isotropic(PeriodicField(grid, Rank.SCALAR, -data['stress_amplitude'] * bump))
    if data['perturbation']:
        stress = stress + band_limited_random_field(grid, Rank.SYM2, 2, seed) * data['perturbation']
    if data['velocity'] == 'cellular':
        velocity = cellular_flow(grid, data['velocity_amplitude'])
    else:
        velocity = PeriodicField.zeros(grid, Rank.VECTOR)
    return velocity, pressure_solve(velocity, stress), stress


def _sweep_frequencies(frequency):
    return sorted({max(1, frequency // 4), max(1, frequency // 2), frequency})


def run_build_step(form, out_dir, manifest):
    data = form.cleaned_data
    out_dir = Path(out_dir)
    grid = Grid(data['n'])
    tubes = build_tube_family(data.get('r0'), grid=Grid(data['profile_grid']))
    velocity, pressure, stress = synthetic_state(data, grid, manifest.seed)
    mollified_velocity = mollify(velocity, data['eps'])
    mollified_stress = mollify(stress, data['eps'])

    frame = advect_frame(mollified_velocity, 0.0, data['samples'] - 1, data['dt'], build_partition(data['Pi'], grid))
    state = EulerReynoldsState.steady(velocity, pressure, stress, frame.times)
    middle = len(frame) // 2
    cutoff = TimeCutoff(float(frame.times[middle]), data['theta']) if data.get('theta') else None
    energies = [data['energy'] * (float(cutoff.value(t)) if cutoff else 1.0) for t in frame.times]

    amplitudes = []
    for frame_map, energy in zip(frame.maps, energies):
        step_pressure = choose_pressure(mollified_stress, frame_map, energy)
        amplitudes.append(solve_amplitudes(mollified_stress, step_pressure, frame_map, energy))
    assemblies = [
        assemble_waves(tubes, frame, solved, data['frequency'], index=index)
        for index, solved in enumerate(amplitudes)
    ]
    corrected, decompositions = new_flow(state, mollified_velocity, mollified_stress, assemblies, amplitudes)

    rows = []
    for index, (assembly, solved, decomposition) in enumerate(zip(assemblies, amplitudes, decompositions)):
        norms = decomposition.norms()
        rows.append({
            't': float(frame.times[index]),
            'energy': energies[index],
            'pressure_sup': solved.pressure.sup_norm(),
            'cancellation': cancellation_residual(solved, mollified_stress),
            'divergence': assembly.divergence_defect(),
            'disjointness': assembly.disjointness_defect,
            'orthogonality': assembly.orthogonality_defect,
            'expansion_gap': assembly.expansion_gap(),
            'correction_ratio': assembly.correction_ratio(),
            **{name: norms[name] for name in ('R_M', 'R_S', 'R_T', 'R_H', 'R_H_reduced')},
        })

    before, after = euler_reynolds_residual(state), euler_reynolds_residual(corrected)
    scale = max(assemblies[middle].velocity.sup_norm() ** 2 * grid.n, 1.0)
    checks = {
        'cancellation': max(row['cancellation'] for row in rows) < settings.LAB['CANCELLATION_TOLERANCE'],
        'divergence': max(row['divergence'] for row in rows) < DIVERGENCE_TOLERANCE,
        'disjointness': all(row['disjointness'] == 0.0 for row in rows),
        'partition': frame.partition_defect() < PARTITION_DRIFT,
        'residual': after <= before + DIVERGENCE_TOLERANCE * scale,
    }
    summary = {
        'frequency': data['frequency'],
        'r0': tubes.r0,
        'times': frame.times,
        'determinant_range': frame.determinant_range(),
        'residual_before': before,
        'residual_after': after,
        'mollification_requirement': mollification_requirement(
            velocity, mollified_velocity, assemblies[middle],
            data['e_v'], data['e_r'], data['big_n'], data['log_xihat'],
        ),
        'correction_bound': assemblies[middle].correction_bound(),
    }

    order = data['parametrix_order']
    if order or data['sweep']:
        sources = decompose_errors(
            state, middle, mollified_velocity, mollified_stress, assemblies, amplitudes[middle],
            tubes=tubes, frame=frame, max_modes=data['source_modes'],
        )
        oscillatory = [s for s in sources.high_sources + sources.transport_sources if s.amplitude.sup_norm() > 0]
        summary['sources'] = len(oscillatory)
        if order:
            results = [(source, parametrix(source, order)) for source in oscillatory]
            defect = max((identity_defect(source, result) for source, result in results), default=0.0)
            summary['parametrix'] = {
                'order': order,
                'identity_defect': defect,
                'remainder_sup': max((result.remainder.sup_norm() for _, result in results), default=0.0),
            }
            checks['parametrix_identity'] = defect < PARAMETRIX_TOLERANCE
        if data['sweep']:
            slope = correction_slope(assemblies[middle])
            summary['correction_slope'] = slope
            checks['correction_slope'] = abs(slope + 1.0) <= SLOPE_TOLERANCE
            if order and oscillatory:
                decay, norms = decay_slope(oscillatory[0], order, _sweep_frequencies(data['frequency']))
                summary['remainder_slope'] = {'order': order, 'slope': decay, 'norms': norms}

    _emit(manifest, out_dir / 'velocity.pfld', write_fields, corrected.velocity)
    _emit(manifest, out_dir / 'pressure.pfld', write_fields, corrected.pressure)
    _emit(manifest, out_dir / 'stress.pfld', write_fields, corrected.stress)
    _emit(manifest, out_dir / 'correction.pfld', write_fields, [assembly.velocity for assembly in assemblies])
    for name, attribute in (
        ('stress_mollification', 'mollification'), ('stress_transport', 'transport'),
        ('stress_oscillation', 'stress'), ('stress_high', 'high'),
    ):
        pieces = [getattr(decomposition, attribute) for decomposition in decompositions]
        _emit(manifest, out_dir / f'{name}.pfld', write_fields, pieces)
    _emit(manifest, out_dir / 'residuals.csv', write_csv, rows, STEP_COLUMNS)
    _emit(manifest, out_dir / 'summary.json', write_json, {**summary, 'checks': checks})

    manifest.tolerances = {
        **manifest.tolerances,
        'cancellation': settings.LAB['CANCELLATION_TOLERANCE'],
        'divergence': DIVERGENCE_TOLERANCE,
        'partition': PARTITION_DRIFT,
    }
    return checks


def flux_input(data, seed):
    """The vector field a flux run analyses, read from PFLD or built from its name."""
    if data.get('input'):
        path = Path(data['input'])
        snapshots = read_fields(path)
        index = data['time_index']
        if index >= len(snapshots):
            raise FieldFormatError(f'{path}: no time sample {index}, the file holds {len(snapshots)}')
        if snapshots[index].rank is not Rank.VECTOR:
            raise FieldFormatError(f'{path}: flux diagnostics need a vector field, got {snapshots[index].rank.value}')
        return snapshots[index]

    grid = Grid(data['n'])
    name = data['synthetic']
    if name == 'random':
        return band_limited_random_field(grid, Rank.VECTOR, data['band'], seed, solenoidal=True)
    if name == 'shear':
        x2 = grid.coordinates()[1]
        return PeriodicField(grid, Rank.VECTOR, np.stack([np.sin(2 * np.pi * x2), 0 * x2, 0 * x2]))
    if name == 'lacunary':
        return lacunary_field(grid, data['exponent'], seed)
    tubes = build_tube_family(grid=grid)
    if name == 'mikado':
        return steady_mikado_field(tubes, grid)
    return parallel_mikado_field(tubes, grid)


def run_flux(form, out_dir, manifest):
    data = form.cleaned_data
    out_dir = Path(out_dir)
    if data.get('input'):
        manifest.input_paths = list(manifest.input_paths) + [str(data['input'])]
    velocity = flux_input(data, manifest.seed)
    report = flux_report(velocity, data['eps'], tuple(data['kernels']), data['r'])

    summary = report.summary()
    summary['source'] = Path(data['input']).name if data.get('input') else data['synthetic']
    _emit(manifest, out_dir / 'flux.csv', write_csv, report.rows(), FLUX_COLUMNS)
    _emit(manifest, out_dir / 'flux.json', write_json, summary)

    checks = {'holder_chain': summary['holder_chain_holds']}
    if report.independence is not None:
        checks['kernel_independence'] = report.independence.verdict is not Verdict.FAIL
    manifest.tolerances = {
        **manifest.tolerances,
        'flux': settings.LAB['FLUX_TOLERANCE'],
        'convergence': settings.LAB['FLUX_CONVERGENCE'],
    }
    return checks


def run_mikado_check(form, out_dir, manifest):
    data = form.cleaned_data
    out_dir = Path(out_dir)
    profile_grid = Grid(data['profile_grid'])
    tubes = build_tube_family(data.get('r0'), data['profile'], grid=profile_grid)
    integral, square, potential = tubes.profile.integrals()
    counts = tubes.support_counts()

    rows, worst_mean, worst_square = [], 0.0, 0.0
    for key in TUBE_KEYS:
        psi = tubes.normalized_sample(key)
        mean, mean_square = float(psi.mean()), float(np.mean(psi.samples ** 2))
        worst_mean = max(worst_mean, abs(mean))
        worst_square = max(worst_square, abs(mean_square - 1.0))
        rows.append({
            'direction': ' '.join(str(int(c)) for c in tubes.direction(key)),
            'parity': ''.join(str(c) for c in key[1]),
            'base': ' '.join(repr(float(c)) for c in tubes.base(key)),
            'support_points': counts[key],
            'mean': mean,
            'mean_square': mean_square,
        })

    factor = settings.LAB['TUBE_SEPARATION_FACTOR']
    checks = {
        'separation': tubes.separation > factor * tubes.r0,
        'profile_moments': abs(integral) < MOMENT_TOLERANCE and abs(square - 1.0) < NORMALIZATION_TOLERANCE,
        'normalization': worst_mean < MOMENT_TOLERANCE and worst_square < NORMALIZATION_TOLERANCE,
        'resolution': min(counts.values()) >= settings.LAB['PROFILE_MIN_POINTS'],
    }
    summary = {
        'r0': tubes.r0,
        'profile_power': data['profile'],
        'separation': tubes.separation,
        'closest_pair': [list(key) for key in tubes.closest],
        'integrals': {'psi': integral, 'psi_squared': square, 'potential': potential},
    }

    if data['potentials']:
        residuals = [potentials.residuals() for potentials in build_potentials(tubes)]
        worst = max(max(pair) for pair in residuals)
        summary['potential_residual'] = worst
        checks['potentials'] = worst < POTENTIAL_TOLERANCE

    grid = Grid(data['n'])
    partition = build_partition(data['Pi'], grid)
    summary['partition_members'] = len(partition.members)
    if data['transport_steps']:
        frame = advect_frame(
            cellular_flow(grid, data['flow_amplitude']), 0.0, data['transport_steps'], data['dt'], partition,
        )
        drift = frame.partition_defect()
        summary['determinant_range'] = frame.determinant_range()
    else:
        drift = float(np.max(np.abs(partition.sum_of_squares(grid.coordinates()) - 1.0)))
    summary['partition_drift'] = drift
    checks['partition'] = drift < PARTITION_DRIFT if data['transport_steps'] else drift < 1e-10

    _emit(manifest, out_dir / 'tubes.csv', write_csv, rows, TUBE_COLUMNS)
    _emit(manifest, out_dir / 'geometry.json', write_json, {**summary, 'checks': checks})
    manifest.tolerances = {
        **manifest.tolerances,
        'moments': MOMENT_TOLERANCE,
        'normalization': NORMALIZATION_TOLERANCE,
        'potentials': POTENTIAL_TOLERANCE,
        'partition': PARTITION_DRIFT,
    }
    logger.info('mikado check r0=%g: %s', tubes.r0, ', '.join(f'{k}={v}' for k, v in checks.items()))
    return checks


PIPELINES = {
    'iterate': run_iterate,
    'build_step': run_build_step,
    'flux': run_flux,
    'mikado_check': run_mikado_check,
}

"""
Error terms of the corrected flow (v + V, p + P, R_1) with R_1 = R_M + R_T + R_S + R_H:

    R_M = (v - v_eps) (x) V + V (x) (v - v_eps) + R - R_eps
    R_S = V (x) V - V~ (x) V~
    R_T = div^-1 [ d_t V + d_j (v_eps^j V + V^j v_eps) ]
    R_H = div^-1 [ d_j (sum_J V~_J (x) V~_J + P Id + R_eps) ]

where div^-1 is ``anti_divergence_sym``. The transport and high-frequency
sources are also emitted as oscillatory fields u omega(lam Gamma) for divsolve.
"""

import logging
from dataclasses import dataclass

from divsolve.parametrix import OscillatoryField
from fields.grid import PeriodicField
from fields.operators import anti_divergence_sym, divergence, isotropic, outer, self_outer, symmetrize
from fields.state import EulerReynoldsState

from .exceptions import MikadoError


logger = logging.getLogger(__name__)

DEFAULT_SOURCE_MODES = 64


@dataclass(frozen=True, eq=False)
class ErrorDecomposition:
    mollification: PeriodicField
    stress: PeriodicField
    transport: PeriodicField
    high: PeriodicField
    high_reduced: PeriodicField
    off_diagonal: float
    transport_sources: tuple = ()
    high_sources: tuple = ()

    @property
    def total(self):
        return self.mollification + self.transport + self.stress + self.high

    def norms(self):
        return {
            'R_M': self.mollification.sup_norm(),
            'R_S': self.stress.sup_norm(),
            'R_T': self.transport.sup_norm(),
            'R_H': self.high.sup_norm(),
            'R_H_reduced': self.high_reduced.sup_norm(),
            'off_diagonal': self.off_diagonal,
        }


def _time_derivative(series, index, dt):
    """Centered difference at interior samples, one-sided at the ends."""
    if len(series) < 2:
        raise MikadoError('a time derivative needs at least two samples')
    if index == 0:
        return (series[1] - series[0]) * (1.0 / dt)
    if index == len(series) - 1:
        return (series[-1] - series[-2]) * (1.0 / dt)
    return (series[index + 1] - series[index - 1]) * (0.5 / dt)


def _sources(tubes, assemblies, index, mollified_velocity, frame_map, dt, max_modes):
    assembly = assemblies[index]
    transport, high = [], []
    for position, wave in enumerate(assembly.waves):
        amplitude = wave.amplitude
        psi = tubes.normalized_sample(wave.key)
        oscillation = psi.with_samples(psi.samples ** 2 - 1.0)

        # d_j (a^j a^l) multiplies psi^2 - 1; the derivative falling on the tube vanishes
        u_high = divergence(self_outer(amplitude))
        high.append(OscillatoryField.from_profile(u_high, oscillation, frame_map, wave.frequency, max_modes))

        series = [a.waves[position].amplitude for a in assemblies]
        u_transport = _time_derivative(series, index, dt) + divergence(
            outer(mollified_velocity, amplitude) + outer(amplitude, mollified_velocity)
        )
        transport.append(OscillatoryField.from_profile(u_transport, psi, frame_map, wave.frequency, max_modes))
    return tuple(transport), tuple(high)


def decompose_errors(state, index, mollified_velocity, mollified_stress, assemblies, amplitudes,
                     tubes=None, frame=None, max_modes=DEFAULT_SOURCE_MODES):
    """
    The four error terms at time sample ``index``.

    ``assemblies`` holds one WaveAssembly per time sample of ``state``.
    With ``tubes`` and ``frame`` the transport and reduced high-frequency
    sources are emitted as OscillatoryField lists.
    """
    if len(assemblies) != len(state.times):
        raise MikadoError(f'{len(assemblies)} assemblies for {len(state.times)} time samples')
    velocity, _, stress = state.snapshot(index)
    assembly = assemblies[index]
    V, main = assembly.velocity, assembly.main

    difference = velocity - mollified_velocity
    R_M = symmetrize(outer(difference, V) + outer(V, difference)) + (stress - mollified_stress)
    R_S = self_outer(V) - self_outer(main)

    dt = state.step if len(state.times) > 1 else 0.0
    time_derivative = _time_derivative([a.velocity for a in assemblies], index, dt)
    transported = divergence(outer(mollified_velocity, V) + outer(V, mollified_velocity))
    R_T = anti_divergence_sym(time_derivative + transported)

    cancelled = assembly.main_stress + isotropic(amplitudes.pressure) + mollified_stress
    R_H = anti_divergence_sym(divergence(cancelled))
    R_H_reduced = anti_divergence_sym(divergence(assembly.oscillation_stress))

    if assembly.disjointness_defect != 0.0:
        logger.warning('off-diagonal products do not vanish: %.3e', assembly.disjointness_defect)

    transport_sources, high_sources = (), ()
    if tubes is not None and frame is not None:
        transport_sources, high_sources = _sources(
            tubes, assemblies, index, mollified_velocity, frame.maps[index], dt, max_modes,
        )
    decomposition = ErrorDecomposition(
        mollification=R_M,
        stress=R_S,
        transport=R_T,
        high=R_H,
        high_reduced=R_H_reduced,
        off_diagonal=assembly.disjointness_defect,
        transport_sources=transport_sources,
        high_sources=high_sources,
    )
    logger.info(
        'error terms at t=%.6g: %s', state.times[index],
        ', '.join(f'{name}={value:.3e}' for name, value in decomposition.norms().items()),
    )
    return decomposition


def new_flow(state, mollified_velocity, mollified_stress, assemblies, amplitudes):
    """
    (v + V, p + P, R_M + R_T + R_S + R_H) at every time sample, with the
    decompositions. Its Euler-Reynolds residual equals that of ``state``.
    """
    velocities, pressures, stresses, decompositions = [], [], [], []
    for index in range(len(state.times)):
        velocity, pressure, _ = state.snapshot(index)
        decomposition = decompose_errors(
            state, index, mollified_velocity, mollified_stress, assemblies, amplitudes[index],
        )
        velocities.append(velocity + assemblies[index].velocity)
        pressures.append(pressure + amplitudes[index].pressure)
        stresses.append(decomposition.total)
        decompositions.append(decomposition)
    return EulerReynoldsState(velocities, pressures, stresses, state.times), decompositions


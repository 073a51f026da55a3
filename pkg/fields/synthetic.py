"""Seeded test fields."""

import numpy as np

from .grid import PeriodicField, Rank
from .operators import band_filter, leray_project


def band_limited_random_field(grid, rank, band, seed, solenoidal=False, zero_mean=True):
    """
    Random field with modes |m_i| <= band, reproducible from ``seed``.

    Symmetric and antisymmetric ranks are projected exactly; ``solenoidal``
    applies the Leray projection to a vector field.
    """
    rank = Rank(rank)
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal(rank.component_shape + grid.shape)
    if rank is Rank.SYM2:
        samples = 0.5 * (samples + samples.swapaxes(0, 1))
    elif rank is Rank.ANTISYM2:
        samples = 0.5 * (samples - samples.swapaxes(0, 1))
    field = band_filter(PeriodicField(grid, rank, samples), band)
    if solenoidal:
        field = leray_project(field)
    if zero_mean:
        mean = field.mean().reshape(rank.component_shape + (1, 1, 1))
        field = field.with_samples(field.samples - mean)
    scale = field.sup_norm()
    return field * (1.0 / scale) if scale > 0 else field


def cellular_flow(grid, amplitude):
    """The steady cellular flow a (sin 2 pi x cos 2 pi y, -cos 2 pi x sin 2 pi y, 0)."""
    x, y, _ = grid.coordinates()
    return PeriodicField(grid, Rank.VECTOR, amplitude * np.stack([
        np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y),
        -np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y),
        np.zeros_like(x),
    ]))

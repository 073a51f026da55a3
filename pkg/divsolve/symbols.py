"""
The degree -1 homogeneous symbol that inverts the divergence in symmetric tensors.

    qbar_a^{jl}(p) = -i |p|^-2 (p^j delta_a^l + p^l delta_a^j - p_a p^j p^l |p|^-2)

It is symmetric in (j, l) and satisfies i p_j qbar_a^{jl}(p) = delta_a^l. Arrays
are indexed [a, j, l]. This module only depends on numpy so that the fields app
can use it for the periodic anti-divergence.
"""

import numpy as np

from .exceptions import PhaseError


def qbar_symbol(p):
    """Return qbar_a^{jl}(p) as a complex (3, 3, 3) array for one nonzero 3-vector."""
    p = np.asarray(p, dtype=float)
    if p.shape != (3,):
        raise PhaseError(f'qbar_symbol needs a 3-vector, got shape {p.shape}')
    psq = float(p @ p)
    if psq == 0.0:
        raise PhaseError('qbar_symbol is undefined at p = 0')
    eye = np.eye(3)
    real = (
        np.einsum('j,al->ajl', p, eye)
        + np.einsum('l,aj->ajl', p, eye)
        - p[:, None, None] * np.outer(p, p)[None] / psq
    )
    return -1j * real / psq


def qbar_apply(p, u):
    """
    Contract the symbol with an amplitude field: R^{jl} = qbar_a^{jl}(p) u^a.

    ``p`` has shape (3, ...) and ``u`` shape (3, ...) with matching trailing
    axes; the result has shape (3, 3, ...). Points with p = 0 give zero.
    """
    p = np.asarray(p)
    psq = np.sum(p * p, axis=0)
    inverse = np.zeros(psq.shape)
    np.divide(1.0, psq, out=inverse, where=psq > 0)
    p_dot_u = np.sum(p * u, axis=0)
    pair = p[:, None] * u[None, :]
    real = pair + pair.swapaxes(0, 1) - p[:, None] * p[None, :] * (p_dot_u * inverse)
    return -1j * real * inverse

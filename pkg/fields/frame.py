"""
Back-to-labels maps Gamma(x) = x + d(x) with a periodic displacement d.

The displacement is what the transport step stores; labels are unwrapped, so
Gamma(x + e_i) = Gamma(x) + e_i and exp(2 pi i m . Gamma) is periodic for integer m.
Jacobians are indexed [alpha, a] = d_a Gamma^alpha, the layout of ``gradient``.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import GridError
from .grid import PeriodicField, Rank
from .operators import gradient


@dataclass(frozen=True, eq=False)
class BackToLabelsMap:
    displacement: PeriodicField

    def __post_init__(self):
        if self.displacement.rank is not Rank.VECTOR:
            raise GridError('a back-to-labels displacement must be a vector field')

    @classmethod
    def identity(cls, grid):
        return cls(PeriodicField.zeros(grid, Rank.VECTOR))

    @property
    def grid(self):
        return self.displacement.grid

    def labels(self):
        """Gamma at the grid points, shape (3, n, n, n)."""
        return self.grid.coordinates() + self.displacement.samples

    def jacobian(self):
        return np.eye(3).reshape((3, 3, 1, 1, 1)) + gradient(self.displacement).samples

    def determinant(self):
        return np.linalg.det(np.moveaxis(self.jacobian(), (0, 1), (-2, -1)))

    def inverse_jacobian(self):
        """(grad Gamma)^-1 indexed [a, alpha], so that G^a_alpha d_a Gamma^beta = delta."""
        inverse = np.linalg.inv(np.moveaxis(self.jacobian(), (0, 1), (-2, -1)))
        return np.moveaxis(inverse, (-2, -1), (0, 1))

    def deformation(self):
        """sup |grad Gamma - Id| (Frobenius)."""
        strain = self.jacobian() - np.eye(3).reshape((3, 3, 1, 1, 1))
        return float(np.sqrt(np.max(np.sum(strain ** 2, axis=(0, 1)))))

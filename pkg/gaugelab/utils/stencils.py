"""Finite difference stencils (order of differentiation, points, order of approximation)."""

from __future__ import annotations

import numpy as np

# 4th-order central first derivative, offsets -2..2 (zero weight at the centre).
DERIV1_5P_4O = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0

# 4th-order central second derivative, offsets -2..2.
DERIV2_5P_4O = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0

OFFSETS_5P = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])

for _table in (DERIV1_5P_4O, DERIV2_5P_4O, OFFSETS_5P):
    _table.setflags(write=False)


def nonuniform_first_derivative(nodes: np.ndarray, values: np.ndarray, at: float) -> float:
    """Derivative at ``at`` of the interpolating polynomial through ``(nodes, values)``.

    Five nodes give the 4th-order analogue of the uniform central stencil on
    non-uniform (for example geometric) grids.
    """

    offsets = np.asarray(nodes, dtype=float) - at
    count = offsets.size
    # Solve the Taylor moment system sum_j w_j offsets_j^k = delta_{k1}.
    vander = np.vander(offsets, count, increasing=True).T
    rhs = np.zeros(count)
    rhs[1] = 1.0
    weights = np.linalg.solve(vander, rhs)
    return float(weights @ np.asarray(values, dtype=float))


__all__ = ["DERIV1_5P_4O", "DERIV2_5P_4O", "OFFSETS_5P", "nonuniform_first_derivative"]

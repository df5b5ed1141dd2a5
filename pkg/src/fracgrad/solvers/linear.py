from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument, NumericalFailure
from ..grid import ScalarField, as_field
from ..operator import FracOp

RESIDUAL_FACTOR = 1e-10


def solve_linear(op: FracOp, f) -> ScalarField:
    """Solve A u = f; u >= 0 whenever f >= 0 since A is an M-matrix."""
    f = as_field(op.grid, f)
    if not np.all(np.isfinite(f.values)):
        raise InvalidArgument("right-hand side has non-finite entries")
    u = op.solve_values(f.values)
    res = np.max(np.abs(op.matrix @ u - f.values)) if len(u) else 0.0
    bound = RESIDUAL_FACTOR * max(np.max(np.abs(f.values)), np.finfo(float).tiny)
    if res > bound:
        raise NumericalFailure(f"linear residual {res:.3e} exceeds {bound:.3e}")
    return f.with_values(u)

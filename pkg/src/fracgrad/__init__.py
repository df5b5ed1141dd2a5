"""Discrete fractional Laplacian with gradient absorption on (-1, 1)."""

import os as _os

# BLAS threads must be capped before numpy is first imported
_threads = _os.environ.get("THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"

from .errors import DegenerateInput, FracGradError, InvalidArgument, NumericalFailure, SingularInput  # noqa: E402
from .exponents import ExponentSet, critical_exponents  # noqa: E402
from .grid import Grid, ScalarField, build_grid, truncate  # noqa: E402
from .norms import hardy_ratio, weighted_grad_norm  # noqa: E402
from .operator import FracOp, GradOp, apply_regularized, assemble, gradient  # noqa: E402

__all__ = [
    "DegenerateInput",
    "ExponentSet",
    "FracGradError",
    "FracOp",
    "GradOp",
    "Grid",
    "InvalidArgument",
    "NumericalFailure",
    "ScalarField",
    "SingularInput",
    "apply_regularized",
    "assemble",
    "build_grid",
    "critical_exponents",
    "gradient",
    "hardy_ratio",
    "truncate",
    "weighted_grad_norm",
]

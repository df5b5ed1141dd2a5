"""Gradient norms and the discrete Hardy quotient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, InvalidArgument
from .grid import ScalarField
from .operator import GradOp


def weighted_grad_norm(u: ScalarField, q: float, w_exp: float = 0.0) -> float:
    """( sum_i |Du_i|^q delta_i^(q w_exp) h )^(1/q).

    ``w_exp = 0`` is the plain W^{1,q} seminorm; ``w_exp = 1 - s`` is the
    weighted norm that stays bounded for solutions behaving like delta^s.
    """
    if not q >= 1:
        raise InvalidArgument(f"exponent q must be >= 1, got {q!r}")
    return weighted_grad_integral(u, q, w_exp) ** (1.0 / q)


def weighted_grad_integral(u: ScalarField, q: float, w_exp: float = 0.0) -> float:
    """sum_i |Du_i|^q delta_i^(q w_exp) h, the q-th power of the weighted norm."""
    du = np.abs(GradOp(u.grid).apply_values(u.values))
    grid = u.grid
    integrand = du**q
    if w_exp:
        integrand = integrand * grid.delta ** (q * w_exp)
    return grid.integrate(integrand)


@dataclass(frozen=True)
class HardyQuotient:
    ratio: float
    numerator: float
    denominator: float
    degenerate: bool = False


def hardy_ratio(phi: ScalarField, p: float = 2.0) -> HardyQuotient:
    """int |phi|^p / delta^p  divided by  int |D phi|^p (rectangle rule).

    The zero field gives ratio 0 flagged ``degenerate``; a vanishing gradient
    with a non-zero numerator cannot happen for a field vanishing outside the
    interval, and raises ``DegenerateInput`` if forced.
    """
    if not p > 1:
        raise InvalidArgument(f"Hardy exponent p must be > 1, got {p!r}")
    grid = phi.grid
    num = grid.integrate(np.abs(phi.values) ** p / grid.delta**p)
    den = grid.integrate(np.abs(GradOp(grid).apply_values(phi.values)) ** p)
    if den == 0:
        if num == 0:
            return HardyQuotient(0.0, 0.0, 0.0, degenerate=True)
        raise DegenerateInput("gradient integral vanishes while the Hardy numerator does not")
    return HardyQuotient(num / den, num, den)

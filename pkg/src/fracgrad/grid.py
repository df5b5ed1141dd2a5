"""Uniform grid on the interval (-1, 1) and grid-sampled fields.

Fields store values at interior nodes only; the exterior value is
identically zero, which is the Dirichlet condition of the nonlocal problem.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidArgument


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Interior nodes x_i = -1 + i*h, i = 1..n, with h = 2/(n+1)."""

    n_interior: int
    h: float
    nodes: np.ndarray
    delta: np.ndarray

    @property
    def n(self) -> int:
        return self.n_interior

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "ScalarField":
        return ScalarField(self, np.broadcast_to(func(self.nodes), (self.n_interior,)))

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.n_interior))

    def field(self, values) -> "ScalarField":
        return ScalarField(self, values)

    def integrate(self, values) -> float:
        """Rectangle rule on interior nodes (ascending summation order)."""
        v = np.asarray(values, dtype=np.float64)
        return float(np.sum(v) * self.h)

    def same_as(self, other: "Grid") -> bool:
        return self is other or self.n_interior == other.n_interior


def build_grid(n_interior: int) -> Grid:
    n = int(n_interior)
    if n != n_interior or n < 3:
        raise InvalidArgument(f"n_interior must be an integer >= 3, got {n_interior!r}")
    h = 2.0 / (n + 1)
    i = np.arange(1, n + 1)
    # symmetric construction keeps x[n-1-i] == -x[i] bit-exactly
    nodes = (i - (n + 1) / 2.0) * h
    delta = np.minimum(i, n + 1 - i) * h
    return Grid(n, h, _frozen(nodes), _frozen(delta))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Values at the interior nodes of ``grid``; zero outside (-1, 1)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != (self.grid.n_interior,):
            raise InvalidArgument(
                f"field has shape {v.shape}, grid expects ({self.grid.n_interior},)"
            )
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.grid.n_interior

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)

    def __add__(self, other):
        return self.with_values(self.values + _values(other))

    def __sub__(self, other):
        return self.with_values(self.values - _values(other))

    def __mul__(self, c):
        return self.with_values(self.values * _values(c))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self) else 0.0

    def integral(self) -> float:
        return self.grid.integrate(self.values)


def _values(x):
    return x.values if isinstance(x, ScalarField) else x


def as_field(grid: Grid, obj) -> ScalarField:
    """Coerce an array, scalar or field to a ScalarField on ``grid``."""
    if isinstance(obj, ScalarField):
        if not obj.grid.same_as(grid):
            raise InvalidArgument("field lives on a different grid")
        return obj
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(grid.n_interior, float(arr))
    return ScalarField(grid, arr)


def truncate(u: ScalarField, k: float) -> ScalarField:
    """Pointwise clamp T_k(u) = max(-k, min(k, u))."""
    if not k > 0:
        raise InvalidArgument(f"truncation level must be > 0, got {k!r}")
    return u.with_values(np.clip(u.values, -k, k))

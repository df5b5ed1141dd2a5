"""Text descriptors for data fields: ``const:c``, ``delta:t``, ``absx:t[,c]``, ``bump:c,w[,mass]``, ``file:path``."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .grid import Grid, ScalarField

KINDS = ("const", "delta", "absx", "bump", "file")


def bump_profile(z: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - z^2)) on |z| < 1, peak value 1 at z = 0."""
    z = np.asarray(z, dtype=float)
    inside = np.abs(z) < 1
    out = np.zeros_like(z)
    out[inside] = np.exp(1 - 1 / (1 - z[inside] ** 2))
    return out


def mollified_dirac(grid: Grid, width: float, center: float = 0.0, mass: float = 1.0) -> ScalarField:
    """Bump of half-width ``width`` scaled to discrete mass ``mass`` (sum * h)."""
    vals = bump_profile((grid.nodes - center) / width)
    total = grid.integrate(vals)
    if total <= 0:
        raise InvalidArgument(f"bump of width {width:g} misses every node; refine the grid")
    return grid.field(vals * (mass / total))


def cell_average_power(grid: Grid, t: float, center: float = 0.0) -> np.ndarray:
    """Average of |x - c|^t over each cell [x_i - h/2, x_i + h/2]; needs t > -1."""
    if not t > -1:
        raise InvalidArgument(f"|x-c|^t is not locally integrable for t={t!r}")

    def prim(y):
        return np.sign(y) * np.abs(y) ** (t + 1) / (t + 1)

    lo = grid.nodes - grid.h / 2 - center
    hi = grid.nodes + grid.h / 2 - center
    return (prim(hi) - prim(lo)) / grid.h


@dataclass(frozen=True)
class DataSpec:
    kind: str
    params: tuple = ()
    path: str | None = None

    @classmethod
    def parse(cls, text: str) -> "DataSpec":
        text = text.strip()
        kind, _, rest = text.partition(":")
        kind = kind.strip().lower()
        if kind not in KINDS:
            raise InvalidArgument(f"unknown data kind {kind!r} in {text!r}; expected one of {', '.join(KINDS)}")
        if kind == "file":
            if not rest:
                raise InvalidArgument("file: descriptor needs a path")
            return cls(kind, (), rest.strip())
        try:
            params = tuple(float(v) for v in rest.split(",")) if rest.strip() else ()
        except ValueError:
            raise InvalidArgument(f"non-numeric parameter in {text!r}") from None
        need = {"const": (1, 1), "delta": (1, 1), "absx": (1, 2), "bump": (2, 3)}[kind]
        if not need[0] <= len(params) <= need[1]:
            raise InvalidArgument(f"{kind}: expects {need[0]}..{need[1]} parameters, got {len(params)}")
        if kind == "bump" and not params[1] > 0:
            raise InvalidArgument("bump width must be positive")
        return cls(kind, params)

    def __str__(self):
        if self.kind == "file":
            return f"file:{self.path}"
        return f"{self.kind}:" + ",".join(f"{v:g}" for v in self.params)

    def sample(self, grid: Grid) -> ScalarField:
        x = grid.nodes
        if self.kind == "const":
            return grid.field(np.full(grid.n_interior, self.params[0]))
        if self.kind == "delta":
            return grid.field(grid.delta ** self.params[0])
        if self.kind == "absx":
            center = self.params[1] if len(self.params) > 1 else 0.0
            return grid.field(cell_average_power(grid, self.params[0], center))
        if self.kind == "bump":
            center, width = self.params[:2]
            if len(self.params) == 3:
                return mollified_dirac(grid, width, center, self.params[2])
            return grid.field(bump_profile((x - center) / width))
        return grid.field(read_samples(self.path, grid))


def read_samples(path, grid: Grid) -> np.ndarray:
    """One column with n values, or two columns (x, value) interpolated linearly (zero outside)."""
    p = Path(path)
    try:
        with p.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    except OSError as exc:
        raise InvalidArgument(f"cannot read data file {path}: {exc.strerror}") from None
    try:
        float(rows[0][0])
    except (ValueError, IndexError):
        rows = rows[1:]  # header
    try:
        table = np.array([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise InvalidArgument(f"{path}: {exc}") from None
    if table.ndim != 2 or table.size == 0:
        raise InvalidArgument(f"{path}: no numeric rows")
    if table.shape[1] == 1:
        if len(table) != grid.n_interior:
            raise InvalidArgument(f"{path}: {len(table)} samples for a grid of {grid.n_interior} nodes")
        vals = table[:, 0]
    elif table.shape[1] == 2:
        order = np.argsort(table[:, 0])
        vals = np.interp(grid.nodes, table[order, 0], table[order, 1], left=0.0, right=0.0)
    else:
        raise InvalidArgument(f"{path}: expected 1 or 2 columns, got {table.shape[1]}")
    if not np.all(np.isfinite(vals)):
        raise InvalidArgument(f"{path}: non-finite samples")
    return vals


def sample(spec, grid: Grid) -> ScalarField:
    if isinstance(spec, str):
        spec = DataSpec.parse(spec)
    return spec.sample(grid)

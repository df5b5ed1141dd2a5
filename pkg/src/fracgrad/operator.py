"""Discrete fractional Laplacian with exterior-zero Dirichlet condition.

The operator is the unnormalized one,

    (-Lap)^s u(x) = PV int (u(x) - u(y)) |x - y|^(-1-2s) dy,

without the constant c_{1,s} found in most textbooks.  Values computed here
are therefore larger than the normalized operator by 1/c_{1,s}; for example
(-Lap)^s (1-x^2)_+^s = pi / sin(pi s) on (-1, 1).

Discretization (per node x_i, in the symmetric form over z > 0):

* far field z >= h: the second difference 2u(x) - u(x+z) - u(x-z) is
  replaced by its piecewise-linear interpolant in z and integrated exactly
  against z^(-1-2s);
* near cell 0 < z < h: the second difference is modelled as -D2u(x_i) z^2
  with the three-point D2u, integrated exactly;
* the leading interpolation defect of the far field, h^2 z-periodic and
  proportional to D2u, is integrated exactly as well and moved into the
  near-cell coefficient.  This makes the scheme exact on quadratics and
  second-order consistent away from the boundary.

On a uniform grid the resulting matrix is a symmetric Toeplitz M-matrix; its
diagonal carries the exterior tail, so rows are strictly diagonally dominant.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
from scipy import linalg, sparse

from .errors import InvalidArgument, NumericalFailure
from .exponents import check_order
from .grid import Grid, ScalarField, as_field

DUMP_VERSION = 1
_SERIES_FROM = 8
_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _G(t, s):
    # G'' = t^(-1-2s)
    return t ** (1 - 2 * s) / ((2 * s) * (2 * s - 1))


def _dG(t, s):
    return -(t ** (-2 * s)) / (2 * s)


def _binomial_series(s: float, terms: int = 14) -> np.ndarray:
    """b_k = binom(1-2s, 2k) / ((1-2s)(-2s)) for k = 1..terms."""
    alpha = 1 - 2 * s
    out = np.empty(terms)
    c = 0.5  # binom(alpha, 2) / (alpha (alpha - 1))
    m = 2
    for k in range(terms):
        out[k] = c
        c *= (alpha - m) / (m + 1) * (alpha - m - 1) / (m + 2)
        m += 2
    return out


def hat_weights(s: float, count: int) -> np.ndarray:
    """Integrals of z^(-1-2s) against the unit-spaced hat centred at j.

    Entry j (j = 1..count-1) is int hat_j(t) t^(-1-2s) dt over t >= 1, so
    the j = 1 hat is cut in half.  Entry 0 is unused (set to 0).
    Multiply by h^(-2s) for spacing h.
    """
    s = float(s)
    w = np.zeros(count)
    if count < 2:
        return w
    w[1] = -_dG(1.0, s) + _G(2.0, s) - _G(1.0, s)
    j_closed = np.arange(2, min(count, _SERIES_FROM), dtype=np.float64)
    if j_closed.size:
        w[2 : 2 + j_closed.size] = _G(j_closed + 1, s) - 2 * _G(j_closed, s) + _G(j_closed - 1, s)
    if count > _SERIES_FROM:
        # second difference of t^(1-2s) as an even binomial series in 1/j:
        # no cancellation for large j
        j = np.arange(_SERIES_FROM, count, dtype=np.float64)
        x2 = (1.0 / j) ** 2
        b = _binomial_series(s)
        acc = np.zeros_like(j)
        for bk in b[::-1]:
            acc = acc * x2 + bk
        w[_SERIES_FROM:] = 2 * j ** (1 - 2 * s) * x2 * acc
    return w


def _q_kernel_cells(s: float, j0: int, j1: int) -> float:
    """sum_{j=j0}^{j1-1} int_j^{j+1} (t-j)(j+1-t) t^(-1-2s) dt."""
    if j1 <= j0:
        return 0.0
    tau = 0.5 * (_GL_X + 1)
    wt = 0.5 * _GL_W
    j = np.arange(j0, j1, dtype=np.float64)[:, None]
    vals = (tau * (1 - tau)) * (j + tau) ** (-1 - 2 * s)
    return float(np.sum(vals @ wt))


@lru_cache(maxsize=64)
def _defect_from_one(s: float) -> float:
    J = 4000
    head = _q_kernel_cells(s, 1, J)
    # mean of q is 1/6; next term from its second moment about the midpoint
    tail = (1 / 6) * J ** (-2 * s) / (2 * s) - (1 / 360) * (1 + 2 * s) * J ** (-2 - 2 * s)
    return head + tail


def interpolation_defect(s: float, a: float = 1.0) -> float:
    """C(a) = int_a^inf q(t) t^(-1-2s) dt with q(t) = frac(t)(1 - frac(t)), a >= 1.

    q is the scaled error of piecewise-linear interpolation of t^2 on the
    integer lattice.
    """
    if a < 1:
        raise InvalidArgument("interpolation defect is defined for a >= 1")
    s = float(s)
    total = _defect_from_one(s)
    if a == 1:
        return total
    ja = int(np.floor(a))
    total -= _q_kernel_cells(s, 1, ja)
    # partial cell [ja, a]
    if a > ja:
        t = ja + (a - ja) * 0.5 * (_GL_X + 1)
        f = (t - ja) * (ja + 1 - t) * t ** (-1 - 2 * s)
        total -= float((a - ja) * 0.5 * np.dot(_GL_W, f))
    return total


def near_coefficient(s: float) -> float:
    """Weight of -D2u h^(2-2s) collected from the near cell and the defect."""
    return 1.0 / (2 - 2 * s) - interpolation_defect(s)


@dataclass(frozen=True, eq=False)
class FracOp:
    """Dense matrix A with A @ u ~ (-Lap)^s u at the interior nodes."""

    grid: Grid
    s: float
    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.grid.n_interior

    @cached_property
    def _factor(self):
        try:
            return linalg.cho_factor(self.matrix, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:  # pragma: no cover - M-matrix is SPD
            raise NumericalFailure(f"Cholesky factorization failed: {exc}") from exc

    def apply(self, u) -> ScalarField:
        u = as_field(self.grid, u)
        return u.with_values(self.matrix @ u.values)

    def solve_values(self, rhs: np.ndarray) -> np.ndarray:
        """A^{-1} rhs with one step of iterative refinement."""
        rhs = np.asarray(rhs, dtype=np.float64)
        x = linalg.cho_solve(self._factor, rhs, check_finite=False)
        r = rhs - self.matrix @ x
        x = x + linalg.cho_solve(self._factor, r, check_finite=False)
        if not np.all(np.isfinite(x)):
            raise NumericalFailure("non-finite value in linear solve")
        return x

    def exterior_tail(self) -> np.ndarray:
        """Diagonal excess A_ii - sum_{j != i} |A_ij| per row."""
        off = np.abs(self.matrix).sum(axis=1) - np.abs(np.diag(self.matrix))
        return np.diag(self.matrix) - off


def assemble(grid: Grid, s: float) -> FracOp:
    s = check_order(s)
    n = grid.n_interior
    w = hat_weights(s, n)
    cn = near_coefficient(s)
    col = np.empty(n)
    col[0] = 2 * (1 / (2 * s) + cn)
    col[1:] = -w[1:]
    if n > 1:
        col[1] -= cn
    A = linalg.toeplitz(col) * grid.h ** (-2 * s)
    A.setflags(write=False)
    return FracOp(grid, s, A)


def _exterior_padded(u: np.ndarray) -> np.ndarray:
    return np.concatenate(([0.0], u, [0.0]))


def apply_regularized(op: FracOp, u, index: int, eps: float) -> float:
    """Cut-off operator int_{|z| >= eps} (u(x_i) - u(x_i + z)) |z|^(-1-2s) dz.

    Evaluated on the same piecewise model as ``op`` (linear interpolant plus
    its quadratic defect for |z| >= h, second-difference model below h).
    Increasing as eps decreases when the model difference is positive, and
    equal to (A u)_i in the limit eps -> 0.
    """
    if not eps > 0:
        raise InvalidArgument(f"cut-off eps must be > 0, got {eps!r}")
    grid = op.grid
    u = as_field(grid, u).values
    n, h, s = grid.n_interior, grid.h, op.s
    if not 0 <= index < n:
        raise InvalidArgument(f"node index {index} outside 0..{n - 1}")
    up = _exterior_padded(u)
    I = index + 1  # position in the padded array
    ui = up[I]
    d2h2 = up[I + 1] - 2 * ui + up[I - 1]  # D2u * h^2
    a = eps / h
    scale = h ** (-2 * s)

    total = 0.0
    if a < 1:
        total += -d2h2 * (1 - a ** (2 - 2 * s)) / (2 - 2 * s)
    total += d2h2 * interpolation_defect(s, max(a, 1.0))

    # g_j = 2u_i - u(I+j) - u(I-j), j = 0..J; both neighbours exterior from J on
    J = max(I, n + 1 - I)
    j = np.arange(J + 1)
    right = np.where(I + j <= n + 1, up[np.minimum(I + j, n + 1)], 0.0)
    left = np.where(I - j >= 0, up[np.maximum(I - j, 0)], 0.0)
    g = 2 * ui - right - left

    j0 = max(1, int(np.floor(a)))
    if j0 < J:
        cells = np.arange(j0, J, dtype=np.float64)
        lo = np.maximum(cells, a)
        hi = cells + 1
        gj = g[j0:J]
        slope = g[j0 + 1 : J + 1] - gj
        c0 = gj - cells * slope
        P0 = lambda t: t ** (-2 * s) / (-2 * s)
        P1 = lambda t: t ** (1 - 2 * s) / (1 - 2 * s)
        total += float(np.sum(c0 * (P0(hi) - P0(lo)) + slope * (P1(hi) - P1(lo))))
    total += 2 * ui * max(a, float(J)) ** (-2 * s) / (2 * s)
    return total * scale


@dataclass(frozen=True, eq=False)
class GradOp:
    """Central differences inside, one-sided next to the boundary.

    The two boundary-adjacent nodes use the exterior value 0:
    Du_1 = u_1 / h and Du_n = -u_n / h.
    """

    grid: Grid

    @cached_property
    def matrix(self) -> sparse.csr_matrix:
        n, h = self.grid.n_interior, self.grid.h
        up = np.full(n - 1, 1 / (2 * h))
        lo = np.full(n - 1, -1 / (2 * h))
        main = np.zeros(n)
        up[0] = 0.0
        lo[-1] = 0.0
        main[0] = 1 / h
        main[-1] = -1 / h
        return sparse.diags([lo, main, up], [-1, 0, 1], format="csr")

    def apply_values(self, u: np.ndarray) -> np.ndarray:
        h = self.grid.h
        up = _exterior_padded(np.asarray(u, dtype=np.float64))
        du = (up[2:] - up[:-2]) / (2 * h)
        du[0] = up[1] / h
        du[-1] = -up[-2] / h
        return du

    def __call__(self, u) -> ScalarField:
        u = as_field(self.grid, u)
        return u.with_values(self.apply_values(u.values))


def gradient(u: ScalarField) -> ScalarField:
    return GradOp(u.grid)(u)


def dump_matrix(op: FracOp, path) -> None:
    """Row-major float64 matrix after an int64 header (n, round(s*1e6), version)."""
    n = op.n
    with open(Path(path), "wb") as fh:
        fh.write(struct.pack("<3q", n, int(round(op.s * 1e6)), DUMP_VERSION))
        fh.write(np.ascontiguousarray(op.matrix, dtype="<f8").tobytes(order="C"))


def load_matrix(path) -> tuple[int, float, np.ndarray]:
    raw = Path(path).read_bytes()
    n, s_micro, version = struct.unpack("<3q", raw[:24])
    if version != DUMP_VERSION:
        raise InvalidArgument(f"unsupported matrix dump version {version}")
    mat = np.frombuffer(raw[24:], dtype="<f8")
    if mat.size != n * n:
        raise InvalidArgument(f"dump holds {mat.size} values, header says {n}x{n}")
    return n, s_micro / 1e6, mat.reshape(n, n).copy()

"""Green function of the unnormalized (-Lap)^s on the unit disc and radial Green solves."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import DegenerateInput, InvalidArgument, SingularInput
from .exponents import check_order
from .grid import ScalarField
from .oracles import fractional_laplacian_radial_2d_at_origin

N_DIM = 2


def _profile_integral(r0, s):
    """int_0^r0 t^(s-1) (1+t)^(-1) dt via the regularized incomplete beta function."""
    r0 = np.asarray(r0, dtype=float)
    return math.pi / math.sin(math.pi * s) * special.betainc(s, 1 - s, r0 / (1 + r0))


def _raw_kernel(dist2, a, b, s):
    """|x-y|^(2s-2) * I(r0) with r0 = a b / |x-y|^2, a = 1-|x|^2, b = 1-|y|^2."""
    return dist2 ** (s - 1) * _profile_integral(a * b / dist2, s)


@lru_cache(maxsize=None)
def calibrated_kappa(s: float) -> float:
    """Constant making the kernel invert the unnormalized operator.

    With kappa = 1 the Green potential of f = 1 is U0 (1-r^2)^s; applying the
    operator at the origin to (1-r^2)^s gives L.  kappa = 1 / (U0 L).
    """
    s = check_order(s)
    # U0 = int_B |y|^(2s-2) I((1-|y|^2)/|y|^2) dy, written with x = 0
    integrand = lambda rho: 2 * math.pi * rho ** (2 * s - 1) * float(_profile_integral((1 - rho**2) / rho**2, s))
    u0 = integrate.quad(integrand, 0, 1, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
    lap = fractional_laplacian_radial_2d_at_origin(lambda r: max(1 - r * r, 0.0) ** s, s)
    return 1.0 / (u0 * lap)


def textbook_kappa(s: float) -> float:
    """Classical ball constant Gamma(N/2)/(4^s pi^(N/2) Gamma(s)^2) times C_{2,s}."""
    c_ns = 4**s * special.gamma(1 + s) / (math.pi * abs(special.gamma(-s)))
    return c_ns * special.gamma(1.0) / (4**s * math.pi * special.gamma(s) ** 2)


@dataclass(frozen=True)
class GreenKernel:
    s: float
    kappa: float
    N: int = N_DIM

    def __call__(self, x, y):
        return green_value(x, y, self.s, self.kappa)


def green_kernel(s: float) -> GreenKernel:
    s = check_order(s)
    return GreenKernel(s, calibrated_kappa(s))


def green_value(x, y, s: float, kappa: float | None = None):
    """G(x, y) on the unit disc; x, y are points (..., 2), broadcast together."""
    s = check_order(s)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != 2 or y.shape[-1] != 2:
        raise InvalidArgument("points must have 2 coordinates")
    a = 1 - np.sum(x * x, axis=-1)
    b = 1 - np.sum(y * y, axis=-1)
    if np.any(a <= 0) or np.any(b <= 0):
        raise InvalidArgument("points must lie in the open unit disc")
    d2 = np.sum((x - y) ** 2, axis=-1)
    if np.any(d2 == 0):
        raise SingularInput("G(x, y) is singular at x = y")
    k = calibrated_kappa(s) if kappa is None else kappa
    out = k * _raw_kernel(d2, a, b, s)
    return float(out) if out.ndim == 0 else out


def comparability_ratios(s: float, count: int = 10_000, seed: int = 0) -> np.ndarray:
    """G(x,y) / [ |x-y|^(2s-2) (d(x)^s/|x-y|^s ^ 1) (d(y)^s/|x-y|^s ^ 1) ] for random pairs.

    Radii and angles are drawn uniformly, which puts more points near the
    boundary than area sampling does; the extremes of the ratio live there, so
    the recorded band settles with fewer pairs. d = 1 - |.| is the boundary
    distance.
    """
    rng = np.random.default_rng(seed)
    rad = rng.uniform(0, 1, (2, count))
    ang = rng.uniform(0, 2 * np.pi, (2, count))
    pts = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=-1)
    x, y = pts[0], pts[1]
    d = np.sqrt(np.sum((x - y) ** 2, axis=-1))
    g = green_value(x, y, s)
    dx, dy = 1 - rad[0], 1 - rad[1]
    ref = d ** (2 * s - 2) * np.minimum(dx**s / d**s, 1) * np.minimum(dy**s / d**s, 1)
    return g / ref


@dataclass(frozen=True)
class RadialProfile:
    r: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.shape != v.shape or r.ndim != 1:
            raise InvalidArgument("radii and values must be 1-D arrays of equal length")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", v)

    @property
    def delta(self) -> np.ndarray:
        return 1 - self.r

    def __call__(self, rho):
        return np.interp(rho, self.r, self.values)


def _radial_callable(f):
    if isinstance(f, RadialProfile):
        return f
    if callable(f):
        return f
    c = float(f)
    return lambda rho: np.full(np.shape(rho), c)


def _angle_panels(r: float, n_per: int):
    """Gauss-Legendre nodes on [0, pi], panels graded geometrically toward 0 at scale 1-r."""
    scale = max(1 - r, 1e-3)
    edges = [0.0]
    e = scale / 4
    while e < math.pi / 2:
        edges.append(e)
        e *= 2
    edges.append(math.pi)
    xg, wg = special.roots_legendre(n_per)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(a + (b - a) * (xg + 1) / 2)
        weights.append(wg * (b - a) / 2)
    return np.concatenate(nodes), np.concatenate(weights)


def green_solve_radial(f, s: float, n_r: int = 100, r=None, n_t: int = 48, n_phi: int = 24) -> RadialProfile:
    """u(r) = int_B G(x, y) f(|y|) dy at x = (r, 0).

    Polar coordinates centred at x: y = x + t (cos phi, sin phi).  The radial
    Gauss-Jacobi rule absorbs the t^(2s-1) singularity at y = x and the
    (T - t)^s decay at the far boundary; the angle uses graded Gauss panels.
    ``r`` defaults to n_r equispaced radii i / n_r, i = 0..n_r-1.
    """
    s = check_order(s)
    fun = _radial_callable(f)
    radii = np.arange(n_r) / n_r if r is None else np.asarray(r, dtype=float)
    if np.any(radii < 0) or np.any(radii >= 1):
        raise InvalidArgument("radii must lie in [0, 1)")
    probe = np.asarray(fun(np.linspace(0, 1, 257)), dtype=float)
    if not np.all(np.isfinite(probe)):
        raise InvalidArgument("radial data has non-finite samples")
    kappa = calibrated_kappa(s)
    xj, wj = special.roots_jacobi(n_t, s, 2 * s - 1)
    out = np.empty(len(radii))
    for i, rr in enumerate(radii):
        phi, wphi = _angle_panels(rr, n_phi)
        cphi = np.cos(phi)[:, None]
        T = -rr * cphi + np.sqrt(1 - rr * rr * (1 - cphi**2))
        t = T * (1 + xj[None, :]) / 2
        y2 = rr * rr + 2 * rr * t * cphi + t * t
        b = np.maximum(1 - y2, 0.0)
        a = 1 - rr * rr
        # G dy = kappa t^(2s-2) I(a b / t^2) t dt dphi; Jacobi weight (1-xi)^s (1+xi)^(2s-1)
        body = _profile_integral(a * b / (t * t), s) * np.asarray(fun(np.sqrt(y2)), dtype=float)
        radial = (T[:, 0] / 2) ** (2 * s) * np.sum(body * (wj / (1 - xj) ** s)[None, :], axis=1)
        out[i] = kappa * 2 * np.sum(radial * wphi)
    return RadialProfile(radii, out)


def boundary_exponent_fit(u, fraction: float = 0.1, skip: int = 2) -> float:
    """Least-squares slope of log u against log delta near the boundary.

    Uses the ``fraction`` of nodes closest to the boundary, dropping the
    ``skip`` closest on each side.  Accepts a ScalarField on the interval or
    a RadialProfile on the disc.
    """
    if isinstance(u, RadialProfile):
        delta, vals = u.delta, u.values
        order = np.argsort(delta, kind="stable")
        take = max(int(round(fraction * len(vals))), skip + 2)
        idx = order[skip:take]
    elif isinstance(u, ScalarField):
        delta, vals = u.grid.delta, u.values
        n = len(vals)
        per_side = max(int(round(fraction * n / 2)), skip + 2)
        left = np.arange(skip, per_side)
        idx = np.concatenate([left, n - 1 - left])
    else:
        raise InvalidArgument("expected a ScalarField or RadialProfile")
    if np.any(vals[idx] <= 0):
        raise DegenerateInput("u must be positive in the fit window")
    slope = np.polyfit(np.log(delta[idx]), np.log(vals[idx]), 1)[0]
    return float(slope)

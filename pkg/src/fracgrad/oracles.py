"""Adaptive-quadrature reference values for the unnormalized fractional Laplacian.

These work directly on callables and never touch the assembled matrix, so
they serve as independent checks of the discrete operator.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .exponents import check_order

_QUAD = dict(epsabs=1e-13, epsrel=1e-11, limit=400)


def _second_derivative(w, x: float, t: float = 1e-3) -> float:
    return (w(x + t) - 2 * w(x) + w(x - t)) / t**2


def fractional_laplacian_1d(w, x: float, s: float, eps: float = 0.0, breaks=(-1.0, 1.0)) -> float:
    """int_{|z| >= eps} (w(x) - w(x+z)) |z|^(-1-2s) dz for w vanishing outside (-1, 1).

    ``eps = 0`` gives the principal value.  The small-z region below
    ``1e-3 * dist(x, breaks)`` is integrated from a finite-difference estimate
    of w''(x); the rest by adaptive Gauss-Kronrod with breakpoints where the
    symmetric difference loses smoothness.
    """
    s = check_order(s)
    w0 = float(w(x))
    kinks = sorted({abs(b - x) for b in breaks if abs(b - x) > 0})
    reach = max(kinks)
    z0 = 1e-3 * min(kinks)

    total = 0.0
    lo = eps
    if eps < z0:
        d2 = _second_derivative(w, x, min(1e-3, 0.5 * min(kinks)))
        total += -d2 * (z0 ** (2 - 2 * s) - eps ** (2 - 2 * s)) / (2 - 2 * s)
        lo = z0

    def integrand(z):
        return (2 * w0 - float(w(x + z)) - float(w(x - z))) * z ** (-1 - 2 * s)

    pts = [lo] + [k for k in kinks if k > lo]
    for a, b in zip(pts[:-1], pts[1:]):
        total += integrate.quad(integrand, a, b, **_QUAD)[0]
    # beyond every break the function is zero on both sides
    total += 2 * w0 * max(reach, lo) ** (-2 * s) / (2 * s)
    return total


def fractional_laplacian_radial_2d_at_origin(w, s: float) -> float:
    """(-Lap)^s of a radial profile w(r) at the origin of R^2, w = 0 for r >= 1.

    In polar coordinates the defining integral is
    2 pi int_0^inf (w(0) - w(r)) r^(-1-2s) dr.
    """
    s = check_order(s)
    w0 = float(w(0.0))
    z0 = 1e-3
    # w(r) - w(0) ~ w''(0) r^2 / 2 for a smooth even profile
    d2 = (w(z0) - w0) * 2 / z0**2
    near = -0.5 * d2 * z0 ** (2 - 2 * s) / (2 - 2 * s)
    mid = integrate.quad(lambda r: (w0 - float(w(r))) * r ** (-1 - 2 * s), z0, 1.0, **_QUAD)[0]
    tail = w0 / (2 * s)
    return 2 * math.pi * (near + mid + tail)


def torsion_constant(s: float) -> float:
    """Value of (-Lap)^s (1-x^2)_+^s on (-1, 1) for the unnormalized kernel.

    Computed by quadrature at the midpoint; the profile makes the operator
    constant on the interval.
    """
    return fractional_laplacian_1d(lambda x: np.maximum(1 - np.asarray(x) ** 2, 0.0) ** s, 0.0, s)

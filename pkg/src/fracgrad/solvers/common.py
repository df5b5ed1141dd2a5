"""Pieces shared by the nonlinear solvers."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument, NumericalFailure


def saturate(t: np.ndarray, n_reg: float) -> np.ndarray:
    """t / (1 + t / n_reg) for t >= 0, equal to n_reg where t overflows."""
    if np.isinf(n_reg):
        return t
    with np.errstate(over="ignore", invalid="ignore"):
        out = t / (1.0 + t / n_reg)
    return np.where(np.isinf(t), n_reg, out)


def absorption(du: np.ndarray, p: float, n_reg: float = np.inf) -> np.ndarray:
    """g_n(|Du|) = |Du|^p / (1 + |Du|^p / n); n = inf gives |Du|^p."""
    with np.errstate(over="ignore"):
        tp = np.abs(du) ** p
    return saturate(tp, n_reg)


def absorption_derivative(du: np.ndarray, p: float, n_reg: float = np.inf, mu: float = 0.0) -> np.ndarray:
    """d/d(Du) of the (smoothed) absorption, elementwise; 0 where Du = mu = 0."""
    r = np.sqrt(du * du + mu * mu)
    tp = r**p
    safe = np.where(r > 0, r, 1.0)
    dtp = np.where(r > 0, p * safe ** (p - 1) * du / safe, 0.0)
    if np.isinf(n_reg):
        return dtp
    return dtp / (1.0 + tp / n_reg) ** 2


def check_damping(theta: float) -> float:
    if not 0 < theta <= 1:
        raise InvalidArgument(f"damping must lie in (0, 1], got {theta!r}")
    return float(theta)


def check_finite(v: np.ndarray, what: str = "iterate") -> None:
    if not np.all(np.isfinite(v)):
        raise NumericalFailure(f"non-finite values in {what}")


def damped_picard(step, u0: np.ndarray, theta: float, tol: float, max_iter: int, max_halvings: int = 6):
    """Iterate u <- (1-theta) u + theta step(u) until the sup-norm update is <= tol.

    ``theta`` is halved whenever the update grows, at most ``max_halvings``
    times.  Returns (u, update history, converged, final theta).
    """
    u = np.array(u0, dtype=float)
    history = []
    prev = np.inf
    halvings = 0
    for _ in range(max_iter):
        new = (1 - theta) * u + theta * step(u)
        check_finite(new)
        upd = float(np.max(np.abs(new - u))) if len(u) else 0.0
        history.append(upd)
        u = new
        if upd <= tol:
            return u, history, True, theta
        if upd > prev and halvings < max_halvings:
            theta *= 0.5
            halvings += 1
        prev = upd
    return u, history, False, theta

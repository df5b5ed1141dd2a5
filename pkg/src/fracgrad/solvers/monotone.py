"""Truncation / saturation schemes: the regularized problem and its double loops."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument, NumericalFailure
from ..grid import as_field, truncate
from ..norms import weighted_grad_norm
from ..operator import FracOp, GradOp
from .common import absorption, check_damping, damped_picard, saturate
from .newton import newton_core
from .report import SolveReport


@dataclass(frozen=True)
class MonotoneSchedule:
    """Stopping rules for the k (truncation) and n (saturation) loops.

    k runs 1, 2, ..., k_max, or 1, k_factor, k_factor^2, ... when
    ``k_factor > 1``.  n runs geometrically from ``n_start``; the outer loop
    stops on stagnation but never before ``n_min_steps`` values.
    """

    k_max: int = 50
    k_factor: float = 0.0
    n_start: float = 2.0
    n_factor: float = 2.0
    n_max: float = 2.0**48
    n_min_steps: int = 8
    tol_inner: float = 1e-8
    tol_outer: float = 1e-6
    picard_tol: float | None = None
    damping: float = 0.5
    max_iter: int = 500

    def __post_init__(self):
        if self.k_max < 1:
            raise InvalidArgument("k_max must be >= 1")
        if not (self.n_start >= 1 and self.n_factor > 1):
            raise InvalidArgument("need n_start >= 1 and n_factor > 1")
        if not (self.tol_inner > 0 and self.tol_outer > 0):
            raise InvalidArgument("tolerances must be positive")
        check_damping(self.damping)

    @property
    def solve_tol(self) -> float:
        if self.picard_tol is not None:
            return self.picard_tol
        return 1e-3 * min(self.tol_inner, self.tol_outer)

    def k_values(self):
        if self.k_factor > 1:
            k = 1.0
            while k < self.k_max:
                yield k
                k *= self.k_factor
            yield float(self.k_max)
        else:
            yield from (float(k) for k in range(1, self.k_max + 1))

    def n_values(self):
        n = self.n_start
        while n <= self.n_max:
            yield n
            n *= self.n_factor


def _check_regularized_args(p, n_reg, k_trunc, damping):
    if not p >= 1:
        raise InvalidArgument(f"p must be >= 1, got {p!r}")
    if not n_reg >= 1:
        raise InvalidArgument(f"regularization index must be >= 1, got {n_reg!r}")
    if not k_trunc > 0:
        raise InvalidArgument(f"truncation level must be > 0, got {k_trunc!r}")
    check_damping(damping)


def _picard(op, rhs, p, n_reg, damping, tol, max_iter, u0):
    D = GradOp(op.grid)

    def step(u):
        return op.solve_values(rhs - absorption(D.apply_values(u), p, n_reg))

    start = np.zeros(op.n) if u0 is None else u0
    u, hist, _, _ = damped_picard(step, start, damping, tol, max_iter)
    return u, hist


def _residual(op, u, rhs, p, n_abs, reaction=None):
    b = rhs - absorption(GradOp(op.grid).apply_values(u), p, n_abs)
    if reaction is not None:
        lam, gr, nr = reaction
        b = b + lam * gr * saturate(np.maximum(u, 0.0), nr)
    return float(np.max(np.abs(op.matrix @ u - b))) if len(u) else 0.0


def solve_regularized(
    op: FracOp,
    f_data,
    n_reg: float,
    k_trunc: float,
    p: float,
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 500,
    u0=None,
) -> SolveReport:
    """Damped Picard for A u + g_n(|Du|) = T_k f with g_n(t) = t^p / (1 + t^p / n)."""
    _check_regularized_args(p, n_reg, k_trunc, damping)
    f = as_field(op.grid, f_data)
    rhs = truncate(f, k_trunc).values
    start = None if u0 is None else as_field(op.grid, u0).values
    u, hist = _picard(op, rhs, p, n_reg, damping, tol, max_iter, start)
    ok = bool(hist) and hist[-1] <= tol
    return SolveReport(
        scheme="regularized",
        final=f.with_values(u),
        converged=ok,
        reason="tolerance" if ok else "max-iter",
        iterates_outer=1,
        iterates_inner=len(hist),
        residual_history=hist,
        equation_residual=_residual(op, u, rhs, p, n_reg),
        tol=tol,
        extras={"n_reg": n_reg, "k_trunc": k_trunc, "damping": damping},
    )


def _reaction_solve(op, rhs, p, react, u0, tol, sched):
    """Newton from the warm start; damped Picard then Newton if that leaves the positive cone."""
    u, upd, _, ok = newton_core(op, rhs, p, reaction=react, u0=u0, step_tol=tol, max_iter=sched.max_iter)
    count = len(upd)
    floor = -tol * max(1.0, float(np.max(np.abs(u))))
    if ok and np.min(u) >= floor:
        return u, count, True
    lam, gr, nr = react
    D = GradOp(op.grid)

    def step(v):
        b = rhs + lam * gr * saturate(np.maximum(v, 0.0), nr) - absorption(D.apply_values(v), p)
        return op.solve_values(b)

    try:
        v, hist, _, _ = damped_picard(step, u0, sched.damping, tol, sched.max_iter)
    except NumericalFailure:
        return u, count, False
    u, upd, _, ok = newton_core(op, rhs, p, reaction=react, u0=v, step_tol=tol, max_iter=sched.max_iter)
    ok = ok and np.min(u) >= -tol * max(1.0, float(np.max(np.abs(u))))
    return u, count + len(hist) + len(upd), bool(ok)


def _double_loop(op, f, p, sched, scheme, g=None, lam=0.0, tol_mono=None):
    """k-loop inside an n-loop.

    Without ``g`` (monotone scheme) n saturates the absorption, the inner
    problems are solved by damped Picard and the expected orderings are
    u_{n,k} <= u_{n,k+1}, u_{n+1} <= u_n.  With ``g`` (reaction scheme) n
    saturates the reaction term lam g u / (1 + u/n), the absorption is kept
    exact, the inner problems are solved by Newton, and u_n is expected to
    increase with n.
    """
    ptol = sched.solve_tol
    if tol_mono is None:
        tol_mono = 10 * ptol
    grid = op.grid
    reacting = g is not None
    n_sign = 1.0 if reacting else -1.0
    u = np.zeros(op.n)
    u_prev_n = None
    residuals, violations, ledger, masses, n_used, k_used = [], [], [], [], [], []
    worst = 0.0
    inner_total = 0
    inner_ok = True
    outer_ok = False
    last = None
    warm = {}  # solution at the same k for the previous n

    for step_n, n in enumerate(sched.n_values()):
        u_prev_k = None
        for k in sched.k_values():
            rhs = truncate(f, k).values
            start = warm.get(k, u)
            if reacting:
                react = (lam, truncate(g, k).values, n)
                u, count, ok = _reaction_solve(op, rhs, p, react, start, ptol, sched)
                inner_total += count
            else:
                react = None
                u, hist = _picard(op, rhs, p, n, sched.damping, ptol, sched.max_iter, start)
                inner_total += len(hist)
                ok = hist[-1] <= ptol
            inner_ok &= bool(ok)
            last = (rhs, react, n)
            warm[k] = u
            if u_prev_k is not None:
                v = float(np.max(u_prev_k - u))
                worst = max(worst, v)
                violations.append(v)
                diff = float(np.max(np.abs(u - u_prev_k)))
                residuals.append(diff)
                if diff <= sched.tol_inner:
                    break
            u_prev_k = u
        k_used.append(k)
        n_used.append(n)
        ledger.append(weighted_grad_norm(grid.field(u), p))
        if reacting:
            masses.append(grid.integrate(g.values * u))
        if u_prev_n is not None:
            v = float(np.max(n_sign * (u_prev_n - u)))
            worst = max(worst, v)
            violations.append(v)
            diff = float(np.max(np.abs(u - u_prev_n)))
            residuals.append(diff)
            if diff <= sched.tol_outer and step_n + 1 >= sched.n_min_steps:
                outer_ok = True
                break
        u_prev_n = u

    raw = u
    if u_prev_n is not None and u_prev_n is not u:
        # saturation error behaves like C/n; extrapolate the last two outer iterates
        r = sched.n_factor
        u = (r * u - u_prev_n) / (r - 1)
    converged = outer_ok and inner_ok
    scale = max(float(np.max(np.abs(u))), np.finfo(float).tiny) if len(u) else 1.0
    rhs, react, n_last = last
    extras = {
        "n_values": n_used,
        "k_counts": k_used,
        "n_final": n_last,
        "tol_inner": sched.tol_inner,
        "tol_outer": sched.tol_outer,
        "solve_tol": ptol,
        "tol_mono": tol_mono,
        "ordering_flagged": worst > 10 * tol_mono,
        "relative_violation": worst / scale,
        "inner_converged": inner_ok,
        "extrapolation_shift": float(np.max(np.abs(u - raw))) if len(u) else 0.0,
        "inner_solver": "newton" if reacting else "picard",
    }
    if reacting:
        extras["lambda"] = lam
        extras["reaction_mass"] = masses
    return SolveReport(
        scheme=scheme,
        final=grid.field(u),
        converged=converged,
        reason="tolerance" if converged else "max-iter",
        iterates_outer=len(n_used),
        iterates_inner=inner_total,
        residual_history=residuals,
        violation_history=violations,
        monotone_violation=worst,
        norm_ledger=ledger,
        equation_residual=_residual(op, raw, rhs, p, math.inf if reacting else n_last, react),
        tol=sched.tol_outer,
        extras=extras,
    )


def _check_natural_growth(op, p):
    if not 1 < p < 2 * op.s:
        raise InvalidArgument(f"the truncation scheme needs 1 < p < 2s = {2 * op.s:g}, got p={p!r}")


def _nonnegative(grid, data, name):
    fld = as_field(grid, data)
    if not np.all(np.isfinite(fld.values)):
        raise InvalidArgument(f"{name} has non-finite entries")
    if np.any(fld.values < 0):
        raise InvalidArgument(f"{name} must be nonnegative")
    return fld


def solve_monotone(op: FracOp, f, p: float, schedule: MonotoneSchedule | None = None, tol_mono=None) -> SolveReport:
    """Maximal-solution scheme: k increasing truncations inside, n increasing saturations outside.

    Ordering u_{n,k} <= u_{n,k+1} and u_{n+1} <= u_n is checked after every
    solve; breaches are logged (``monotone_violation``), never fatal.
    ``final`` extrapolates the last two outer iterates in 1/n.
    """
    _check_natural_growth(op, p)
    f = _nonnegative(op.grid, f, "f")
    return _double_loop(op, f, p, schedule or MonotoneSchedule(), "monotone", tol_mono=tol_mono)


def solve_reaction(
    op: FracOp,
    f,
    g,
    lam: float,
    p: float,
    schedule: MonotoneSchedule | None = None,
    tol_mono=None,
    certificate: float | None = None,
) -> SolveReport:
    """Double loop for A u + |Du|^p = lam g u / (1 + u/n) + f.

    ``certificate`` is the admissibility constant of g; it is computed with
    the standard trial family when not supplied and must be positive.  With
    ``lam = 0`` the reaction index plays no role and the monotone loop runs
    unchanged.
    """
    from .admissible import check_admissible

    _check_natural_growth(op, p)
    if not lam >= 0:
        raise InvalidArgument(f"lambda must be >= 0, got {lam!r}")
    f = _nonnegative(op.grid, f, "f")
    g = _nonnegative(op.grid, g, "g")
    if certificate is None:
        certificate = check_admissible(g, p).value
    if not certificate > 0:
        raise InvalidArgument("g failed the admissibility check")
    sched = schedule or MonotoneSchedule()
    if lam == 0:
        rep = _double_loop(op, f, p, sched, "reaction", tol_mono=tol_mono)
        rep.extras["lambda"] = 0.0
        rep.extras["reaction_mass"] = [op.grid.integrate(g.values * rep.final.values)]
    else:
        rep = _double_loop(op, f, p, sched, "reaction", g=g, lam=lam, tol_mono=tol_mono)
    rep.extras["admissibility"] = certificate
    return rep

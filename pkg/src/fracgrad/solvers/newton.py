from __future__ import annotations

import numpy as np
from scipy import linalg

from ..errors import InvalidArgument, NumericalFailure
from ..grid import as_field, truncate
from ..operator import FracOp, GradOp
from .common import absorption, absorption_derivative, check_finite, saturate
from .report import SolveReport


def newton_core(op, rhs, p, n_abs=np.inf, mu=0.0, reaction=None, u0=None, step_tol=0.0, res_tol=0.0, max_iter=100):
    """Damped Newton on F(u) = A u + g_n(|Du|) - rhs - lam * gr * u+ / (1 + u+/n_r).

    ``reaction`` is ``None`` or a triple (lam, gr, n_r).  Stops when the
    applied update is <= ``step_tol`` or the residual is <= ``res_tol``.
    Returns (u, update history, residual history, converged).
    """
    A = op.matrix
    D = GradOp(op.grid).matrix.toarray()

    def smooth_abs(du):
        return absorption(np.sqrt(du * du + mu * mu) if mu else du, p, n_abs)

    def F(u):
        out = A @ u + smooth_abs(D @ u) - rhs
        if reaction is not None:
            lam, gr, nr = reaction
            out -= lam * gr * saturate(np.maximum(u, 0.0), nr)
        return out

    u = op.solve_values(rhs) if u0 is None else np.array(u0, dtype=float)
    r = F(u)
    rn = float(np.max(np.abs(r))) if len(u) else 0.0
    merit = float(r @ r)
    updates, residuals = [], [rn]
    if rn <= res_tol:
        return u, updates, residuals, True
    for _ in range(max_iter):
        J = A + absorption_derivative(D @ u, p, n_abs, mu)[:, None] * D
        if reaction is not None:
            lam, gr, nr = reaction
            pos = np.maximum(u, 0.0)
            J = J - np.diag(lam * gr * (u > 0) / (1 + pos / nr) ** 2)
        try:
            step = linalg.solve(J, r)
        except (linalg.LinAlgError, ValueError) as exc:
            raise NumericalFailure(f"Newton Jacobian solve failed: {exc}") from exc
        t = 1.0
        while t > 1e-12:
            cand = u - t * step
            rc = F(cand)
            mc = float(rc @ rc)
            if np.isfinite(mc) and mc < merit:
                break
            t *= 0.5
        else:
            # no decrease left at working precision
            return u, updates, residuals, bool(updates) and updates[-1] <= step_tol
        upd = float(np.max(np.abs(cand - u)))
        check_finite(cand, "Newton iterate")
        u, r, merit = cand, rc, mc
        rn = float(np.max(np.abs(r)))
        updates.append(upd)
        residuals.append(rn)
        if upd <= step_tol or rn <= res_tol:
            return u, updates, residuals, True
    return u, updates, residuals, False


def solve_newton(
    op: FracOp,
    f,
    p: float,
    mu: float = 1e-8,
    tol: float = 1e-10,
    max_iter: int = 100,
    n_reg: float = np.inf,
    k_trunc: float = np.inf,
    u0=None,
) -> SolveReport:
    """Damped Newton on A u + (|Du|^2 + mu^2)^(p/2) = f.

    With finite ``n_reg`` / ``k_trunc`` the same regularized system as the
    monotone scheme is solved instead, which allows a like-for-like check.
    Backtracking halves the step until the residual 2-norm decreases.
    """
    if not p >= 1:
        raise InvalidArgument(f"p must be >= 1, got {p!r}")
    f = as_field(op.grid, f)
    rhs = f.values if np.isinf(k_trunc) else truncate(f, k_trunc).values
    start = None if u0 is None else as_field(op.grid, u0).values
    u, updates, residuals, _ = newton_core(op, rhs, p, n_reg, mu, None, start, 0.0, tol, max_iter)
    converged = residuals[-1] <= tol
    return SolveReport(
        scheme="newton",
        final=f.with_values(u),
        converged=converged,
        reason="tolerance" if converged else "stalled" if len(updates) < max_iter else "max-iter",
        iterates_outer=len(updates),
        iterates_inner=len(updates),
        residual_history=residuals,
        equation_residual=residuals[-1],
        tol=tol,
        extras={"mu": mu, "n_reg": n_reg, "k_trunc": k_trunc, "updates": updates},
    )

"""Picard iteration on the map v -> A^{-1}(f - |Dv|^p) with a ball-invariance log."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import InvalidArgument
from ..grid import as_field
from ..norms import weighted_grad_norm
from ..operator import FracOp, GradOp
from .common import absorption
from .report import SolveReport

BLOWUP = 1e12


@dataclass(frozen=True)
class FixedPointConfig:
    p: float = 2.0
    m: float = 10.0
    l: float = 1.0
    lambda_cap: float = math.inf
    max_iter: int = 500
    tol: float = 1e-10
    damping: float = 1.0

    def __post_init__(self):
        if not self.p >= 1:
            raise InvalidArgument(f"p must be >= 1, got {self.p!r}")
        if not self.l > 0:
            raise InvalidArgument(f"ball parameter l must be > 0, got {self.l!r}")
        if not self.tol > 0:
            raise InvalidArgument(f"tol must be > 0, got {self.tol!r}")
        if not self.m >= 1:
            raise InvalidArgument(f"m must be >= 1, got {self.m!r}")
        if not 0 < self.damping <= 1:
            raise InvalidArgument(f"damping must lie in (0, 1], got {self.damping!r}")

    def radii(self, s: float) -> tuple[float, float]:
        """Ball thresholds l^(1/(2s)) and l^(1/p)."""
        return self.l ** (1 / (2 * s)), self.l ** (1 / self.p)


def _check_range(s: float, cfg: FixedPointConfig, N: int = 1):
    lo, hi = 2 * s, s / (1 - s)
    # s/(1-s) is inexact in floating point (0.8/0.2 > 4); keep the end open
    if not lo <= cfg.p < hi * (1 - 1e-12):
        raise InvalidArgument(f"fixed-point scheme needs 2s <= p < s/(1-s), i.e. [{lo:g}, {hi:g}); got p={cfg.p!r}")
    p_conj = cfg.p / (cfg.p - 1)
    m_min = N / (p_conj * (2 * s - 1))
    if not cfg.m > m_min:
        raise InvalidArgument(f"data integrability m must exceed {m_min:g}, got {cfg.m!r}")


def solve_fixed_point(op: FracOp, f, cfg: FixedPointConfig) -> SolveReport:
    """Undamped (by default) Picard from v = 0.

    Each iterate records B_j = ||Dv^j delta^(1-s)||_{L^(pm)} against the
    radius l^(1/(2s)).  Exceeding the radius sets ``reason='ball-exit'``;
    exceeding ten times the radius, or a blow-up, stops the run.
    """
    s = op.s
    _check_range(s, cfg)
    f = as_field(op.grid, f)
    grid = op.grid
    data_norm = grid.integrate(np.abs(f.values) ** cfg.m) ** (1 / cfg.m)
    if data_norm > cfg.lambda_cap:
        raise InvalidArgument(f"||f||_L^m = {data_norm:.6g} exceeds the configured cap {cfg.lambda_cap:g}")
    r_2s, r_p = cfg.radii(s)
    D = GradOp(grid)
    w = op.solve_values(f.values)
    q = cfg.p * cfg.m

    v = np.zeros(op.n)
    updates, balls, viols = [], [], []
    exited_2s = exited_p = False
    reason = "max-iter"
    converged = False
    for _ in range(cfg.max_iter):
        nxt = op.solve_values(f.values - absorption(D.apply_values(v), cfg.p))
        if cfg.damping < 1:
            nxt = (1 - cfg.damping) * v + cfg.damping * nxt
        if not np.all(np.isfinite(nxt)) or np.max(np.abs(nxt)) > BLOWUP:
            reason = "blowup"
            break
        upd = float(np.max(np.abs(nxt - v))) if op.n else 0.0
        v = nxt
        b = weighted_grad_norm(grid.field(v), q, 1 - s)
        updates.append(upd)
        balls.append(b)
        viols.append(float(np.max(v - w)) if op.n else 0.0)
        exited_2s |= b > r_2s
        exited_p |= b > r_p
        if not math.isfinite(b) or b > 10 * r_2s:
            reason = "ball-exit" if math.isfinite(b) else "blowup"
            break
        if upd <= cfg.tol:
            converged = not exited_2s
            reason = "tolerance" if converged else "ball-exit"
            break

    return SolveReport(
        scheme="fixed-point",
        final=grid.field(v),
        converged=converged,
        reason=reason,
        iterates_outer=len(updates),
        iterates_inner=len(updates),
        residual_history=updates,
        ball_history=balls,
        violation_history=viols,
        monotone_violation=max([0.0] + viols),
        norm_ledger=list(balls),
        tol=cfg.tol,
        equation_residual=float(np.max(np.abs(op.matrix @ v + absorption(D.apply_values(v), cfg.p) - f.values)))
        if op.n
        else 0.0,
        extras={
            "radius_2s": r_2s,
            "radius_p": r_p,
            "binding_radius": "1/(2s)" if r_2s <= r_p else "1/p",
            "exited_radius_2s": exited_2s,
            "exited_radius_p": exited_p,
            "data_norm_Lm": data_norm,
            "p": cfg.p,
            "m": cfg.m,
            "l": cfg.l,
        },
    )


def bisect_threshold(
    op: FracOp,
    cfg: FixedPointConfig,
    profile=None,
    c_lo: float = 0.0,
    c_hi: float = 1.0,
    rel_tol: float = 1e-3,
    max_expand: int = 40,
) -> dict:
    """Locate the amplitude c* where f = c * profile stops converging inside the ball.

    ``profile`` defaults to the constant 1.  Returns c*, its bracket and the
    matching data size ||f||_{L^m}.
    """
    grid = op.grid
    shape = np.ones(op.n) if profile is None else as_field(grid, profile).values
    cfg = replace(cfg, lambda_cap=math.inf)

    def ok(c):
        return solve_fixed_point(op, grid.field(c * shape), cfg).converged

    if c_lo > 0 and not ok(c_lo):
        raise InvalidArgument(f"lower amplitude {c_lo:g} already fails")
    expand = 0
    while ok(c_hi):
        c_lo, c_hi = c_hi, 2 * c_hi
        expand += 1
        if expand > max_expand:
            raise InvalidArgument("no transition found; the map converges for every tried amplitude")
    while c_hi - c_lo > rel_tol * c_hi:
        mid = 0.5 * (c_lo + c_hi)
        if ok(mid):
            c_lo = mid
        else:
            c_hi = mid
    c_star = 0.5 * (c_lo + c_hi)
    size = grid.integrate(np.abs(c_star * shape) ** cfg.m) ** (1 / cfg.m)
    return {"c_star": c_star, "bracket": (c_lo, c_hi), "data_norm_Lm": size}

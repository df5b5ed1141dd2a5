"""Refinement scans that confront discrete solutions with the predicted exponents."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .data import cell_average_power, mollified_dirac, sample
from .errors import InvalidArgument
from .exponents import check_order, critical_exponents
from .grid import ScalarField, build_grid
from .norms import hardy_ratio, weighted_grad_integral, weighted_grad_norm
from .operator import FracOp, GradOp, apply_regularized, assemble

DIVERGING_RATIO = 1.2
CONVERGING_RATIO = 1.05
LOG_BAND = 0.05

CONVERGING, DIVERGING, INCONCLUSIVE = "converging", "diverging", "inconclusive"


@dataclass(frozen=True)
class Verdict:
    verdict: str
    ratio: float
    increment_exponent: float
    rule: str  # "ratio", "increment" or "none"


def classify(values, factor: float = 2.0) -> Verdict:
    """Verdict from the last refinements of a positive observable sequence.

    The last ratio decides when it is above 1.2 (diverging) or below 1.05
    (converging).  In between, the last two increments give
    gamma = log(d_last / d_prev) / log(factor): geometric decay
    (gamma < -0.05) means a finite limit, anything else (log-type growth has
    gamma ~ 0) means divergence.
    """
    v = np.asarray(values, dtype=float)
    if len(v) < 2 or not np.all(np.isfinite(v[-2:])) or v[-2] <= 0:
        return Verdict(INCONCLUSIVE, math.nan, math.nan, "none")
    ratio = v[-1] / v[-2]
    gamma = math.nan
    if len(v) >= 3:
        d_prev, d_last = v[-2] - v[-3], v[-1] - v[-2]
        if d_prev > 0 and d_last > 0:
            gamma = math.log(d_last / d_prev) / math.log(factor)
    if ratio > DIVERGING_RATIO:
        return Verdict(DIVERGING, ratio, gamma, "ratio")
    if ratio < CONVERGING_RATIO:
        return Verdict(CONVERGING, ratio, gamma, "ratio")
    if math.isnan(gamma):
        return Verdict(INCONCLUSIVE, ratio, gamma, "none")
    return Verdict(CONVERGING if gamma < -LOG_BAND else DIVERGING, ratio, gamma, "increment")


def aitken_limit(values) -> float:
    """Delta-squared extrapolation from the last three values (nan if not applicable)."""
    v = np.asarray(values, dtype=float)
    if len(v) < 3:
        return math.nan
    d1, d2 = v[-2] - v[-3], v[-1] - v[-2]
    den = d2 - d1
    if den == 0 or d1 == 0 or d2 / d1 >= 1:
        return math.nan
    return float(v[-1] - d2 * d2 / den)


def verdicts_monotone(verdicts) -> bool:
    """No converging verdict after a diverging one, inconclusive entries ignored."""
    seen_div = False
    for v in verdicts:
        if v == DIVERGING:
            seen_div = True
        elif v == CONVERGING and seen_div:
            return False
    return True


def empirical_threshold(params, verdicts) -> float:
    """Midpoint between the last converging and the first diverging sweep value."""
    conv = [p for p, v in zip(params, verdicts) if v == CONVERGING]
    div = [p for p, v in zip(params, verdicts) if v == DIVERGING]
    if not conv or not div:
        return math.inf if conv else math.nan
    hi_c = max(conv)
    above = [p for p in div if p > hi_c]
    return 0.5 * (hi_c + min(above)) if above else math.nan


@dataclass
class ScanResult:
    kind: str
    parameter_grid: list
    refinements: list
    table: np.ndarray  # observable[sweep point, refinement]
    verdicts: list
    details: list = field(default_factory=list)
    fit_exponent: list = field(default_factory=list)
    limit_estimate: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=float)
        k = len(self.parameter_grid)
        if self.table.shape != (k, len(self.refinements)) or len(self.verdicts) != k:
            raise ValueError("scan lengths disagree")

    @property
    def observable(self) -> np.ndarray:
        """Value at the finest refinement per sweep point."""
        return self.table[:, -1]

    @property
    def threshold(self) -> float:
        return empirical_threshold(self.parameter_grid, self.verdicts)

    @property
    def monotone(self) -> bool:
        return verdicts_monotone(self.verdicts)

    def verdict_for(self, value) -> str:
        return self.verdicts[list(self.parameter_grid).index(value)]

    def to_dict(self) -> dict:
        def num(x):
            x = float(x)
            if math.isnan(x):
                return None
            return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")

        return {
            "kind": self.kind,
            "parameter_grid": [num(p) for p in self.parameter_grid],
            "refinements": [num(r) for r in self.refinements],
            "table": [[num(x) for x in row] for row in self.table],
            "verdicts": list(self.verdicts),
            "ratios": [num(d.ratio) for d in self.details],
            "increment_exponents": [num(d.increment_exponent) for d in self.details],
            "rules": [d.rule for d in self.details],
            "fit_exponent": [num(x) for x in self.fit_exponent],
            "limit_estimate": [num(x) for x in self.limit_estimate],
            "threshold": num(self.threshold),
            "monotone_verdicts": self.monotone,
            "extras": _clean(self.extras),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sweep_value", "refinement", "observable", "verdict"])
            for i, p in enumerate(self.parameter_grid):
                for j, r in enumerate(self.refinements):
                    w.writerow([repr(float(p)), repr(float(r)), repr(float(self.table[i, j])), self.verdicts[i]])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")
    return obj


def _scan_from_table(kind, params, refinements, table, factor=2.0, extras=None, slope_axis=None):
    details = [classify(row, factor) for row in table]
    verdicts = [d.verdict for d in details]
    fits = []
    for row, d in zip(table, details):
        if not math.isnan(d.increment_exponent):
            fits.append(d.increment_exponent)
        elif slope_axis is not None and np.all(row > 0):
            fits.append(float(np.polyfit(np.log(slope_axis[-2:]), np.log(row[-2:]), 1)[0]))
        else:
            fits.append(math.nan)
    limits = [aitken_limit(row) if v == CONVERGING else math.nan for row, v in zip(table, verdicts)]
    return ScanResult(kind, list(params), list(refinements), table, verdicts, details, fits, limits, extras or {})


def _check_refinements(refinements):
    refinements = [int(n) for n in refinements]
    if len(refinements) < 2 or any(b <= a for a, b in zip(refinements, refinements[1:])):
        raise InvalidArgument("refinements must be an increasing list of at least two grid sizes")
    return refinements


def _factor(refinements):
    r = np.asarray(refinements, dtype=float)
    return float(r[-1] / r[-2])


def linear_solutions(s: float, refinements, f_spec="const:1"):
    """Yield (grid, op, u) for A u = f at each refinement."""
    for n in refinements:
        grid = build_grid(n)
        op = assemble(grid, s)
        f = sample(f_spec, grid)
        yield grid, op, grid.field(op.solve_values(f.values))


def gradient_integrability_scan(s: float, a_values, refinements=(200, 400, 800, 1600), f_spec="const:1", w_exp=0.0):
    """int |Du|^a delta^(a w_exp) per a and refinement, for A u = f."""
    s = check_order(s)
    refinements = _check_refinements(refinements)
    a_values = [float(a) for a in a_values]
    table = np.zeros((len(a_values), len(refinements)))
    for j, (grid, op, u) in enumerate(linear_solutions(s, refinements, f_spec)):
        if not np.any(u.values):
            raise InvalidArgument("data must not vanish identically")
        for i, a in enumerate(a_values):
            table[i, j] = weighted_grad_integral(u, a, w_exp)
    ex = critical_exponents(1, s)
    extras = {"predicted_threshold": ex.grad_blowup, "w_exp": w_exp, "f": str(f_spec), "exponents": ex.as_dict()}
    return _scan_from_table("grad-integrability", a_values, refinements, table, _factor(refinements), extras)


def sobolev_gain_scan(s: float, m: float, q_values, refinements=(200, 400, 800, 1600), source="boundary"):
    """Weighted gradient integrals int |Du|^q delta^(q(1-s)) for data f in L^m.

    ``source='boundary'`` uses f = delta^(-1/m + 0.01); ``'interior'`` uses
    f = |x|^(-1/m + 0.01) (cell averages), which concentrates the singularity
    away from the weight.
    """
    s = check_order(s)
    if not m >= 1:
        raise InvalidArgument(f"m must be >= 1, got {m!r}")
    refinements = _check_refinements(refinements)
    q_values = [float(q) for q in q_values]
    t = -1.0 / m + 0.01
    table = np.zeros((len(q_values), len(refinements)))
    for j, n in enumerate(refinements):
        grid = build_grid(n)
        op = assemble(grid, s)
        if source == "boundary":
            f = grid.delta**t
        elif source == "interior":
            f = cell_average_power(grid, t)
        else:
            raise InvalidArgument(f"unknown source {source!r}")
        u = grid.field(op.solve_values(f))
        for i, q in enumerate(q_values):
            table[i, j] = weighted_grad_integral(u, q, 1 - s)
    ex = critical_exponents(1, s, m)
    extras = {"predicted_threshold": ex.sobolev_gain, "m": m, "source": source, "exponents": ex.as_dict()}
    return _scan_from_table("sobolev-gain", q_values, refinements, table, _factor(refinements), extras)


def dirac_blowup_scan(s: float, p: float, eps_values=(0.2, 0.1, 0.05, 0.025), n_grid: int = 1600, mass: float = 1.0):
    """||Du_eps||_{L^p} for A u_eps = mollified Dirac of half-width eps at 0.

    The gradient nonlinearity is dropped: the linear problem is the surrogate
    whose blow-up mechanism is the same and which is valid for every p.
    Widths are processed in the given order (shrinking).
    """
    s = check_order(s)
    if not p >= 1:
        raise InvalidArgument(f"p must be >= 1, got {p!r}")
    eps_values = [float(e) for e in eps_values]
    if len(eps_values) < 2 or any(b >= a for a, b in zip(eps_values, eps_values[1:])):
        raise InvalidArgument("eps_values must be a decreasing list of at least two widths")
    grid = build_grid(n_grid)
    op = assemble(grid, s)
    norms = []
    for eps in eps_values:
        f = mollified_dirac(grid, eps, 0.0, mass)
        norms.append(weighted_grad_norm(grid.field(op.solve_values(f.values)), p))
    norms = np.asarray(norms)
    factor = eps_values[-2] / eps_values[-1]
    d = classify(norms, factor)
    slope = float(np.polyfit(-np.log(eps_values), np.log(norms), 1)[0])
    ex = critical_exponents(1, s)
    extras = {
        "surrogate": "linear problem A u = f_eps (gradient term dropped)",
        "p_star": ex.p_star,
        "n_grid": n_grid,
        "mass": mass,
        "halving_ratios": list(norms[1:] / norms[:-1]),
        "relative_spread": float(norms.max() / norms.min() - 1),
        "exponents": ex.as_dict(),
    }
    return ScanResult(
        "dirac",
        [p],
        eps_values,
        norms[None, :],
        [d.verdict],
        [d],
        [slope],
        [aitken_limit(norms) if d.verdict == CONVERGING else math.nan],
        extras,
    )


def regime_label(s: float, p: float, N: int = 1) -> str:
    ex = critical_exponents(N, s)
    if p > ex.nonexist_threshold:
        return "nonexistence regime"
    if p > ex.grad_blowup:
        return "conjecture regime"
    return "no prediction"


def nonexistence_scan(s: float, p_values, refinements=(200, 400, 800, 1600)):
    """int delta^(-p(1-s)) per refinement, with the W^{1,p} surrogate of A u = 1 alongside."""
    s = check_order(s)
    refinements = _check_refinements(refinements)
    p_values = [float(p) for p in p_values]
    table = np.zeros((len(p_values), len(refinements)))
    surrogate = np.zeros_like(table)
    for j, (grid, op, u) in enumerate(linear_solutions(s, refinements)):
        for i, p in enumerate(p_values):
            table[i, j] = grid.integrate(grid.delta ** (-p * (1 - s)))
            surrogate[i, j] = weighted_grad_integral(u, p)
    sur = [classify(row, _factor(refinements)).verdict for row in surrogate]
    ex = critical_exponents(1, s)
    extras = {
        "labels": [regime_label(s, p) for p in p_values],
        "surrogate_table": surrogate,
        "surrogate_verdicts": sur,
        "predicted_threshold": 1 / (1 - s),
        "exponents": ex.as_dict(),
    }
    return _scan_from_table("nonexist", p_values, refinements, table, _factor(refinements), extras)


def hardy_scan(t_values, p: float = 2.0, refinements=(200, 400, 800, 1600)):
    """Hardy quotient of phi = (1-x^2)^t under refinement.

    A family member is flagged non-Hardy when the numerator int |phi|^p / delta^p
    diverges: the quotient itself may then stay bounded because the
    gradient integral diverges alongside.
    """
    refinements = _check_refinements(refinements)
    t_values = [float(t) for t in t_values]
    ratios = np.zeros((len(t_values), len(refinements)))
    nums = np.zeros_like(ratios)
    for j, n in enumerate(refinements):
        grid = build_grid(n)
        for i, t in enumerate(t_values):
            q = hardy_ratio(grid.field((1 - grid.nodes**2) ** t), p)
            ratios[i, j], nums[i, j] = q.ratio, q.numerator
    num_verdicts = [classify(row, _factor(refinements)).verdict for row in nums]
    extras = {
        "numerators": nums,
        "numerator_verdicts": num_verdicts,
        "non_hardy": [v == DIVERGING for v in num_verdicts],
        "p": p,
    }
    return _scan_from_table("hardy", t_values, refinements, ratios, _factor(refinements), extras)


@dataclass
class ResidualReport:
    eps_values: list
    node_residuals: np.ndarray  # extrapolated residual at each checked node
    nodes: np.ndarray  # indices checked (delta >= margin * h)
    sup_residual: float  # over all checked nodes
    interior_residual: float  # over |x| <= interior
    interior: float

    def to_dict(self) -> dict:
        return {
            "eps_values": list(map(float, self.eps_values)),
            "sup_residual": float(self.sup_residual),
            "interior_residual": float(self.interior_residual),
            "interior": self.interior,
            "checked_nodes": int(len(self.nodes)),
        }


def viscosity_residual_check(
    op: FracOp,
    u: ScalarField,
    p: float,
    f,
    eps_values=None,
    margin: float = 5.0,
    interior: float = 0.5,
    grad=None,
) -> ResidualReport:
    """Pointwise residual (-Lap)^s u + |Du|^p - f with the operator extrapolated in eps.

    At every node with delta >= margin * h, the cut-off operator is evaluated
    at each eps and fitted by R0 + c eps^(2-2s); R0 is the residual.  Defaults
    to eps = 2h, 4h, 8h.  ``grad`` replaces the discrete gradient (used for
    touching test functions).
    """
    grid = op.grid
    s = op.s
    h = grid.h
    eps = np.asarray([2 * h, 4 * h, 8 * h] if eps_values is None else eps_values, dtype=float)
    if np.any(eps <= 0):
        raise InvalidArgument("eps values must be positive")
    fv = sample(f, grid).values if isinstance(f, str) else np.asarray(getattr(f, "values", f), dtype=float)
    du = GradOp(grid).apply_values(u.values) if grad is None else np.asarray(grad, dtype=float)
    nodes = np.flatnonzero(grid.delta >= margin * h * (1 - 1e-12))
    X = np.column_stack([np.ones_like(eps), eps ** (2 - 2 * s)])
    res = np.empty(len(nodes))
    for k, i in enumerate(nodes):
        vals = np.array([apply_regularized(op, u, i, e) for e in eps])
        r0 = np.linalg.lstsq(X, vals, rcond=None)[0][0] if len(eps) > 1 else vals[0]
        res[k] = r0 + abs(du[i]) ** p - fv[i]
    mid = np.abs(grid.nodes[nodes]) <= interior
    return ResidualReport(
        list(eps),
        res,
        nodes,
        float(np.max(np.abs(res))) if len(res) else 0.0,
        float(np.max(np.abs(res[mid]))) if np.any(mid) else math.nan,
        interior,
    )

import csv
import json
import math

import numpy as np
import pytest

from fracgrad import build_grid, truncate, weighted_grad_norm
from fracgrad.diagnostics import CONVERGING, DIVERGING, classify
from fracgrad.errors import DegenerateInput, InvalidArgument, NumericalFailure
from fracgrad.oracles import torsion_constant
from fracgrad.solvers import (
    FixedPointConfig,
    MonotoneSchedule,
    SolveReport,
    bisect_threshold,
    check_admissible,
    solve_fixed_point,
    solve_linear,
    solve_monotone,
    solve_newton,
    solve_reaction,
    solve_regularized,
)
from fracgrad.solvers.admissible import power_family
from fracgrad.solvers.common import absorption, absorption_derivative, damped_picard, saturate

# pilot-run regression values
REG_MAX_U = 1.0070138882549329  # s=0.75, p=1.2, f=5, n_reg=8, k=10, n=400
C_STAR = {200: 3.962890625, 400: 4.056640625}  # s=0.8, p=2, m=10, l=1
ADMISSIBLE_ONE = {200: 1.217072, 400: 1.221162}  # g=1, p=2
REACTION_MASS_200 = 12753.725957988907
REACTION_UMAX_200 = 2286.5904779705097


# ------------------------------------------------------------------ helpers


def test_saturation_bounds():
    t = np.array([0.0, 1.0, 10.0, 1e6])
    out = saturate(t, 8.0)
    assert np.all(out >= 0) and np.all(out <= 8.0)
    np.testing.assert_array_equal(saturate(t, np.inf), t)


def test_absorption_derivative_matches_difference():
    du = np.array([-2.0, -0.3, 0.4, 1.7])
    for p, n in ((1.2, np.inf), (2.0, 8.0), (1.5, 3.0)):
        h = 1e-7
        fd = (absorption(du + h, p, n) - absorption(du - h, p, n)) / (2 * h)
        np.testing.assert_allclose(absorption_derivative(du, p, n), fd, rtol=1e-6)


def test_absorption_derivative_finite_at_zero():
    assert np.all(np.isfinite(absorption_derivative(np.zeros(3), 1.2)))


def test_damped_picard_halves_on_increase():
    # u -> -2u oscillates undamped; the damped map contracts
    u, hist, ok, theta = damped_picard(lambda u: -2 * u, np.ones(3), 1.0, 1e-12, 500)
    assert ok and theta < 1.0
    assert np.max(np.abs(u)) < 1e-11


# ------------------------------------------------------------------ linear


def test_linear_zero(op_factory):
    op = op_factory(100, 0.75)
    assert np.all(solve_linear(op, np.zeros(100)).values == 0)


def test_linear_centre_value(op_factory):
    op = op_factory(801, 0.75)
    u = solve_linear(op, np.ones(801))
    assert u.values[400] == pytest.approx(1 / torsion_constant(0.75), rel=0.01)


def test_linear_ordering(op_factory, rng):
    op = op_factory(200, 0.7)
    for _ in range(50):
        f1 = rng.uniform(-1, 1, 200)
        f2 = f1 + rng.uniform(0, 1, 200) * (rng.uniform(size=200) < 0.5)
        assert np.all(solve_linear(op, f1).values <= solve_linear(op, f2).values + 1e-13)


def test_linear_rejects_non_finite(op_factory):
    op = op_factory(10, 0.75)
    with pytest.raises((InvalidArgument, NumericalFailure)):
        solve_linear(op, np.full(10, np.nan))


# ------------------------------------------------------------------ regularized


def test_regularized_zero_data(op_factory):
    rep = solve_regularized(op_factory(100, 0.75), np.zeros(100), 8, 10, 1.2)
    assert rep.converged and rep.iterates_inner == 1
    assert np.all(rep.final.values == 0)


def test_regularized_pilot(op_factory):
    op = op_factory(400, 0.75)
    rep = solve_regularized(op, np.full(400, 5.0), 8, 10, 1.2, damping=0.5)
    assert rep.converged
    assert rep.iterates_inner <= 200
    assert rep.last_residual <= rep.tol
    assert float(np.max(rep.final.values)) == pytest.approx(REG_MAX_U, rel=1e-8)


def test_regularized_sandwich(op_factory, rng):
    op = op_factory(150, 0.75)
    f = rng.uniform(0, 30, 150)
    rep = solve_regularized(op, f, 8, 10, 1.4)
    w = op.solve_values(truncate(op.grid.field(f), 10).values)
    assert np.all(rep.final.values >= -1e-12)
    assert np.all(rep.final.values <= w + 1e-12)


def test_regularized_max_iter_is_reported(op_factory):
    rep = solve_regularized(op_factory(100, 0.75), np.ones(100), 8, 10, 1.2, max_iter=2)
    assert not rep.converged and rep.reason == "max-iter"


@pytest.mark.parametrize("kw", [dict(n_reg=0.5), dict(k_trunc=0), dict(p=0.5), dict(damping=0.0)])
def test_regularized_rejects(op_factory, kw):
    args = dict(n_reg=8, k_trunc=10, p=1.2)
    args.update(kw)
    with pytest.raises(InvalidArgument):
        solve_regularized(op_factory(20, 0.75), np.ones(20), **args)


# ------------------------------------------------------------------ monotone


def test_monotone_zero_data(op_factory):
    rep = solve_monotone(op_factory(100, 0.75), np.zeros(100), 1.2)
    assert np.all(rep.final.values == 0)
    assert rep.monotone_violation == 0


def test_monotone_bounds_and_newton(op_factory):
    op = op_factory(400, 0.75)
    f = np.ones(400)
    rep = solve_monotone(op, f, 1.2)
    u = rep.final.values
    assert rep.converged
    assert np.all(u >= 0) and np.all(u <= op.solve_values(f))
    assert rep.monotone_violation <= 1e-8 * np.max(u)
    assert not rep.extras["ordering_flagged"]
    nw = solve_newton(op, f, 1.2)
    assert nw.converged
    assert np.max(np.abs(nw.final.values - u)) <= 1e-6


def test_monotone_singular_data_scan(op_factory):
    rows = []
    for n in (200, 400, 800):
        op = op_factory(n, 0.75)
        rep = solve_monotone(op, op.grid.delta**-0.4, 1.2)
        assert rep.converged
        rows.append([weighted_grad_norm(rep.final, q) for q in (1.5, 6.0)])
    rows = np.array(rows).T
    assert classify(rows[0]).verdict == CONVERGING
    assert classify(rows[1]).verdict == DIVERGING


@pytest.mark.parametrize("p", [1.5, 1.0, 2.0])
def test_monotone_rejects_growth_outside_range(op_factory, p):
    with pytest.raises(InvalidArgument):
        solve_monotone(op_factory(20, 0.75), np.ones(20), p)


def test_monotone_rejects_negative_data(op_factory):
    with pytest.raises(InvalidArgument):
        solve_monotone(op_factory(20, 0.75), -np.ones(20), 1.2)


def test_schedule_sequences():
    sch = MonotoneSchedule(k_max=10, k_factor=2.0, n_max=16)
    assert list(sch.k_values()) == [1, 2, 4, 8, 10]
    assert list(sch.n_values()) == [2, 4, 8, 16]
    assert list(MonotoneSchedule(k_max=3).k_values()) == [1, 2, 3]
    with pytest.raises(InvalidArgument):
        MonotoneSchedule(k_max=0)


def test_comparison_pairs(op_factory, rng):
    op = op_factory(100, 0.75)
    x = op.grid.nodes
    for _ in range(5):
        f1 = rng.uniform(0, 2) * (1 + np.cos(rng.uniform(1, 4) * x)) / 2
        f2 = f1 + rng.uniform(0, 1) * np.exp(-(x - rng.uniform(-0.5, 0.5)) ** 2 / 0.05)
        u1 = solve_monotone(op, f1, 1.2).final.values
        u2 = solve_monotone(op, f2, 1.2).final.values
        assert np.max(u1 - u2) <= 1e-6 * np.max(np.abs(u2))


# ------------------------------------------------------------------ Newton


def test_newton_regularized_matches_picard(op_factory):
    op = op_factory(200, 0.75)
    f = np.full(200, 5.0)
    pic = solve_regularized(op, f, 8, 10, 1.2)
    nw = solve_newton(op, f, 1.2, mu=0.0, n_reg=8, k_trunc=10)
    assert np.max(np.abs(nw.final.values - pic.final.values)) <= 1e-8


# ------------------------------------------------------------------ fixed point


def test_fixed_point_zero(op_factory):
    rep = solve_fixed_point(op_factory(100, 0.8), np.zeros(100), FixedPointConfig())
    assert rep.converged
    assert np.all(rep.final.values == 0)
    assert all(b == 0 for b in rep.ball_history)


def test_fixed_point_small_and_large_data(op_factory):
    op = op_factory(200, 0.8)
    cfg = FixedPointConfig(p=2, m=10, l=1)
    small = solve_fixed_point(op, np.full(200, 1.0), cfg)
    assert small.converged and small.reason == "tolerance"
    assert max(small.ball_history) <= small.extras["radius_2s"]
    # every iterate sits below the linear solution
    assert max(small.violation_history) <= 1e-12
    large = solve_fixed_point(op, np.full(200, 20.0), cfg)
    assert not large.converged and large.reason in ("ball-exit", "blowup")


def test_fixed_point_logs_both_radii(op_factory):
    rep = solve_fixed_point(op_factory(50, 0.8), np.ones(50), FixedPointConfig(p=2, m=10, l=4.0))
    assert rep.extras["radius_2s"] == pytest.approx(4.0 ** (1 / 1.6))
    assert rep.extras["radius_p"] == pytest.approx(2.0)
    assert rep.extras["binding_radius"] == "1/p"


def test_threshold_regression(op_factory):
    cfg = FixedPointConfig(p=2, m=10, l=1)
    vals = {}
    for n in (200, 400):
        vals[n] = bisect_threshold(op_factory(n, 0.8), cfg)["c_star"]
        assert vals[n] == pytest.approx(C_STAR[n], rel=1e-9)
    assert abs(vals[400] / vals[200] - 1) <= 0.2


@pytest.mark.parametrize("p", [1.5, 4.0, 5.0])
def test_fixed_point_range(op_factory, p):
    with pytest.raises(InvalidArgument):
        solve_fixed_point(op_factory(20, 0.8), np.ones(20), FixedPointConfig(p=p))


def test_fixed_point_small_m_rejected(op_factory):
    # m must exceed N / (p' (2s - 1)), about 1.55 at s = 0.6, p = 1.45
    with pytest.raises(InvalidArgument):
        solve_fixed_point(op_factory(20, 0.6), np.ones(20), FixedPointConfig(p=1.45, m=1.2))
    solve_fixed_point(op_factory(20, 0.6), np.ones(20), FixedPointConfig(p=1.45, m=1.6))


def test_lambda_cap(op_factory):
    with pytest.raises(InvalidArgument):
        solve_fixed_point(op_factory(20, 0.8), np.full(20, 5.0), FixedPointConfig(lambda_cap=1.0))


# ------------------------------------------------------------------ admissibility and reaction


@pytest.mark.parametrize("n", sorted(ADMISSIBLE_ONE))
def test_admissible_constant_weight(n):
    g = build_grid(n)
    c = check_admissible(g.field(np.ones(n)), 2.0)
    assert c.value == pytest.approx(ADMISSIBLE_ONE[n], rel=1e-5)


def test_admissible_stable_under_refinement():
    vals = [check_admissible(build_grid(n).field(np.ones(n)), 2.0).value for n in (200, 400, 800)]
    assert max(vals) / min(vals) - 1 <= 0.10


@pytest.mark.parametrize("c", [0.01, 3.0, 250.0])
def test_admissible_homogeneity(c):
    g = build_grid(120)
    w = g.field(1 + g.nodes**2)
    base = check_admissible(w, 1.5).value
    assert check_admissible(c * w, 1.5).value == pytest.approx(base / c, rel=1e-12)


def test_admissible_collapse_for_singular_weight():
    g = build_grid(800)
    w = g.field(g.delta**-2.0)
    vals = [check_admissible(w, 1.1, power_family(g, np.geomspace(4, t, 10))).value for t in (2.0, 1.0, 0.5, 0.3, 0.1)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 0.01 * vals[0]
    refined = [check_admissible(build_grid(n).field(build_grid(n).delta ** -2.0), 1.1).value for n in (200, 400, 800)]
    assert all(b < a for a, b in zip(refined, refined[1:]))


def test_admissible_degenerate():
    with pytest.raises(DegenerateInput):
        check_admissible(build_grid(20).zeros(), 2.0)


def test_reaction_without_lambda_is_monotone(op_factory):
    op = op_factory(150, 0.75)
    f = np.ones(150)
    g = np.abs(op.grid.nodes) ** -0.9
    a = solve_monotone(op, f, 1.3)
    b = solve_reaction(op, f, g, 0.0, 1.3)
    np.testing.assert_array_equal(a.final.values, b.final.values)
    assert b.extras["admissibility"] > 0


def test_reaction_pilot(op_factory):
    op = op_factory(200, 0.75)
    x = op.grid.nodes
    g = op.grid.field(np.abs(x) ** -0.9)
    cert = check_admissible(g, 1.3).value
    assert cert > 0
    rep = solve_reaction(op, np.ones(200), g, 5.0, 1.3, MonotoneSchedule(k_max=1024, k_factor=2))
    assert rep.converged
    mass = rep.extras["reaction_mass"]
    assert mass[-1] == pytest.approx(REACTION_MASS_200, rel=1e-6)
    assert float(np.max(rep.final.values)) == pytest.approx(REACTION_UMAX_200, rel=1e-6)
    # the saturated reaction raises the solution: n-ordering is increasing
    assert all(b >= a * (1 - 1e-9) for a, b in zip(mass, mass[1:]))
    assert rep.extras["relative_violation"] <= 1e-8


def test_reaction_gate(op_factory):
    op = op_factory(30, 0.75)
    with pytest.raises(InvalidArgument):
        solve_reaction(op, np.ones(30), np.ones(30), 1.0, 1.3, certificate=0.0)
    with pytest.raises(InvalidArgument):
        solve_reaction(op, np.ones(30), np.ones(30), -1.0, 1.3)


# ------------------------------------------------------------------ report


def test_report_serialization(op_factory, tmp_path):
    op = op_factory(50, 0.8)
    rep = solve_fixed_point(op, np.ones(50), FixedPointConfig())
    d = json.loads(rep.to_json())
    assert d["scheme"] == "fixed-point" and d["converged"] is True
    assert len(d["final"]) == 50
    rep.write_csv(tmp_path / "h.csv")
    rows = list(csv.reader(open(tmp_path / "h.csv")))
    assert rows[0] == ["iter", "residual", "ball_norm", "violation"]
    assert len(rows) == 1 + len(rep.residual_history)
    if rep.converged:
        assert rep.last_residual <= rep.tol


def test_report_rejects_unknown_scheme():
    with pytest.raises(ValueError):
        SolveReport("magic", build_grid(3).zeros(), True)


def test_report_nan_cells(tmp_path):
    rep = SolveReport("linear", build_grid(3).zeros(), True, residual_history=[1.0, math.nan])
    rep.write_csv(tmp_path / "h.csv")
    assert open(tmp_path / "h.csv").read().splitlines()[2] == "2,,,"
    assert json.loads(rep.to_json())["residual_history"] == [1.0, None]

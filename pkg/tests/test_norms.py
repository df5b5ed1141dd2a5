import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fracgrad import build_grid, gradient, hardy_ratio, weighted_grad_norm
from fracgrad.diagnostics import DIVERGING, classify
from fracgrad.errors import InvalidArgument
from fracgrad.oracles import torsion_constant


def test_zero_field():
    g = build_grid(40)
    assert weighted_grad_norm(g.zeros(), 2.0) == 0.0
    assert weighted_grad_norm(g.zeros(), 1.0, 0.25) == 0.0


@pytest.mark.parametrize("n", [100, 400, 1600])
def test_affine_slope_one(n):
    # central nodes give |Omega| up to O(h); the two one-sided stencils see the
    # jump to the exterior zero and add (1 - h) each
    g = build_grid(n)
    du = np.abs(gradient(g.field(g.nodes)).values)
    central = g.integrate(du[1:-1])
    assert central == pytest.approx(2.0 - 3 * g.h, rel=1e-12)
    assert abs(central - 2.0) <= 3 * g.h * (1 + 1e-9)
    assert weighted_grad_norm(g.field(g.nodes), 1.0) == pytest.approx(4.0 - 5 * g.h, rel=1e-12)


def test_torsion_solution_matches_closed_form_norm(op_factory):
    # oracle: c (1-x^2)^s with c = 1 / (quadrature value of the operator on the profile)
    s = 0.75
    c = 1 / torsion_constant(s)
    integrand = lambda x: (c * 2 * s * x * (1 - x * x) ** (s - 1)) ** 2 * (1 - x) ** 0.5
    exact = np.sqrt(2 * integrate.quad(integrand, 0, 1, limit=200)[0])
    errs = []
    for n in (200, 400, 800, 1600):
        op = op_factory(n, s)
        u = op.grid.field(op.solve_values(np.ones(n)))
        errs.append(abs(weighted_grad_norm(u, 2.0, 0.25) / exact - 1))
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 2e-3


def test_bad_exponent():
    with pytest.raises(InvalidArgument):
        weighted_grad_norm(build_grid(5).zeros(), 0.5)


@settings(max_examples=40, deadline=None)
@given(st.one_of(st.just(0.0), st.floats(1e-20, 1e3), st.floats(-1e3, -1e-20)), st.floats(1, 6), st.floats(0, 1))
def test_absolute_homogeneity(c, q, w):
    g = build_grid(64)
    u = g.field(np.sin(np.pi * g.nodes) + g.nodes**2)
    lhs = weighted_grad_norm(c * u, q, w)
    rhs = abs(c) * weighted_grad_norm(u, q, w)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_hardy_zero_is_degenerate():
    q = hardy_ratio(build_grid(20).zeros())
    assert q.ratio == 0.0 and q.degenerate


def test_hardy_quadratic_profile():
    # exact integrals: int (1-x^2)^2/delta^2 = 14/3, int (2x)^2 = 8/3
    exact = (14 / 3) / (8 / 3)
    vals = [hardy_ratio(build_grid(n).field(1 - build_grid(n).nodes ** 2)).ratio for n in (200, 400, 800)]
    assert max(vals) / min(vals) - 1 < 0.05
    assert vals[-1] == pytest.approx(exact, rel=0.01)


def test_hardy_rough_profile_numerator_diverges():
    # (phi/delta)^2 ~ delta^-1.4 is not integrable
    nums, ratios = [], []
    for n in (200, 400, 800, 1600):
        g = build_grid(n)
        q = hardy_ratio(g.field((1 - g.nodes**2) ** 0.3))
        nums.append(q.numerator)
        ratios.append(q.ratio)
    assert classify(nums).verdict == DIVERGING
    assert all(b > a for a, b in zip(ratios, ratios[1:]))


def test_hardy_family_bounded():
    worst = []
    for n in (200, 400, 800, 1600):
        g = build_grid(n)
        worst.append(max(hardy_ratio(g.field((1 - g.nodes**2) ** t)).ratio for t in (0.6, 0.8, 1.0)))
    assert max(worst) < 3.5
    assert worst[-1] / worst[-2] < 1.05


def test_hardy_bad_p():
    with pytest.raises(InvalidArgument):
        hardy_ratio(build_grid(5).zeros(), 1.0)

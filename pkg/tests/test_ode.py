import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quenchflow.expr import parse_expr
from quenchflow.model import build_grid
from quenchflow.ode import (NonPositiveY, OdeSpec, StepUnderflow, integrate_ode, limit_profile, ode_exact,
                            ode_quench_time, ode_rhs, ode_time_to_reach)


def test_rhs_examples():
    assert ode_rhs(0.5, OdeSpec(n=2, a=1.0)) == -1.0
    s = OdeSpec(n=3, a=0.7, eps=0.2)
    assert ode_rhs(s.eps * (s.n - 1) / s.a, s) == pytest.approx(0.0, abs=1e-15)
    assert ode_rhs(123.0, OdeSpec(n=1, a=0.4, eps=0.5)) == 0.8
    with pytest.raises(NonPositiveY):
        ode_rhs(0.0, OdeSpec(n=2, a=1.0))


def test_default_initial_value():
    assert OdeSpec(n=2, a=1.0, eps=0.1, alpha=2.0, b=3.0).y0 == pytest.approx(0.03)


def test_quench_time_closed_form():
    T = ode_quench_time(OdeSpec(n=2, a=1.0, eps=1.0, y0=0.5))
    assert T == pytest.approx(math.log(2) - 0.5, abs=1e-15)
    assert ode_quench_time(OdeSpec(n=2, a=2.0, eps=1.0, y0=0.5)) is None
    assert ode_quench_time(OdeSpec(n=2, a=1.0, eps=1.0, y0=2.0)) is None


def test_quench_time_against_quadrature():
    # independent route: integrate dt/dy = eps y / (a y - c) from y0 down to 0
    from scipy.integrate import quad
    for n, a, eps, y0 in [(2, 1.0, 1.0, 0.5), (3, 0.4, 0.3, 0.9), (4, 2.5, 0.1, 0.05)]:
        c = eps * (n - 1)
        val, _ = quad(lambda y: eps * y / (c - a * y), 0.0, y0, epsabs=1e-14, epsrel=1e-13)
        assert ode_quench_time(OdeSpec(n=n, a=a, eps=eps, y0=y0)) == pytest.approx(val, rel=1e-10)


def test_integrator_hits_floor_at_closed_form():
    traj = integrate_ode(OdeSpec(n=2, a=1.0, eps=1.0, y0=0.5), 1.0, 1e-6)
    assert traj.hit_floor
    exact = ode_time_to_reach(OdeSpec(n=2, a=1.0, eps=1.0, y0=0.5), 1e-6)
    assert traj.t_event == pytest.approx(exact, abs=1e-9)
    # the remaining tail below the floor is about floor^2 / (2(n-1))
    assert abs((math.log(2) - 0.5) - traj.t_event) < 1e-10


def test_equilibrium_trajectory_is_constant():
    s = OdeSpec(n=2, a=2.0, eps=0.5, y0=0.25)
    traj = integrate_ode(s, 3.0, 1e-3)
    assert traj.event == "ReachedHorizon" and traj.t_event == pytest.approx(3.0)
    np.testing.assert_allclose(traj.y, 0.25, rtol=1e-12)


def test_increasing_case_bounded_by_linear():
    s = OdeSpec(n=2, a=3.0, eps=0.5, y0=0.6)
    traj = integrate_ode(s, 2.0, 1e-3)
    assert np.all(traj.y <= s.y0 + (s.a / s.eps) * traj.t + 1e-12)


def test_integrator_preconditions():
    s = OdeSpec(n=2, a=1.0, y0=0.5)
    with pytest.raises(ValueError):
        integrate_ode(s, 0.0, 1e-3)
    with pytest.raises(ValueError):
        integrate_ode(s, 1.0, 0.6)
    with pytest.raises(StepUnderflow):
        integrate_ode(s, 1.0, 1e-6, rtol=1e-30)


cases = st.tuples(st.sampled_from([2, 3, 4]), st.floats(0.1, 3.0), st.floats(0.05, 1.0), st.floats(0.05, 0.95))


@settings(max_examples=50, deadline=None)
@given(cases)
def test_random_quench_agreement(case):
    n, a, eps, frac = case
    y0 = frac * eps * (n - 1) / a
    s = OdeSpec(n=n, a=a, eps=eps, y0=y0)
    T = ode_quench_time(s)
    traj = integrate_ode(s, 10 * T, 1e-8)
    assert traj.hit_floor
    assert abs(traj.t_event - T) <= 1e-7


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([2, 3]), st.floats(0.2, 3.0), st.floats(0.05, 1.0), st.floats(0.1, 3.0))
def test_monotone_dichotomy(n, a, eps, frac):
    s = OdeSpec(n=n, a=a, eps=eps, y0=frac * eps * (n - 1) / a)
    traj = integrate_ode(s, 1.0, 1e-6 * s.y0)
    d = np.diff(traj.y)
    if frac < 1:
        assert np.all(d < 0)
    elif frac > 1:
        assert np.all(d > 0)
    assert np.all(traj.y > 0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(0.1, 1.0), st.floats(0.05, 1.5), st.floats(0.0, 0.5))
def test_comparison(a, eps, y01, gap):
    s1 = OdeSpec(n=2, a=a, eps=eps, y0=y01)
    s2 = OdeSpec(n=2, a=a, eps=eps, y0=y01 * (1 + gap))
    T = ode_quench_time(s1)
    horizon = 0.9 * T if T is not None else 1.0
    ts = np.linspace(0, horizon, 25)
    y1, y2 = ode_exact(s1, ts), ode_exact(s2, ts)
    assert np.all(y1 <= y2 + 1e-9)
    # the integrator agrees with the inverted closed form on its own samples
    traj = integrate_ode(s1, horizon, 1e-3 * y01)
    keep = traj.y > 1e-3 * y01
    np.testing.assert_allclose(traj.y[keep], ode_exact(s1, traj.t[keep]), rtol=1e-8, atol=1e-12)


@pytest.mark.parametrize("eps", [0.5, 0.1, 0.02])
def test_eps_squared_scaling(eps):
    n, a, b = 2, 0.5, 1.0
    T1 = ode_quench_time(OdeSpec(n=n, a=a, eps=1.0, y0=b))
    Te = ode_quench_time(OdeSpec(n=n, a=a, eps=eps, alpha=1.0, b=b))
    assert Te == pytest.approx(eps ** 2 * T1, rel=1e-12)
    s = np.linspace(0, 0.9 * T1, 7)
    traj_e = ode_exact(OdeSpec(n=n, a=a, eps=eps, b=b), eps ** 2 * s) / eps
    traj_1 = ode_exact(OdeSpec(n=n, a=a, eps=1.0, y0=b), s)
    np.testing.assert_allclose(traj_e, traj_1, rtol=1e-10)


def test_exact_after_quench_is_zero():
    s = OdeSpec(n=2, a=1.0, y0=0.5)
    assert float(ode_exact(s, 1.0)) == 0.0
    assert float(ode_exact(s, 0.0)) == 0.5


def test_limit_profile_constant_f():
    grid = build_grid(16)
    lp = limit_profile(parse_expr("0.5"), parse_expr("1"), 2, grid, 0.5)
    ref = float(ode_exact(OdeSpec(n=2, a=0.5, eps=1.0, y0=1.0), 0.5))
    np.testing.assert_allclose(lp.w, ref, rtol=1e-13)
    rk = limit_profile(parse_expr("0.5"), parse_expr("1"), 2, grid, 0.5, method="rk4")
    np.testing.assert_allclose(rk.w, lp.w, rtol=1e-8)


def test_limit_profile_pointwise_equilibrium():
    grid = build_grid(32)
    f = parse_expr("1 + 0.3*cos(2*pi*x)")
    g = parse_expr("1/(1 + 0.3*cos(2*pi*x))")
    lp = limit_profile(f, g, 2, grid, 2.0)
    np.testing.assert_allclose(lp.w, 1 / (1 + 0.3 * np.cos(2 * np.pi * grid.x)), rtol=1e-12)
    assert not lp.quenched.any()


def test_limit_profile_quench_bound():
    grid = build_grid(64)
    f, g = parse_expr("0.5-0.1*cos(2*pi*x)"), parse_expr("0.8-0.2*cos(2*pi*x)")
    lp = limit_profile(f, g, 2, grid, 0.0)
    fv = 0.5 - 0.1 * np.cos(2 * np.pi * grid.x)
    gv = 0.8 - 0.2 * np.cos(2 * np.pi * grid.x)
    beta = fv - 1 / gv
    assert np.all(fv * gv < 1)
    assert np.all(np.isfinite(lp.quench_time))
    assert np.all(lp.quench_time <= gv / np.abs(beta))
    # the earliest node is x = 0 and it is flagged once t passes its quench time
    T0 = lp.quench_time[0]
    assert np.argmin(lp.quench_time) == 0
    later = limit_profile(f, g, 2, grid, T0 * 1.0001)
    assert later.quenched[0] and not later.quenched[32] and later.w[0] == 0.0


def test_limit_profile_rk4_agrees():
    grid = build_grid(16)
    f, g = parse_expr("0.5-0.1*cos(2*pi*x)"), parse_expr("0.8-0.2*cos(2*pi*x)")
    t = 0.15
    a = limit_profile(f, g, 2, grid, t)
    b = limit_profile(f, g, 2, grid, t, method="rk4")
    np.testing.assert_allclose(b.w, a.w, rtol=1e-8)
    with pytest.raises(ValueError):
        limit_profile(f, g, 2, grid, -1.0)

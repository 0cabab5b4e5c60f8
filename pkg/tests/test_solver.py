import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quenchflow.model import ProblemSpec, State, make_spec
from quenchflow.ode import OdeSpec, ode_quench_time
from quenchflow.solver import (ABORTED, QUENCHED, SERIES_COLUMNS, SURVIVED, DegenerateDimension,
                               NotQuenched, RunRecord, SingularState, adaptive_dt, discrete_rhs,
                               extrapolate_quench_time, fit_quench_time, quench_arcs,
                               quench_locations, run_until_event, step)

A2F, A2G = "0.5-0.1*cos(2*pi*x)", "0.8-0.2*cos(2*pi*x)"


def test_rhs_constant_state():
    spec = make_spec("1", "1", J=32)
    R = discrete_rhs(State(0.0, np.full(32, 0.5)), spec)
    np.testing.assert_array_equal(R, np.full(32, -1.0))


@pytest.mark.parametrize("n,a,eps", [(2, 1.0, 1.0), (3, 0.7, 0.2), (4, 2.0, 0.5)])
def test_rhs_equilibrium(n, a, eps):
    spec = make_spec(str(a), "1", n=n, eps=eps, J=32, theta_q=1e-6)
    u = np.full(32, eps * (n - 1) / a)
    np.testing.assert_allclose(discrete_rhs(State(0.0, u), spec), 0.0, atol=1e-13)


def test_rhs_linearisation():
    eta = 1e-4
    k = 2 * math.pi
    errs = []
    for J in (32, 64, 128, 256):
        spec = make_spec("1", "1", J=J)
        x = spec.grid.x
        s = np.sin(k * x)
        R = discrete_rhs(State(0.0, 0.5 + eta * s), spec)
        lin = -1 + eta * s * (-k * k + 1 / 0.25)
        err = float(np.max(np.abs(R - lin)))
        dx = spec.grid.dx
        # truncation of D2 on a sine plus the quadratic terms of the expansion
        assert err <= eta * k ** 4 * dx * dx / 12 * 1.05 + 30 * eta * eta
        errs.append(err - 30 * eta * eta)
    assert errs[0] > errs[1] > errs[2]


def test_rhs_singular():
    spec = make_spec("1", "1", J=16)
    u = np.ones(16)
    u[3] = 0.0
    with pytest.raises(SingularState):
        discrete_rhs(State(0.0, u), spec)


def test_step_examples():
    spec = make_spec("1", "1", J=16)
    out = step(State(0.0, np.full(16, 0.5)), 0.01, spec)
    np.testing.assert_allclose(out.u, 0.49, rtol=0, atol=1e-15)
    assert out.t == 0.01
    imex = step(State(0.0, np.full(16, 0.5)), 0.01, ProblemSpec(f="1", g="1", J=16, scheme="imex"))
    np.testing.assert_allclose(imex.u, out.u, rtol=0, atol=2e-16)
    with pytest.raises(ValueError):
        step(State(0.0, np.full(16, 0.5)), 0.0, spec)


@pytest.mark.parametrize("scheme", ["explicit-monotone", "imex"])
def test_step_preserves_reflection_bitwise(scheme):
    spec = make_spec(A2F, A2G, J=64, scheme=scheme)
    grid = spec.grid
    u = spec.initial_profile()
    u = 0.5 * (u + u[grid.mirror()])  # exactly symmetric start
    st_ = State(0.0, u)
    for _ in range(50):
        st_ = step(st_, adaptive_dt(st_, spec), spec)
        assert np.array_equal(st_.u, st_.u[grid.mirror()])


def test_adaptive_dt_caps():
    spec = make_spec("0.01", "1", J=64)
    dt = adaptive_dt(State(0.0, np.full(64, 5.0)), spec)
    assert dt == pytest.approx(0.4 / 64 ** 2)
    small = [adaptive_dt(State(0.0, np.full(64, v)), spec) for v in (1e-2, 5e-3)]
    assert small[0] / small[1] == pytest.approx(4.0)
    assert small[0] == pytest.approx(0.05 * 1e-4)
    assert adaptive_dt(State(0.0, np.full(64, 1e6)), make_spec("1e-9", "1", J=16, dt_max=1e-4,
                                                                 scheme="imex")) <= 1e-4
    with pytest.raises(SingularState):
        adaptive_dt(State(0.0, -np.ones(64)), spec)


def test_imex_drops_diffusion_cap():
    spec = make_spec("0.01", "1", J=256, scheme="imex")
    assert adaptive_dt(State(0.0, np.full(256, 5.0)), spec) > 100 * 0.4 / 256 ** 2


def test_constant_quench_matches_ode():
    rec = run_until_event(ProblemSpec(f="1", g="0.5", J=128))
    exact = math.log(2) - 0.5
    assert rec.verdict == QUENCHED
    assert rec.T_star_estimate >= rec.t_stop
    assert abs(rec.T_star_estimate - exact) / exact < 0.02
    assert abs(rec.T_star_fit - exact) / exact < 0.02
    assert rec.fit_residual < 0.05
    assert np.min(rec.u_final) <= rec.spec.theta_q
    assert rec.quench_locations == [0.0]
    arcs = quench_arcs(rec.u_final, rec.spec.theta_q, rec.spec.grid)
    assert len(arcs) == 1 and arcs[0].whole_circle


def test_series_invariants():
    rec = run_until_event(ProblemSpec(f=A2F, g=A2G, J=64, record_stride=3))
    assert set(rec.series) == set(SERIES_COLUMNS)
    assert np.all(np.diff(rec.series["t"]) > 0)
    assert rec.series["t"][-1] == rec.t_stop
    assert np.all(rec.series["u_min"] > 0)
    assert np.all(np.isfinite(rec.series["ux_max"])) and np.all(np.isfinite(rec.series["eps_ut_max"]))
    assert rec.min_u_overall > 0


def test_large_forcing_survives():
    rec = run_until_event(ProblemSpec(f="3", g="1", eps=0.05, J=32, t_max=1.0))
    assert rec.verdict == SURVIVED and rec.T_star_estimate is None
    assert rec.min_u_overall / 0.05 >= 1.0 / (3 - 1) * 0.95


def test_n1_is_linear_growth():
    rec = run_until_event(ProblemSpec(f="1", g="1", n=1, J=16, t_max=2.0))
    assert rec.verdict == SURVIVED
    np.testing.assert_allclose(rec.u_final, 1.0 + rec.t_stop, rtol=1e-12)
    assert rec.t_stop == 2.0


def test_snapshots_hit_requested_times():
    times = (0.01, 0.05, 0.05, 0.123)
    rec = run_until_event(ProblemSpec(f=A2F, g=A2G, J=32, snapshot_times=times))
    assert [t for t, _ in rec.snapshots] == [0.01, 0.05, 0.123]
    assert np.array_equal(rec.snapshot_at(0.05), rec.snapshots[1][1])
    with pytest.raises(KeyError):
        rec.snapshot_at(10.0)


def _synthetic(T=0.2, n=2):
    t = np.linspace(0.0, 0.19, 40)
    u = np.sqrt(2 * (n - 1) * (T - t))
    series = {c: np.zeros_like(t) for c in SERIES_COLUMNS}
    series["t"], series["u_min"] = t, u
    spec = make_spec("1", "1", n=max(n, 1), J=16, theta_q=float(u[-1]))
    return RunRecord(spec=spec, series=series, verdict=QUENCHED, t_stop=float(t[-1]),
                     u_final=np.full(16, u[-1]))


def test_extrapolation_synthetic():
    rec = _synthetic()
    assert extrapolate_quench_time(rec) == pytest.approx(0.2, abs=1e-15)
    T, res = fit_quench_time(rec)
    assert T == pytest.approx(0.2, abs=1e-12) and res < 1e-10


def test_extrapolation_errors():
    rec = _synthetic()
    rec.verdict = SURVIVED
    with pytest.raises(NotQuenched):
        extrapolate_quench_time(rec)
    with pytest.raises(NotQuenched):
        quench_locations(rec)
    rec = _synthetic()
    with pytest.raises(DegenerateDimension):
        extrapolate_quench_time(rec, make_spec("1", "1", n=1, J=16))


def test_locations_reflect():
    base = dict(f="0.5", J=64, theta_q=1e-3)
    r1 = run_until_event(ProblemSpec(g="0.8-0.2*cos(2*pi*x)+0.1*sin(2*pi*x)", **base))
    r2 = run_until_event(ProblemSpec(g="0.8-0.2*cos(2*pi*x)-0.1*sin(2*pi*x)", **base))
    assert r1.verdict == r2.verdict == QUENCHED
    assert len(r1.quench_locations) == 1
    assert r2.quench_locations == [(1 - x) % 1.0 for x in r1.quench_locations]
    assert r1.quench_locations[0] != 0.0


def test_arcs_wrap_around():
    grid = make_spec("1", "1", J=16).grid
    u = np.ones(16)
    u[[15, 0, 1]] = [0.01, 0.005, 0.02]
    u[[7, 8]] = [0.015, 0.012]
    arcs = quench_arcs(u, 0.01, grid)
    assert [(a.start, a.stop, a.argmin) for a in arcs] == [(15, 1, 0), (7, 8, 8)]


def test_symmetry_over_full_run():
    rec = run_until_event(ProblemSpec(f=A2F, g=A2G, J=128))
    assert rec.max_asymmetry <= 1e-12


def test_rescaling_identity():
    eps = 0.2
    times = (0.02, 0.05, 0.1)
    base = dict(f=A2F, g=A2G, J=64, eps=eps)
    u_run = run_until_event(ProblemSpec(snapshot_times=tuple(eps * eps * s for s in times), **base))
    w_run = run_until_event(ProblemSpec(snapshot_times=times, rescaled=True, **base))
    for s in times:
        np.testing.assert_allclose(u_run.snapshot_at(eps * eps * s) / eps, w_run.snapshot_at(s), rtol=1e-9)
    assert u_run.verdict == w_run.verdict == QUENCHED
    assert u_run.T_star_estimate / eps ** 2 == pytest.approx(w_run.T_star_estimate, rel=1e-9)


def test_imex_agrees_with_explicit():
    ref = run_until_event(ProblemSpec(f=A2F, g=A2G, J=64)).T_star_estimate
    errs = []
    for dt_max in (2e-3, 1e-3, 5e-4):
        b = run_until_event(ProblemSpec(f=A2F, g=A2G, J=64, scheme="imex", dt_max=dt_max))
        assert b.verdict == QUENCHED and b.max_asymmetry <= 1e-12
        errs.append(abs(b.T_star_estimate - ref) / ref)
    # first order in time: halving the step roughly halves the gap
    assert errs[-1] < 0.01
    assert errs[0] > errs[1] > errs[2]


def test_aborted_record_on_bad_initial():
    spec = ProblemSpec(f="1", g="1", J=16)
    u0 = np.ones(16)
    u0[2] = np.nan
    rec = run_until_event(spec, initial=u0)
    assert rec.verdict == ABORTED and rec.abort_reason


@settings(max_examples=8, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(0.3, 1.5), st.floats(0.0, 0.25), st.sampled_from([2, 3]))
def test_positivity_and_verdict(fc, gc, amp, n):
    spec = ProblemSpec(f=f"{fc}", g=f"{gc}+{amp * gc}*cos(2*pi*x)", n=n, J=32, t_max=0.5)
    rec = run_until_event(spec)
    assert rec.verdict in (QUENCHED, SURVIVED)
    assert rec.min_u_overall > 0
    assert (rec.verdict == QUENCHED) == (np.min(rec.u_final) <= rec.spec.theta_q)
    if rec.verdict == QUENCHED:
        assert rec.T_star_estimate >= rec.t_stop
    if amp == 0.0:
        T = ode_quench_time(OdeSpec(n=n, a=fc, y0=gc))
        if T is None:
            assert rec.verdict == SURVIVED

"""Parameter sweeps and regime studies built on the solver, ODE oracle and barriers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .barriers import (HypothesisViolated, LockstepBarrierMonitor, OrderingMonitor, constant_barrier,
                       propose_delta, sine_bracket, sine_gradient_subsolution,
                       sine_integral_floor, theorem1a_subsolution)
from .expr import Expr, eval_array, parse_expr, validate_assumptions
from .model import ProblemSpec, State, build_grid, sample_function
from .ode import limit_profile
from .records import CorruptRecord, load_record, save_record
from .solver import (QUENCHED, SURVIVED, ABORTED, RunRecord, SingularState, adaptive_dt,
                     centered_gradient, quench_arcs, run_until_event, step)

__all__ = [
    "SweepPlan", "RegimeRow", "RegimeTable", "epsilon_sweep", "certified_run",
    "ConvergenceRow", "limit_convergence_study",
    "LocationReport", "quench_location_study",
    "BatterySummary", "comparison_battery", "random_cosine_series",
]

AXES = ("eps", "alpha", "J")
DENSE = 10_000


def _dense(e: Expr, samples: int = DENSE) -> np.ndarray:
    return eval_array(e, np.arange(samples) / samples)


# --------------------------------------------------------------------------
# sweeps


@dataclass
class SweepPlan:
    """A one-dimensional sweep over ``eps``, ``alpha`` or the resolution ``J``.

    ``base`` should leave ``theta_q``/``t_max`` unset (``None``) to get the
    per-row defaults; ``horizon`` overrides ``t_max`` for every row.
    """

    base: ProblemSpec
    axis: str
    values: Sequence[float]
    horizon: Optional[float] = None
    out_dir: Optional[Path] = None
    barrier_offset: float = 0.01

    def __post_init__(self):
        if self.axis == "resolution":
            self.axis = "J"
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        vals = list(self.values)
        if not vals:
            raise ValueError("sweep values must be nonempty")
        if any(b <= a for a, b in zip(vals, vals[1:])) and any(b >= a for a, b in zip(vals, vals[1:])):
            raise ValueError("sweep values must be strictly sorted")
        self.values = vals

    def row_spec(self, value) -> ProblemSpec:
        kw = {self.axis: int(value) if self.axis == "J" else float(value)}
        if self.horizon is not None:
            kw["t_max"] = self.horizon
        return replace(self.base, **kw)


@dataclass
class RegimeRow:
    param: float
    verdict: str
    t_stop: float
    T_star: Optional[float]
    floor: float
    certificate: str


@dataclass
class RegimeTable:
    axis: str
    rows: list = field(default_factory=list)
    records: list = field(default_factory=list)

    HEADER = ("param", "verdict", "t_stop", "T_star", "floor", "certificate")

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.HEADER)
            for r in self.rows:
                w.writerow([repr(float(r.param)), r.verdict, repr(float(r.t_stop)),
                            "" if r.T_star is None else repr(float(r.T_star)),
                            repr(float(r.floor)), r.certificate])
        return path

    def summary(self) -> str:
        lines = [f"{self.axis:>8s}  {'verdict':18s} {'t_stop':>12s} {'T_star':>12s} {'floor':>10s}  certificate"]
        for r in self.rows:
            T = "-" if r.T_star is None else f"{r.T_star:.6g}"
            lines.append(f"{r.param:8.4g}  {r.verdict:18s} {r.t_stop:12.6g} {T:>12s} "
                         f"{r.floor:10.4g}  {r.certificate}")
        return "\n".join(lines)


def _theory_label(spec: ProblemSpec) -> str:
    """Which proven statement (if any) covers this configuration."""
    if spec.alpha != 1.0:
        return "alpha>1 (small eps)" if spec.alpha > 1 else "alpha<1 (small eps)"
    fv, gv = _dense(spec.f), _dense(spec.g)
    if float(np.min(fv * gv)) > spec.n - 1:
        return "min fg > n-1"
    if float(fv.max() * gv.max()) < spec.n - 1:
        return "max f max g < n-1"
    return "open regime"


def certified_run(spec: ProblemSpec, barrier_offset: float = 0.01, monitor=None) -> RunRecord:
    """Run ``spec`` while checking every applicable barrier at every step.

    Applicable barriers: the constant ODE supersolution (when it quenches),
    the constant ODE subsolution (when it does not), both advanced on the
    run's own steps, and for ``alpha = 1`` with
    ``min fg > n-1`` the static subsolution ``eps (n-1)/(f - delta)``.  The
    outcome is written to ``record.extra["certificate"]``.
    """
    spec = spec.resolved()
    grid = spec.grid
    monitors = {}
    sup = constant_barrier(spec, use_max=True, offset=barrier_offset)
    if sup.constants["T_quench"] is not None:
        monitors["super:ConstantODE"] = LockstepBarrierMonitor(sup)
    sub = constant_barrier(spec, use_max=False, offset=barrier_offset)
    if sub.constants["T_quench"] is None:
        monitors["sub:ConstantODE"] = LockstepBarrierMonitor(sub)
    if spec.alpha == 1.0 and not spec.rescaled:
        delta = propose_delta(spec.f, spec.g, spec.n)
        if delta > 0:
            psi = theorem1a_subsolution(spec.f, delta, spec.n, g=spec.g)
            if spec.eps < psi.constants["eps0"]:
                monitors["sub:Theorem1aSub"] = OrderingMonitor(psi, grid, eps=spec.eps)

    def all_monitors(state):
        for m in monitors.values():
            m(state)
        if monitor is not None:
            monitor(state)

    rec = run_until_event(spec, monitor=all_monitors)
    cert = "uncertified"
    if rec.verdict == QUENCHED and "super:ConstantODE" in monitors:
        m = monitors["super:ConstantODE"]
        if m.holds():
            cert = f"super:ConstantODE(T={sup.constants['T_quench']:.6g})"
    elif rec.verdict == SURVIVED:
        for key in ("sub:Theorem1aSub", "sub:ConstantODE"):
            if key in monitors and monitors[key].holds():
                cert = key
                break
    label = _theory_label(spec)
    if cert == "uncertified" and label == "open regime":
        cert = "uncertified(outside proven theory)"
    rec.extra["certificate"] = cert
    rec.extra["theory"] = label
    rec.extra["barrier_margins"] = {k: m.worst for k, m in monitors.items()}
    if "super:ConstantODE" in monitors:
        rec.extra["super_barrier_T"] = sup.constants["T_quench"]
    return rec


def _regime_row(value, rec: RunRecord) -> RegimeRow:
    spec = rec.spec
    scale = 1.0 if spec.rescaled else spec.eps ** min(spec.alpha, 1.0)
    return RegimeRow(param=float(value), verdict=rec.verdict, t_stop=rec.t_stop,
                     T_star=rec.T_star_estimate, floor=rec.min_u_overall / scale,
                     certificate=rec.extra.get("certificate", "uncertified"))


def epsilon_sweep(plan: SweepPlan) -> RegimeTable:
    """Run every row of ``plan`` with barrier certificates.

    With ``out_dir`` set each row is saved as ``row_NNN.{csv,json}`` and the
    table as ``regime.csv``; rows whose files already load cleanly are not
    rerun.
    """
    table = RegimeTable(plan.axis)
    out = Path(plan.out_dir) if plan.out_dir is not None else None
    for i, value in enumerate(plan.values):
        stem = out / f"row_{i:03d}" if out is not None else None
        rec = None
        if stem is not None:
            try:
                rec = load_record(stem)
            except (FileNotFoundError, CorruptRecord):
                rec = None
        if rec is None:
            try:
                rec = certified_run(plan.row_spec(value), plan.barrier_offset)
            except (SingularState, ValueError, ArithmeticError) as err:
                spec = plan.row_spec(value)
                rec = RunRecord(spec=spec, series={c: np.array([]) for c in
                                                   ("t", "u_min", "x_argmin", "u_max", "ux_max", "eps_ut_max")},
                                verdict=ABORTED, t_stop=0.0, u_final=np.zeros(spec.J),
                                abort_reason=f"{type(err).__name__}: {err}",
                                extra={"certificate": "uncertified"})
            if stem is not None and rec.series["t"].size:
                save_record(rec, stem)
        table.rows.append(_regime_row(value, rec))
        table.records.append(rec)
    if out is not None:
        table.to_csv(out / "regime.csv")
    return table


# --------------------------------------------------------------------------
# eps -> 0 convergence to the pointwise limit problem


@dataclass
class ConvergenceRow:
    eps: float
    sup_error: float
    T_rescaled: Optional[float]
    T_limit: float
    verdict: str


def limit_convergence_study(base: ProblemSpec, eps_list: Sequence[float], n_times: int = 8,
                            fraction: float = 0.8, override: bool = False) -> list[ConvergenceRow]:
    """Compare ``u(x, eps^2 t)/eps`` with the pointwise limit ODE on a shared lattice.

    The lattice is every grid node times ``fraction * T_lim * k / n_times``
    for ``k = 1..n_times``, where ``T_lim`` is the earliest quench time of the
    limit problem.  ``T_rescaled`` is the extrapolated ``T*_eps / eps^2``.
    """
    grid = base.grid
    fv, gv = _dense(base.f), _dense(base.g)
    if not override and not float(np.max(fv * gv)) < base.n - 1:
        raise HypothesisViolated("max fg < n-1 fails on the sample grid")
    T_nodes = limit_profile(base.f, base.g, base.n, grid, 0.0).quench_time
    T_lim = float(np.min(T_nodes))
    if not math.isfinite(T_lim):
        raise HypothesisViolated("limit problem does not quench")
    times = fraction * T_lim * np.arange(1, n_times + 1) / n_times
    limits = [limit_profile(base.f, base.g, base.n, grid, float(t)).w for t in times]

    rows = []
    for eps in eps_list:
        e2 = eps * eps
        spec = replace(base, eps=float(eps), alpha=1.0, rescaled=False,
                       snapshot_times=tuple(e2 * t for t in times))
        rec = run_until_event(spec)
        err = 0.0
        for t, w_lim in zip(times, limits):
            w = rec.snapshot_at(e2 * t) / eps
            err = max(err, float(np.max(np.abs(w - w_lim))))
        T_resc = None if rec.T_star_estimate is None else rec.T_star_estimate / e2
        rows.append(ConvergenceRow(float(eps), err, T_resc, T_lim, rec.verdict))
    return rows


# --------------------------------------------------------------------------
# quench location for symmetric monotone data


@dataclass
class LocationReport:
    record: RunRecord
    arcs: list
    locations: list
    contains_zero: bool
    interior_clear: bool
    min_ux_half: float
    t0: float
    c0: float
    M: float
    alpha_bound: float
    u_half_stop: float
    barrier_margin: float
    bracket_max: float
    final_asymmetry: float

    @property
    def passed(self) -> bool:
        return (self.contains_zero and self.interior_clear and self.u_half_stop >= self.alpha_bound > 0
                and self.barrier_margin >= -1e-6 and self.bracket_max <= 0.0)

    def summary(self) -> str:
        return "\n".join([
            f"verdict           {self.record.verdict} at t={self.record.t_stop:.6g}"
            f" (T* ~ {self.record.T_star_estimate})",
            f"locations         {self.locations}",
            f"arc contains 0    {self.contains_zero}",
            f"interior clear    {self.interior_clear}",
            f"min u_x on [0,.5] {self.min_ux_half:.3e}",
            f"sine barrier      t0={self.t0:.6g} c0={self.c0:.4g} M={self.M:.4g}",
            f"alpha bound       {self.alpha_bound:.4e} <= u(1/2) = {self.u_half_stop:.4e}",
            f"u_x - w margin    {self.barrier_margin:.3e}; bracket max {self.bracket_max:.3e}",
            f"final asymmetry   {self.final_asymmetry:.3e}",
        ])


def quench_location_study(spec: ProblemSpec, a: float = 0.05, a_star: float = 0.1,
                          b: float = 0.45, margin: float = 1.01, snapshot_stride: int = 50,
                          tol: float = 1e-10, monitor=None) -> LocationReport:
    """Run symmetric monotone data to quench and collect the location evidence.

    The sine subsolution of the gradient inequality is fitted at the last
    snapshot ``t0 <= t_stop/2`` with ``c0 = min u_x`` over ``[a, b]``; it then
    yields the floor ``alpha_bound`` for ``u(1/2)`` and is compared with the
    discrete ``u_x`` at every later snapshot.
    """
    rep = validate_assumptions(spec.f, spec.g, DENSE, tol)
    if not rep.a1 or not rep.a2:
        raise HypothesisViolated("assumptions fail:\n" + rep.summary())
    fv, gv = _dense(spec.f), _dense(spec.g)
    if not float(fv.max() * gv.max()) < spec.n - 1:
        raise HypothesisViolated("max f * max g < n-1 fails")
    if not 0 < a < a_star < b < 0.5:
        raise ValueError("need 0 < a < a_star < b < 1/2")

    spec = replace(spec, snapshot_stride=snapshot_stride)
    grid = spec.grid
    J = grid.J
    half = slice(0, J // 2 + 1)
    worst = [math.inf]

    def sign_monitor(state):
        worst[0] = min(worst[0], float(np.min(centered_gradient(state.u, grid.dx)[half])))
        if monitor is not None:
            monitor(state)

    rec = run_until_event(spec, monitor=sign_monitor)
    if rec.verdict != QUENCHED:
        raise RuntimeError(f"run did not quench: {rec.verdict} {rec.abort_reason}")
    spec = rec.spec
    arcs = quench_arcs(rec.u_final, spec.theta_q, grid)
    flagged = rec.u_final <= 2 * spec.theta_q
    x = grid.x
    contains_zero = bool(flagged[0])
    interior_clear = not bool(np.any(flagged & (x >= a_star) & (x <= 1 - a_star)))

    snaps = sorted(rec.snapshots, key=lambda s: s[0])
    early = [s for s in snaps if s[0] <= rec.t_stop / 2]
    t0, u0 = early[-1]
    on_ab = (x >= a) & (x <= b)
    c0 = float(np.min(centered_gradient(u0, grid.dx)[on_ab]))
    f_max = float(fv.max())
    w = sine_gradient_subsolution(c0, a, b, f_max, margin, t0=t0)
    T_star = rec.T_star_estimate
    alpha_bound = sine_integral_floor(w, a_star, T_star / 2)
    fx = spec.forcing()[on_ab]

    barrier_margin = math.inf
    bracket_max = -math.inf
    for t, u in snaps:
        if t < t0:
            continue
        ux = centered_gradient(u, grid.dx)[on_ab]
        barrier_margin = min(barrier_margin, float(np.min(ux - w(x[on_ab], t))))
        bracket_max = max(bracket_max, float(np.max(sine_bracket(w, x[on_ab], t, fx, ux))))
    u_final = rec.u_final
    return LocationReport(
        record=rec, arcs=arcs, locations=[arc.x_min for arc in arcs],
        contains_zero=contains_zero, interior_clear=interior_clear, min_ux_half=worst[0],
        t0=t0, c0=c0, M=w.constants["M"], alpha_bound=alpha_bound,
        u_half_stop=float(u_final[J // 2]), barrier_margin=barrier_margin,
        bracket_max=bracket_max,
        final_asymmetry=float(np.max(np.abs(u_final - u_final[grid.mirror()]))))


# --------------------------------------------------------------------------
# discrete comparison battery


@dataclass
class BatterySummary:
    count: int
    passed: int
    first_violation: Optional[dict] = None
    worst_gap: float = -math.inf

    @property
    def all_passed(self) -> bool:
        return self.passed == self.count


def random_cosine_series(rng: np.random.Generator, modes: int = 4, floor: float = 0.2,
                         mean_range=(0.5, 1.0)) -> str:
    """Random trigonometric polynomial with ``modes`` modes and minimum above ``floor``."""
    mean = float(rng.uniform(*mean_range))
    budget = (mean - floor) * rng.uniform(0.3, 0.95)
    weights = rng.dirichlet(np.ones(2 * modes)) * budget
    signs = rng.choice([-1.0, 1.0], size=2 * modes)
    terms = [repr(round(mean, 12))]
    for k in range(1, modes + 1):
        ca = float(signs[2 * k - 2] * weights[2 * k - 2])
        cb = float(signs[2 * k - 1] * weights[2 * k - 1])
        terms.append(f"{'+' if ca >= 0 else '-'}{abs(ca)!r}*cos({2 * k}*pi*x)")
        terms.append(f"{'+' if cb >= 0 else '-'}{abs(cb)!r}*sin({2 * k}*pi*x)")
    return "".join(terms)


def comparison_battery(count: int, seed: int, J: int = 64, n: int = 2, eps: float = 1.0,
                       t_max: float = 0.05, tol: float = 1e-12) -> BatterySummary:
    """Check discrete ordering preservation on random ordered pairs ``g1 <= g2``.

    Both members of a pair share ``f`` and the step sequence (the smaller of
    the two adaptive steps) of the explicit monotone scheme.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    summary = BatterySummary(count=count, passed=0)
    for k in range(count):
        f_src = random_cosine_series(rng, floor=0.2, mean_range=(0.4, 0.8))
        g1_src = random_cosine_series(rng)
        if k == 0:
            g2_src = g1_src
        else:
            shift = float(rng.uniform(0.0, 0.3))
            bump_mode = int(rng.integers(1, 5))
            bump = float(rng.uniform(0.0, 0.2))
            g2_src = (f"{g1_src}+{shift!r}+{bump!r}*(1+cos({2 * bump_mode}*pi*x"
                      f"+{float(rng.uniform(0, 2 * math.pi))!r}))")
        ok, info = _ordered_pair_run(f_src, g1_src, g2_src, J, n, eps, t_max, tol)
        summary.worst_gap = max(summary.worst_gap, info["worst_gap"])
        if ok:
            summary.passed += 1
        elif summary.first_violation is None:
            summary.first_violation = {"pair": k, "f": f_src, "g1": g1_src, "g2": g2_src, **info}
    return summary


def _ordered_pair_run(f_src, g1_src, g2_src, J, n, eps, t_max, tol):
    s1 = ProblemSpec(f=f_src, g=g1_src, n=n, eps=eps, J=J, t_max=t_max).resolved()
    s2 = replace(s1, g=parse_expr(g2_src))
    grid = s1.grid
    f = s1.forcing()
    a, b = State(0.0, s1.initial_profile()), State(0.0, s2.initial_profile())
    theta = s1.theta_q
    worst = float(np.max(a.u - b.u))
    steps = 0
    while a.t < t_max and min(a.u.min(), b.u.min()) > theta:
        dt = min(adaptive_dt(a, s1, grid, f), adaptive_dt(b, s2, grid, f), t_max - a.t)
        a, b = step(a, dt, s1, grid, f), step(b, dt, s2, grid, f)
        steps += 1
        gap = a.u - b.u
        m = float(np.max(gap))
        worst = max(worst, m)
        if m > tol:
            j = int(np.argmax(gap))
            return False, {"step": steps, "node": j, "gap": m, "worst_gap": worst}
    return True, {"steps": steps, "worst_gap": worst}

"""Finite-difference evolution of the periodic profile equation.

The profile ``u`` of an axisymmetric surface moved by forced mean curvature
flow obeys

    u_t = u_xx / (1 + u_x^2) - (n-1)/u + (f(x)/eps) sqrt(1 + u_x^2),
    u(x, 0) = eps^alpha g(x),

on the unit circle.  Space is discretised with centred differences;
time with forward Euler (``explicit-monotone``) or with the diffusion term
taken implicitly using a frozen coefficient (``imex``).  Runs stop when the
minimum of ``u`` drops below the quench threshold, and the remaining time to
pinch-off is extrapolated from the dominant balance ``u_t ~ -(n-1)/u``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .model import Grid, ProblemSpec, State
from .tridiag import LinearSolveFailure, solve_cyclic_tridiagonal

__all__ = [
    "SingularState", "NotQuenched", "DegenerateDimension", "LinearSolveFailure",
    "QUENCHED", "SURVIVED", "ABORTED", "SERIES_COLUMNS",
    "RunRecord", "QuenchArc", "discrete_rhs", "centered_gradient", "step", "adaptive_dt",
    "run_until_event", "extrapolate_quench_time", "fit_quench_time",
    "quench_arcs", "quench_locations",
]

QUENCHED = "Quenched"
SURVIVED = "SurvivedToHorizon"
ABORTED = "Aborted"

SERIES_COLUMNS = ("t", "u_min", "x_argmin", "u_max", "ux_max", "eps_ut_max")


class SingularState(ArithmeticError):
    pass


class NotQuenched(ValueError):
    pass


class DegenerateDimension(ValueError):
    pass


def _coefficients(spec: ProblemSpec):
    """(diffusion factor, gradient factor, forcing factor) of the evolved equation."""
    if spec.rescaled:
        e2 = spec.eps ** 2
        return e2, e2, 1.0
    return 1.0, 1.0, 1.0 / spec.eps


def centered_gradient(u: np.ndarray, dx: float) -> np.ndarray:
    up, um = np.roll(u, -1), np.roll(u, 1)
    return (up - um) / (2.0 * dx)


def _differences(u, dx):
    up, um = np.roll(u, -1), np.roll(u, 1)
    d1 = (up - um) / (2.0 * dx)
    # (up + um) is commutative, so mirrored nodes see bitwise identical sums
    d2 = ((up + um) - 2.0 * u) / (dx * dx)
    return d1, d2


def discrete_rhs(state: State, spec: ProblemSpec, grid: Optional[Grid] = None,
                 forcing: Optional[np.ndarray] = None) -> np.ndarray:
    """Semi-discrete right-hand side at every node."""
    u = state.u
    if not np.min(u) > 0.0:
        raise SingularState(f"non-positive profile at t={state.t!r}")
    grid = grid or spec.grid
    f = spec.forcing() if forcing is None else forcing
    A, B, F = _coefficients(spec)
    d1, d2 = _differences(u, grid.dx)
    q = 1.0 + B * d1 * d1
    return A * d2 / q - (spec.n - 1) / u + F * f * np.sqrt(q)


def step(state: State, dt: float, spec: ProblemSpec, grid: Optional[Grid] = None,
         forcing: Optional[np.ndarray] = None) -> State:
    """Advance one step of size ``dt`` with the scheme named in ``spec``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = grid or spec.grid
    f = spec.forcing() if forcing is None else forcing
    u = state.u
    if spec.scheme == "explicit-monotone":
        return State(state.t + dt, u + dt * discrete_rhs(state, spec, grid, f))

    if not np.min(u) > 0.0:
        raise SingularState(f"non-positive profile at t={state.t!r}")
    A, B, F = _coefficients(spec)
    dx = grid.dx
    d1, _ = _differences(u, dx)
    q = 1.0 + B * d1 * d1
    r = dt * A / (q * dx * dx)
    explicit = -(spec.n - 1) / u + F * f * np.sqrt(q)
    rhs = u + dt * explicit
    # averaging with the solve of the mirrored system makes the solver
    # reflection-equivariant to the last bit
    m = grid.mirror()
    a = solve_cyclic_tridiagonal(-r, 1.0 + 2.0 * r, -r, rhs)
    rm = r[m]
    b = solve_cyclic_tridiagonal(-rm, 1.0 + 2.0 * rm, -rm, rhs[m])[m]
    return State(state.t + dt, 0.5 * (a + b))


def adaptive_dt(state: State, spec: ProblemSpec, grid: Optional[Grid] = None,
                forcing: Optional[np.ndarray] = None) -> float:
    """Step size from the diffusion, reaction and forcing caps, clamped to ``dt_max``.

    The diffusion cap ``c_diff dx^2`` applies only to the explicit scheme.
    """
    u = state.u
    umin = float(np.min(u))
    if not umin > 0.0:
        raise SingularState(f"non-positive profile at t={state.t!r}")
    grid = grid or spec.grid
    f = spec.forcing() if forcing is None else forcing
    A, B, F = _coefficients(spec)
    caps = [spec.dt_max, spec.c_react * umin ** 2 / max(spec.n - 1, 1)]
    if spec.scheme == "explicit-monotone":
        caps.append(spec.c_diff * grid.dx ** 2 / A)
    fmax = float(np.max(np.abs(f)))
    if fmax > 0:
        caps.append(spec.c_force * umin / (F * fmax))
    return min(caps)


@dataclass
class QuenchArc:
    """Connected run of nodes below ``2 theta_q``; ``start``..``stop`` inclusive, mod J."""

    start: int
    stop: int
    argmin: int
    x_min: float
    whole_circle: bool = False


@dataclass
class RunRecord:
    """Diagnostics and outcome of one run.

    ``series`` maps each name in :data:`SERIES_COLUMNS` to a float array.
    ``snapshots`` is a list of ``(t, u)`` pairs.  ``max_asymmetry`` and
    ``min_u_overall`` are tracked at every step, not only at recorded ones.
    """

    spec: ProblemSpec
    series: dict
    verdict: str
    t_stop: float
    u_final: np.ndarray
    T_star_estimate: Optional[float] = None
    T_star_fit: Optional[float] = None
    fit_residual: Optional[float] = None
    quench_locations: list = field(default_factory=list)
    step_count: int = 0
    wall_time: float = 0.0
    max_asymmetry: float = 0.0
    min_u_overall: float = math.inf
    snapshots: list = field(default_factory=list)
    abort_reason: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def quenched(self) -> bool:
        return self.verdict == QUENCHED

    def snapshot_at(self, t: float, tol: float = 1e-12):
        """Profile at time ``t``: an exact snapshot, else linear interpolation between neighbours."""
        snaps = sorted(self.snapshots, key=lambda s: s[0])
        if not snaps:
            raise KeyError("record has no snapshots")
        ts = np.array([s[0] for s in snaps])
        j = int(np.argmin(np.abs(ts - t)))
        if abs(ts[j] - t) <= tol * max(1.0, abs(t)):
            return snaps[j][1]
        k = int(np.searchsorted(ts, t))
        if k == 0 or k == len(ts):
            raise KeyError(f"no snapshot at or bracketing t={t!r}")
        (t0, u0), (t1, u1) = snaps[k - 1], snaps[k]
        lam = (t - t0) / (t1 - t0)
        return (1 - lam) * u0 + lam * u1


def _diagnostics(state, spec, grid, f, A_rhs):
    u = state.u
    j = int(np.argmin(u))
    d1 = centered_gradient(u, grid.dx)
    ut_scale = 1.0 if spec.rescaled else spec.eps
    return (state.t, float(u[j]), float(grid.x[j]), float(np.max(u)),
            float(np.max(np.abs(d1))), ut_scale * float(np.max(np.abs(A_rhs))))


def run_until_event(spec: ProblemSpec, monitor: Optional[Callable[[State], None]] = None,
                    initial: Optional[np.ndarray] = None) -> RunRecord:
    """Evolve from ``eps^alpha g`` until quench, horizon or breakdown.

    ``monitor`` (if given) is called with every accepted state, including
    the initial one.  Requested ``snapshot_times`` are hit exactly by
    shortening the step that would cross them.
    """
    spec = spec.resolved()
    grid = spec.grid
    f = spec.forcing()
    mirror = grid.mirror()
    u = spec.initial_profile() if initial is None else np.array(initial, dtype=float)
    state = State(0.0, u)
    theta = spec.theta_q
    pending = sorted(set(t for t in spec.snapshot_times if 0.0 <= t <= spec.t_max))

    rows = []
    snapshots = []
    max_asym = float(np.max(np.abs(u - u[mirror])))
    min_u = float(np.min(u))
    steps = 0
    verdict = None
    reason = ""
    wall0 = time.perf_counter()

    if pending and pending[0] == 0.0:
        snapshots.append((0.0, u.copy()))
        pending.pop(0)
    if spec.snapshot_stride:
        if not snapshots:
            snapshots.append((0.0, u.copy()))
    if not (np.all(np.isfinite(u)) and np.min(u) > 0.0):
        series = {name: np.array([]) for name in SERIES_COLUMNS}
        return RunRecord(spec=spec, series=series, verdict=ABORTED, t_stop=0.0, u_final=u.copy(),
                         max_asymmetry=max_asym, min_u_overall=min_u, snapshots=snapshots,
                         abort_reason="initial profile is not finite and positive")
    if monitor is not None:
        monitor(state)
    rhs = discrete_rhs(state, spec, grid, f)
    rows.append(_diagnostics(state, spec, grid, f, rhs))

    while True:
        if np.min(state.u) <= theta:
            verdict = QUENCHED
            break
        if state.t >= spec.t_max:
            verdict = SURVIVED
            break
        while pending and pending[0] <= state.t:
            pending.pop(0)
        try:
            dt = adaptive_dt(state, spec, grid, f)
            dt = min(dt, spec.t_max - state.t)
            hit = False
            if pending and state.t + dt >= pending[0]:
                dt = pending[0] - state.t
                hit = True
            new = step(state, dt, spec, grid, f)
            if hit:
                new.t = pending.pop(0)
            elif spec.t_max - new.t <= 1e-14 * spec.t_max:
                new.t = spec.t_max
        except (SingularState, LinearSolveFailure, FloatingPointError) as err:
            verdict, reason = ABORTED, f"{type(err).__name__}: {err}"
            break
        if not np.all(np.isfinite(new.u)):
            verdict, reason = ABORTED, f"non-finite values after step {steps + 1} at t={new.t!r}"
            break
        if not np.min(new.u) > 0.0:
            verdict, reason = ABORTED, f"non-positive profile after step {steps + 1} at t={new.t!r}"
            break
        state = new
        steps += 1
        max_asym = max(max_asym, float(np.max(np.abs(state.u - state.u[mirror]))))
        min_u = min(min_u, float(np.min(state.u)))
        if monitor is not None:
            monitor(state)
        done = np.min(state.u) <= theta or state.t >= spec.t_max
        if hit:
            snapshots.append((state.t, state.u.copy()))
        elif spec.snapshot_stride and (steps % spec.snapshot_stride == 0 or done):
            snapshots.append((state.t, state.u.copy()))
        if steps % spec.record_stride == 0 or done or hit:
            rhs = discrete_rhs(state, spec, grid, f)
            rows.append(_diagnostics(state, spec, grid, f, rhs))

    if verdict == ABORTED and rows[-1][0] != state.t:
        try:
            rows.append(_diagnostics(state, spec, grid, f, discrete_rhs(state, spec, grid, f)))
        except SingularState:
            pass

    series = {name: np.array([r[i] for r in rows]) for i, name in enumerate(SERIES_COLUMNS)}
    record = RunRecord(spec=spec, series=series, verdict=verdict, t_stop=state.t,
                       u_final=state.u.copy(), step_count=steps,
                       wall_time=time.perf_counter() - wall0, max_asymmetry=max_asym,
                       min_u_overall=min_u, snapshots=snapshots, abort_reason=reason)
    if verdict == QUENCHED:
        record.quench_locations = quench_locations(record, grid)
        if spec.n >= 2:
            record.T_star_estimate = extrapolate_quench_time(record, spec)
            record.T_star_fit, record.fit_residual = fit_quench_time(record, spec)
    return record


def extrapolate_quench_time(record: RunRecord, spec: Optional[ProblemSpec] = None) -> float:
    """``t_stop + u_min(t_stop)^2 / (2(n-1))`` from the near-pinch balance ``u_t = -(n-1)/u``."""
    spec = spec or record.spec
    if record.verdict != QUENCHED:
        raise NotQuenched(f"run verdict is {record.verdict}")
    if spec.n < 2:
        raise DegenerateDimension("n = 1 has no singular term to drive the pinch")
    u_stop = float(np.min(record.u_final))
    return record.t_stop + u_stop ** 2 / (2.0 * (spec.n - 1))


def fit_quench_time(record: RunRecord, spec: Optional[ProblemSpec] = None, last: int = 8):
    """Least-squares fit of ``u_min^2 = k (T - t)`` on the last recorded samples.

    Returns ``(T, residual)`` where the residual is the RMS misfit of
    ``u_min`` relative to its last value; ``(None, None)`` with fewer than
    three samples.
    """
    spec = spec or record.spec
    if record.verdict != QUENCHED:
        raise NotQuenched(f"run verdict is {record.verdict}")
    if spec.n < 2:
        raise DegenerateDimension("n = 1 has no singular term to drive the pinch")
    t = record.series["t"][-last:]
    u = record.series["u_min"][-last:]
    if t.size < 3:
        return None, None
    slope, intercept = np.polyfit(t, u ** 2, 1)
    if not slope < 0:
        return None, None
    T = -intercept / slope
    model = np.sqrt(np.clip(slope * t + intercept, 0.0, None))
    residual = float(np.sqrt(np.mean((model - u) ** 2)) / max(u[-1], 1e-300))
    return float(T), residual


def quench_arcs(u: np.ndarray, theta: float, grid: Grid) -> list[QuenchArc]:
    """Cluster nodes with ``u <= 2 theta`` into periodic arcs."""
    J = grid.J
    flagged = u <= 2.0 * theta
    if not flagged.any():
        return []
    if flagged.all():
        j = int(np.argmin(u))
        return [QuenchArc(0, J - 1, j, float(grid.x[j]), whole_circle=True)]
    # start scanning just after an unflagged node so no arc wraps the scan origin
    origin = int(np.flatnonzero(~flagged)[0])
    arcs = []
    current = None
    for k in range(1, J + 1):
        j = (origin + k) % J
        if flagged[j]:
            if current is None:
                current = [j, j]
            else:
                current[1] = j
        elif current is not None:
            arcs.append(current)
            current = None
    if current is not None:
        arcs.append(current)
    out = []
    for start, stop in arcs:
        idx = np.arange(start, start + (stop - start) % J + 1) % J
        jmin = int(idx[np.argmin(u[idx])])
        out.append(QuenchArc(start, stop, jmin, float(grid.x[jmin])))
    out.sort(key=lambda a: a.x_min)
    return out


def quench_locations(record: RunRecord, grid: Optional[Grid] = None) -> list[float]:
    """Minimising node of every quench arc, as ``x`` in ``[0, 1)``."""
    if record.verdict != QUENCHED:
        raise NotQuenched(f"run verdict is {record.verdict}")
    grid = grid or record.spec.grid
    return [a.x_min for a in quench_arcs(record.u_final, record.spec.theta_q, grid)]

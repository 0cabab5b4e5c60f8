"""Spatially constant reduction ``y' = -(n-1)/y + a/eps`` and its pointwise limit problem.

The closed form comes from separating variables,
``dt = eps y dy / (a y - c)`` with ``c = eps (n-1)``, whose antiderivative is
``eps (y/a + (c/a^2) ln|a y - c|)``.  An adaptive RK4 integrator provides an
independent route to the same trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .expr import Expr
from .model import Grid, sample_function

__all__ = [
    "OdeSpec", "OdeTrajectory", "NonPositiveY", "StepUnderflow",
    "ode_rhs", "integrate_ode", "ode_quench_time", "ode_time_to_reach", "ode_exact",
    "limit_profile", "LimitProfile",
]


class NonPositiveY(ValueError):
    pass


class StepUnderflow(RuntimeError):
    pass


@dataclass(frozen=True)
class OdeSpec:
    n: int
    a: float
    eps: float = 1.0
    alpha: float = 1.0
    y0: Optional[float] = None
    b: float = 1.0

    def __post_init__(self):
        if self.y0 is None:
            object.__setattr__(self, "y0", self.eps ** self.alpha * self.b)
        if self.n < 1 or not (self.a > 0 and self.eps > 0 and self.alpha > 0 and self.y0 > 0):
            raise ValueError(f"invalid ODE spec {self!r}")

    @property
    def c(self) -> float:
        return self.eps * (self.n - 1)


@dataclass
class OdeTrajectory:
    t: np.ndarray
    y: np.ndarray
    event: str  # "HitFloor" or "ReachedHorizon"
    t_event: float
    y_floor: float = 0.0

    @property
    def hit_floor(self) -> bool:
        return self.event == "HitFloor"


def ode_rhs(y: float, spec: OdeSpec) -> float:
    if not y > 0:
        raise NonPositiveY(f"y must be positive, got {y!r}")
    return -(spec.n - 1) / y + spec.a / spec.eps


def integrate_ode(spec: OdeSpec, t_end: float, y_floor: float,
                  rtol: float = 1e-10, h_min: float = 1e-15) -> OdeTrajectory:
    """Adaptive RK4 with step doubling.

    Steps are also capped at ``0.05 y^2 eps / max(a, n-1)`` so that the
    approach to ``y = 0`` is resolved geometrically.  The crossing of
    ``y_floor`` is located by linear interpolation inside the final step.
    :class:`StepUnderflow` is raised when error control pushes the step
    below ``h_min`` times the local time scale ``y / |y'|``.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if not 0 < y_floor < spec.y0:
        raise ValueError("need 0 < y_floor < y0")
    n1, rate, eps = spec.n - 1, spec.a / spec.eps, spec.eps
    cap_scale = 0.05 * eps / max(spec.a, n1, 1e-300)

    def F(y):
        return -n1 / y + rate

    def rk4(y, h):
        k1 = F(y)
        y2 = y + 0.5 * h * k1
        if y2 <= 0:
            return -1.0
        k2 = F(y2)
        y3 = y + 0.5 * h * k2
        if y3 <= 0:
            return -1.0
        k3 = F(y3)
        y4 = y + h * k3
        if y4 <= 0:
            return -1.0
        k4 = F(y4)
        return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    t, y = 0.0, float(spec.y0)
    ts, ys = [t], [y]
    h = min(1e-3 * t_end, cap_scale * y * y)
    while t < t_end:
        cap = cap_scale * y * y
        h = min(h, cap, t_end - t)
        full = rk4(y, h)
        mid = rk4(y, 0.5 * h)
        two = rk4(mid, 0.5 * h) if mid > 0 else -1.0
        if full <= 0 or two <= 0:
            err = math.inf
        else:
            err = abs(two - full) / 15.0
        tol = rtol * max(abs(y), 1e-300)
        if err > tol:
            h_new = 0.9 * h * (tol / err) ** 0.2 if math.isfinite(err) else 0.25 * h
            h = max(min(h_new, 0.5 * h), 0.1 * h)
            # relative to the local time scale y/|y'|, which shrinks like y^2 near the floor
            if h < h_min * abs(y / F(y)) if F(y) != 0 else h < h_min * max(1.0, t):
                raise StepUnderflow(f"step size {h:g} underflow at t={t!r}, y={y!r}")
            continue
        y_new = two + (two - full) / 15.0
        t_new = t + h
        if y_new <= y_floor:
            lam = (y - y_floor) / (y - y_new)
            t_hit = t + lam * h
            ts.append(t_hit)
            ys.append(y_floor)
            return OdeTrajectory(np.array(ts), np.array(ys), "HitFloor", t_hit, y_floor)
        t, y = t_new, y_new
        ts.append(t)
        ys.append(y)
        grow = 2.0 if err == 0 else min(2.0, 0.9 * (tol / err) ** 0.2)
        h *= max(grow, 1.0)
    return OdeTrajectory(np.array(ts), np.array(ys), "ReachedHorizon", t, y_floor)


def ode_quench_time(spec: OdeSpec) -> Optional[float]:
    """Exact time at which ``y`` reaches zero, or ``None`` if ``y`` never decreases."""
    a, c, y0, eps = spec.a, spec.c, spec.y0, spec.eps
    if a * y0 >= c:
        return None
    return eps * (-y0 / a + (c / a ** 2) * math.log(c / (c - a * y0)))


def ode_time_to_reach(spec: OdeSpec, y: float) -> float:
    """Exact time at which the trajectory passes through level ``y``.

    Returns ``inf`` if the level is never reached.
    """
    a, c, y0, eps = spec.a, spec.c, spec.y0, spec.eps
    if y == y0:
        return 0.0
    if c == 0.0:
        return eps * (y - y0) / a if y > y0 else math.inf
    s0 = a * y0 - c
    if s0 == 0.0:
        return math.inf
    if (y > y0) != (s0 > 0):
        return math.inf
    if s0 < 0 and y <= 0.0:
        return ode_quench_time(spec) if y == 0.0 else math.inf
    return eps * ((y - y0) / a + (c / a ** 2) * math.log((a * y - c) / s0))


def ode_exact(spec: OdeSpec, t) -> np.ndarray:
    """Exact solution values at time(s) ``t`` by inverting the closed form.

    After the quench time the value is 0.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    a, c, y0, eps = spec.a, spec.c, spec.y0, spec.eps
    out = np.empty_like(ts)
    T = ode_quench_time(spec)
    for i, ti in enumerate(ts):
        if ti <= 0.0:
            out[i] = y0
            continue
        if c == 0.0:
            out[i] = y0 + a * ti / eps
            continue
        s0 = a * y0 - c
        if s0 == 0.0:
            out[i] = y0
            continue
        if s0 < 0:
            if T is not None and ti >= T:
                out[i] = 0.0
                continue
            out[i] = brentq(lambda yy: ode_time_to_reach(spec, yy) - ti, 0.0, y0,
                            xtol=1e-15 * y0, rtol=4 * np.finfo(float).eps)
        else:
            lo, hi = y0, y0 + a * ti / eps
            out[i] = brentq(lambda yy: ode_time_to_reach(spec, yy) - ti, lo, hi,
                            xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps)
    return out if np.ndim(t) else out[:1].reshape(())


@dataclass
class LimitProfile:
    """Node values of the pointwise limit problem at one time.

    ``quench_time[j]`` is the exact quench time of node ``j`` (``inf`` if it
    never quenches); ``quenched[j]`` flags nodes whose quench time is at or
    before ``t``.
    """

    t: float
    w: np.ndarray
    quenched: np.ndarray
    quench_time: np.ndarray


def limit_profile(f: Expr, g: Expr, n: int, grid: Grid, t: float,
                  method: str = "exact", y_floor: float = 1e-10) -> LimitProfile:
    """Solve ``w_t = -(n-1)/w + f(x), w(x, 0) = g(x)`` independently at every node.

    ``method="exact"`` inverts the closed form; ``method="rk4"`` uses
    :func:`integrate_ode` per node.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    fv = sample_function(f, grid)
    gv = sample_function(g, grid)
    J = grid.J
    w = np.empty(J)
    Tq = np.empty(J)
    for j in range(J):
        spec = OdeSpec(n=n, a=float(fv[j]), eps=1.0, y0=float(gv[j]))
        T = ode_quench_time(spec)
        Tq[j] = math.inf if T is None else T
        if t == 0.0:
            w[j] = gv[j]
        elif method == "exact":
            w[j] = float(ode_exact(spec, t))
        elif method == "rk4":
            try:
                traj = integrate_ode(spec, t, y_floor)
            except StepUnderflow as err:
                raise StepUnderflow(f"node {j}: {err}") from err
            w[j] = 0.0 if traj.hit_floor else traj.y[-1]
        else:
            raise ValueError(f"unknown method {method!r}")
    return LimitProfile(t=t, w=w, quenched=Tq <= t, quench_time=Tq)

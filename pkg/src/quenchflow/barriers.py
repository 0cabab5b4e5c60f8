"""Closed-form sub- and supersolutions and their residual checks.

Sign convention for the profile operator

    N[phi] = phi_t - phi_xx / (1 + phi_x^2) + (n-1)/phi - (f/eps) sqrt(1 + phi_x^2)

is ``N <= 0`` for a subsolution and ``N >= 0`` for a supersolution.  For the
gradient inequality satisfied by ``v = u_x`` on ``[0, 1/2]``

    v_t >= v_xx / q + f v v_x / sqrt(q) - 2 v v_x^2 / q^2,   q = 1 + u_x^2,

a subsolution ``w`` makes ``w_t - w_xx/q - f w w_x/sqrt(q) + 2 w w_x^2/q^2 <= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .expr import BinOp, Const, Expr, differentiate, eval_array
from .model import Grid, ProblemSpec, sample_function
from .ode import OdeSpec, ode_exact, ode_quench_time, ode_rhs
from .solver import SingularState

__all__ = [
    "BarrierFn", "HypothesisViolated", "InvalidInterval",
    "pde_residual", "gradient_residual", "sine_bracket",
    "theorem1a_subsolution", "propose_delta", "epsilon_threshold",
    "short_time_envelope", "envelope_constant",
    "sine_gradient_subsolution", "sine_integral_floor", "constant_barrier",
    "OrderingMonitor", "LockstepBarrierMonitor", "EnvelopeMonitor",
]

DENSE = 10_000


class HypothesisViolated(ValueError):
    pass


class InvalidInterval(ValueError):
    pass


@dataclass
class BarrierFn:
    """A closed-form candidate barrier.

    ``value``, ``d_x``, ``d_xx`` and ``d_t`` are vectorised callables of
    ``(x, t)``.  ``frame="v"`` marks barriers written for ``v = u/eps``.
    """

    kind: str
    role: str  # "sub" or "super"
    target: str  # "profile" or "gradient"
    value: Callable
    d_x: Callable
    d_xx: Callable
    d_t: Callable
    constants: dict = field(default_factory=dict)
    t_window: tuple = (0.0, math.inf)
    frame: str = "u"

    def __call__(self, x, t):
        return self.value(np.asarray(x, dtype=float), t)

    def in_window(self, t: float) -> bool:
        lo, hi = self.t_window
        return lo <= t <= hi


def _fd(u, dx):
    up, um = np.roll(u, -1), np.roll(u, 1)
    return (up - um) / (2 * dx), ((up + um) - 2 * u) / (dx * dx)


def pde_residual(candidate, spec: ProblemSpec, t: float, grid: Optional[Grid] = None,
                 phi_t=None, forcing=None, frame: Optional[str] = None) -> np.ndarray:
    """Residual of the profile operator at the grid nodes.

    ``candidate`` is a :class:`BarrierFn` (exact derivatives) or an array of
    node values (centred differences; ``phi_t`` defaults to zero).  In
    ``frame="v"`` the candidate is read as ``v = u/eps`` and the returned
    value is ``eps * N[eps v]``, the residual of the equation for ``v``.
    """
    grid = grid or spec.grid
    x = grid.x
    f = spec.forcing() if forcing is None else np.asarray(forcing, dtype=float)
    if isinstance(candidate, BarrierFn):
        frame = frame or candidate.frame
        phi = candidate.value(x, t) + 0 * x
        px = candidate.d_x(x, t) + 0 * x
        pxx = candidate.d_xx(x, t) + 0 * x
        pt = candidate.d_t(x, t) + 0 * x
    else:
        frame = frame or "u"
        phi = np.asarray(candidate, dtype=float)
        px, pxx = _fd(phi, grid.dx)
        pt = np.zeros_like(phi) if phi_t is None else np.asarray(phi_t, dtype=float)
    scale = spec.eps if frame == "v" else 1.0
    phi, px, pxx, pt = scale * phi, scale * px, scale * pxx, scale * pt
    if not np.min(phi) > 0:
        raise SingularState("candidate must be positive at every node")
    q = 1.0 + px * px
    N = pt - pxx / q + (spec.n - 1) / phi - (f / spec.eps) * np.sqrt(q)
    return scale * N


# --------------------------------------------------------------------------
# static subsolution (n-1)/(f - delta)


def propose_delta(f: Expr, g: Expr, n: int, samples: int = DENSE) -> float:
    """``delta = (min fg - (n-1)) / (2 max g)``, positive only when ``min fg > n-1``."""
    xs = np.arange(samples) / samples
    fv, gv = eval_array(f, xs), eval_array(g, xs)
    return 0.5 * (float(np.min(fv * gv)) - (n - 1)) / float(np.max(gv))


def theorem1a_subsolution(f: Expr, delta: float, n: int, g: Optional[Expr] = None,
                          samples: int = DENSE) -> BarrierFn:
    """Static subsolution ``psi = (n-1)/(f - delta)`` of the equation for ``v = u/eps``.

    ``constants["c0"]`` is ``min psi``, the floor of ``u/eps``.  When ``g`` is
    given the slack hypothesis ``(f - delta) g > n - 1`` is checked as well.
    """
    xs = np.arange(samples) / samples
    fv = eval_array(f, xs)
    if not delta > 0:
        raise HypothesisViolated(f"delta must be positive, got {delta!r}")
    j = int(np.argmin(fv))
    if not fv[j] > delta:
        raise HypothesisViolated(f"min f = {fv[j]:g} <= delta at x={xs[j]:g}")
    if g is not None:
        gv = eval_array(g, xs)
        slack = (fv - delta) * gv - (n - 1)
        j = int(np.argmin(slack))
        if not slack[j] > 0:
            raise HypothesisViolated(
                f"(f - delta) g <= n - 1 at x={xs[j]:g} (min f g = {np.min(fv * gv):g})")
    psi = BinOp("/", Const(float(n - 1)), BinOp("-", f, Const(float(delta))))
    dpsi = differentiate(psi)
    d2psi = differentiate(dpsi)
    psi_v = eval_array(psi, xs)
    C = float(np.max(np.abs(eval_array(d2psi, xs))))
    constants = {"delta": float(delta), "n": n, "c0": float(np.min(psi_v)),
                 "C_delta": C, "eps0": epsilon_threshold(delta, C)}
    return BarrierFn(
        kind="Theorem1aSub", role="sub", target="profile", frame="v",
        value=lambda x, t: eval_array(psi, x), d_x=lambda x, t: eval_array(dpsi, x),
        d_xx=lambda x, t: eval_array(d2psi, x), d_t=lambda x, t: 0.0 * x,
        constants=constants)


def epsilon_threshold(delta: float, C: float) -> float:
    """``sqrt(delta / C)``; infinite when the curvature constant vanishes."""
    return math.inf if C == 0 else math.sqrt(delta / C)


# --------------------------------------------------------------------------
# short-time envelope eps^alpha g +- (C1/eps) t


def envelope_constant(spec: ProblemSpec, samples: int = DENSE):
    """Return ``(C1, sigma1)`` for the short-time envelope of ``spec``.

    With ``s = eps^alpha``::

        C1 = eps * (s max|g''| + (max f/eps) sqrt(s^2 max g'^2 + 1) + 2(n-1)/(s min g))
        sigma1 = eps * s * min g / (2 C1)

    which for ``alpha = 1`` is ``eps^2 max|g''| + max f sqrt(eps^2 max g'^2 + 1)
    + 2(n-1)/min g`` and ``eps^2 min g / (2 C1)``.
    """
    xs = np.arange(samples) / samples
    g1 = differentiate(spec.g)
    g2 = differentiate(g1)
    gv = eval_array(spec.g, xs)
    g1max = float(np.max(np.abs(eval_array(g1, xs))))
    g2max = float(np.max(np.abs(eval_array(g2, xs))))
    fmax = float(np.max(eval_array(spec.f, xs)))
    gmin = float(np.min(gv))
    s, eps, n1 = spec.scale, spec.eps, spec.n - 1
    rate = s * g2max + (fmax / eps) * math.sqrt(s * s * g1max * g1max + 1.0) + 2.0 * n1 / (s * gmin)
    C1 = eps * rate
    sigma1 = s * gmin / (2.0 * rate)
    return C1, sigma1


def short_time_envelope(spec: ProblemSpec, samples: int = DENSE):
    """Pair ``(psi_plus, psi_minus)`` = ``eps^alpha g +- (C1/eps) t`` valid on ``[0, sigma1]``."""
    C1, sigma1 = envelope_constant(spec, samples)
    g, g1 = spec.g, differentiate(spec.g)
    g2 = differentiate(g1)
    s, rate = spec.scale, C1 / spec.eps
    consts = {"C1": C1, "sigma1": sigma1}
    out = []
    for sign, role in ((1.0, "super"), (-1.0, "sub")):
        out.append(BarrierFn(
            kind="ShortTimeEnvelope", role=role, target="profile",
            value=lambda x, t, sign=sign: s * eval_array(g, x) + sign * rate * t,
            d_x=lambda x, t: s * eval_array(g1, x),
            d_xx=lambda x, t: s * eval_array(g2, x),
            d_t=lambda x, t, sign=sign: sign * rate + 0.0 * x,
            constants=dict(consts), t_window=(0.0, sigma1)))
    return tuple(out)


# --------------------------------------------------------------------------
# sine subsolution of the gradient inequality


def sine_gradient_subsolution(c0: float, a: float, b: float, f_max: float,
                              margin: float = 1.01, t0: float = 0.0,
                              quadratic_term: bool = True) -> BarrierFn:
    """``w = c0 exp(-M (t - t0)) sin(pi (x - a)/(b - a))`` on ``[a, b]``.

    ``M = margin * (k^2 + k c0 f_max + 2 k^2 c0^2)`` with ``k = pi/(b - a)``.
    The ``2 k^2 c0^2`` term bounds the ``2 w w_x^2 / q^2`` contribution of the
    gradient inequality; ``quadratic_term=False`` drops it, which is enough
    only when ``(margin - 1)(k^2 + k c0 f_max) >= 2 k^2 c0^2``.
    """
    if not (0.0 <= a < b <= 0.5):
        raise InvalidInterval(f"need 0 <= a < b <= 1/2, got a={a!r}, b={b!r}")
    if not c0 > 0 or not margin > 1:
        raise ValueError("need c0 > 0 and margin > 1")
    k = math.pi / (b - a)
    M = k * k + k * c0 * f_max
    if quadratic_term:
        M += 2.0 * k * k * c0 * c0
    M *= margin

    def amp(t):
        return c0 * np.exp(-M * (np.asarray(t, dtype=float) - t0))

    return BarrierFn(
        kind="SineGradientSub", role="sub", target="gradient",
        value=lambda x, t: amp(t) * np.sin(k * (x - a)),
        d_x=lambda x, t: amp(t) * k * np.cos(k * (x - a)),
        d_xx=lambda x, t: -amp(t) * k * k * np.sin(k * (x - a)),
        d_t=lambda x, t: -M * amp(t) * np.sin(k * (x - a)),
        constants={"c0": c0, "a": a, "b": b, "M": M, "k": k, "f_max": f_max,
                   "margin": margin, "t0": t0},
        t_window=(t0, math.inf))


def gradient_residual(w: BarrierFn, x, t, f_values, ux) -> np.ndarray:
    """``w_t - w_xx/q - f w w_x/sqrt(q) + 2 w w_x^2/q^2`` with ``q = 1 + ux^2``."""
    x = np.asarray(x, dtype=float)
    q = 1.0 + np.asarray(ux, dtype=float) ** 2
    W, Wx, Wxx, Wt = w.value(x, t), w.d_x(x, t), w.d_xx(x, t), w.d_t(x, t)
    return Wt - Wxx / q - f_values * W * Wx / np.sqrt(q) + 2.0 * W * Wx * Wx / q ** 2


def sine_bracket(w: BarrierFn, x, t, f_values, ux) -> np.ndarray:
    """Residual of :func:`gradient_residual` divided by ``w`` (the sign-carrying factor)."""
    c = w.constants
    x = np.asarray(x, dtype=float)
    q = 1.0 + np.asarray(ux, dtype=float) ** 2
    k, M = c["k"], c["M"]
    e = np.exp(-M * (t - c["t0"]))
    cos = np.cos(k * (x - c["a"]))
    return (-M + k * k / q - f_values * k * c["c0"] * e * cos / np.sqrt(q)
            + 2.0 * k * k * c["c0"] ** 2 * e * e * cos * cos / q ** 2)


def sine_integral_floor(w: BarrierFn, a_star: float, elapsed: float) -> float:
    """``c0 exp(-M elapsed) * integral_a^a_star sin(pi (y-a)/(b-a)) dy``."""
    c = w.constants
    a, b = c["a"], c["b"]
    if not a < a_star <= b:
        raise InvalidInterval("need a < a_star <= b")
    integral = (b - a) / math.pi * (1.0 - math.cos(math.pi * (a_star - a) / (b - a)))
    return c["c0"] * math.exp(-c["M"] * elapsed) * integral


# --------------------------------------------------------------------------
# spatially constant barriers from the ODE


def constant_barrier(spec: ProblemSpec, use_max: bool, offset: float = 0.0,
                     samples: int = DENSE) -> BarrierFn:
    """ODE barrier with ``a = max f, b = max g`` (supersolution) or the minima (subsolution).

    ``offset`` moves the initial value to ``eps^alpha b (1 +- offset)``,
    away from the data, which keeps the ordering strict at ``t = 0``.
    """
    xs = np.arange(samples) / samples
    fv, gv = eval_array(spec.f, xs), eval_array(spec.g, xs)
    if use_max:
        a, b, role, sgn = float(fv.max()), float(gv.max()), "super", 1.0
    else:
        a, b, role, sgn = float(fv.min()), float(gv.min()), "sub", -1.0
    if spec.rescaled:
        ode = OdeSpec(n=spec.n, a=a, eps=1.0, y0=b * (1.0 + sgn * offset))
    else:
        ode = OdeSpec(n=spec.n, a=a, eps=spec.eps, y0=spec.scale * b * (1.0 + sgn * offset))
    T = ode_quench_time(ode)

    def value(x, t):
        return float(ode_exact(ode, t)) + 0.0 * x

    def d_t(x, t):
        return ode_rhs(float(ode_exact(ode, t)), ode) + 0.0 * x

    zero = lambda x, t: 0.0 * x
    return BarrierFn(
        kind="ConstantODE", role=role, target="profile", value=value, d_x=zero, d_xx=zero,
        d_t=d_t, constants={"a": a, "b": b, "y0": ode.y0, "T_quench": T, "offset": offset,
                            "ode": ode},
        t_window=(0.0, math.inf if T is None else T))


# --------------------------------------------------------------------------
# run monitors


class OrderingMonitor:
    """Track nodewise ordering between a run and a profile barrier at every step.

    For a subsolution the violation is ``barrier - u``; for a
    supersolution ``u - barrier``.  Only times inside the barrier's window
    (and, optionally, up to ``t_until``) are checked.
    """

    def __init__(self, barrier: BarrierFn, grid: Grid, eps: float = 1.0,
                 t_until: float = math.inf):
        self.barrier = barrier
        self.x = grid.x
        self.scale = eps if barrier.frame == "v" else 1.0
        self.t_until = t_until
        self.worst = -math.inf
        self.worst_t = None
        self.checked = 0

    def __call__(self, state):
        t = state.t
        lo, hi = self.barrier.t_window
        if not (lo <= t < hi) or t > self.t_until:
            return
        b = self.scale * self.barrier.value(self.x, t)
        gap = b - state.u if self.barrier.role == "sub" else state.u - b
        m = float(np.max(gap))
        self.checked += 1
        if m > self.worst:
            self.worst, self.worst_t = m, t

    def holds(self, tol: float = 0.0) -> bool:
        return self.checked > 0 and self.worst <= tol


class LockstepBarrierMonitor:
    """Ordering against a constant ODE barrier advanced on the run's own time steps.

    The barrier value is updated with the forward Euler step of
    ``y' = -(n-1)/y + a/eps`` over each accepted step of the run.  On
    spatially constant profiles this is exactly what both schemes do, and the
    map ``y -> y + dt y'`` is increasing in ``y``, so discrete ordering is
    preserved without any tolerance.  ``continuous_worst`` records the same
    comparison against the exact ODE solution for reference.
    """

    def __init__(self, barrier: BarrierFn):
        if barrier.kind != "ConstantODE":
            raise ValueError("lockstep monitoring needs a ConstantODE barrier")
        self.barrier = barrier
        self.ode = barrier.constants["ode"]
        self.y = float(self.ode.y0)
        self.t = 0.0
        self.worst = -math.inf
        self.worst_t = None
        self.continuous_worst = -math.inf
        self.checked = 0

    def __call__(self, state):
        dt = state.t - self.t
        if dt > 0:
            # a barrier that has already collapsed stays at zero
            self.y = max(self.y + dt * ode_rhs(self.y, self.ode), 0.0) if self.y > 0 else 0.0
            self.t = state.t
        if self.barrier.role == "sub":
            m = self.y - float(np.min(state.u))
        else:
            m = float(np.max(state.u)) - self.y
        self.checked += 1
        if m > self.worst:
            self.worst, self.worst_t = m, state.t
        lo, hi = self.barrier.t_window
        if lo <= state.t < hi:
            exact = float(ode_exact(self.ode, state.t))
            c = exact - float(np.min(state.u)) if self.barrier.role == "sub" else float(np.max(state.u)) - exact
            self.continuous_worst = max(self.continuous_worst, c)

    def holds(self, tol: float = 0.0) -> bool:
        return self.checked > 0 and self.worst <= tol


class EnvelopeMonitor:
    """Count nodewise violations of ``|u - eps^alpha g| <= (C1/eps) t`` on ``[0, sigma1]``."""

    def __init__(self, spec: ProblemSpec, tol: float = 1e-12):
        self.C1, self.sigma1 = envelope_constant(spec)
        self.rate = self.C1 / spec.eps
        self.u0 = spec.initial_profile()
        self.tol = tol
        self.violations = 0
        self.checked = 0
        self.worst = -math.inf

    def __call__(self, state):
        if state.t > self.sigma1:
            return
        excess = np.abs(state.u - self.u0) - self.rate * state.t
        self.worst = max(self.worst, float(np.max(excess)))
        self.violations += int(np.count_nonzero(excess > self.tol * max(1.0, float(np.max(self.u0)))))
        self.checked += 1

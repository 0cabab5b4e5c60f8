"""Problem definition, periodic grid and sampled fields."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .expr import Expr, eval_array, parse_expr, to_string

__all__ = [
    "InvalidResolution", "InvalidSpec", "Grid", "State", "ProblemSpec",
    "build_grid", "sample_function", "default_theta", "default_horizon", "make_spec",
]

SCHEMES = ("explicit-monotone", "imex")


class InvalidResolution(ValueError):
    pass


class InvalidSpec(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform grid on the unit circle; node ``j`` sits at ``x = j/J``.

    Indices are taken mod ``J``, so node ``-1`` is node ``J - 1``.
    """

    J: int

    @property
    def dx(self) -> float:
        return 1.0 / self.J

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.J) / self.J

    def mirror(self) -> np.ndarray:
        """Index map ``j -> J - j (mod J)`` realising ``x -> 1 - x``."""
        return (-np.arange(self.J)) % self.J


def build_grid(J: int) -> Grid:
    if int(J) != J or J < 16 or J % 2:
        raise InvalidResolution(f"J must be an even integer >= 16, got {J!r}")
    return Grid(int(J))


def sample_function(e: Expr, grid: Grid) -> np.ndarray:
    """Pointwise values of ``e`` at the grid nodes.

    Evaluation errors carry the node index of the first failure.
    """
    return eval_array(e, grid.x)


@dataclass
class State:
    t: float
    u: np.ndarray


def _as_expr(e) -> Expr:
    return parse_expr(e) if isinstance(e, str) else e


@dataclass(frozen=True)
class ProblemSpec:
    """One evolution problem for the scaled profile equation.

    ``theta_q`` and ``t_max`` may be left as ``None``; :func:`make_spec` and
    :meth:`resolved` fill them with the defaults from :func:`default_theta`
    and :func:`default_horizon`.

    ``rescaled=True`` evolves ``w(x, s) = u(x, eps^2 s) / eps`` instead of
    ``u`` (only meaningful for ``alpha = 1``), whose equation is
    ``w_s = eps^2 w_xx / (1 + eps^2 w_x^2) - (n-1)/w + f sqrt(1 + eps^2 w_x^2)``.
    """

    f: Expr
    g: Expr
    n: int = 2
    eps: float = 1.0
    alpha: float = 1.0
    J: int = 256
    t_max: Optional[float] = None
    theta_q: Optional[float] = None
    scheme: str = "explicit-monotone"
    dt_max: float = 1e-2
    c_diff: float = 0.4
    c_react: float = 0.05
    c_force: float = 0.1
    record_stride: int = 10
    snapshot_stride: int = 0
    snapshot_times: tuple = ()
    rescaled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "f", _as_expr(self.f))
        object.__setattr__(self, "g", _as_expr(self.g))
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))
        if int(self.n) != self.n or self.n < 1:
            raise InvalidSpec(f"n must be an integer >= 1, got {self.n!r}")
        if not self.eps > 0 or not self.alpha > 0:
            raise InvalidSpec("eps and alpha must be positive")
        build_grid(self.J)
        if self.scheme not in SCHEMES:
            raise InvalidSpec(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.dt_max > 0:
            raise InvalidSpec("dt_max must be positive")
        if self.t_max is not None and not self.t_max > 0:
            raise InvalidSpec("t_max must be positive")
        if self.theta_q is not None and not self.theta_q > 0:
            raise InvalidSpec("theta_q must be positive")
        if self.record_stride < 1 or self.snapshot_stride < 0:
            raise InvalidSpec("record_stride must be >= 1 and snapshot_stride >= 0")

    @property
    def grid(self) -> Grid:
        return Grid(self.J)

    @property
    def scale(self) -> float:
        """Initial amplitude factor: ``eps**alpha`` (1 in the rescaled frame)."""
        return 1.0 if self.rescaled else self.eps ** self.alpha

    def initial_profile(self) -> np.ndarray:
        return self.scale * sample_function(self.g, self.grid)

    def forcing(self) -> np.ndarray:
        return sample_function(self.f, self.grid)

    def resolved(self) -> "ProblemSpec":
        """Copy with ``theta_q`` and ``t_max`` defaults filled in and checked."""
        spec = self
        if spec.theta_q is None:
            spec = replace(spec, theta_q=default_theta(spec))
        if spec.t_max is None:
            spec = replace(spec, t_max=default_horizon(spec))
        u0_min = float(spec.initial_profile().min())
        if not u0_min > spec.theta_q:
            raise InvalidSpec(f"initial minimum {u0_min:g} must exceed theta_q={spec.theta_q:g}")
        return spec

    def to_dict(self) -> dict:
        return {
            "f": to_string(self.f), "g": to_string(self.g), "n": self.n,
            "eps": self.eps, "alpha": self.alpha, "J": self.J, "t_max": self.t_max,
            "theta_q": self.theta_q, "scheme": self.scheme, "dt_max": self.dt_max,
            "c_diff": self.c_diff, "c_react": self.c_react, "c_force": self.c_force,
            "record_stride": self.record_stride, "snapshot_stride": self.snapshot_stride,
            "snapshot_times": list(self.snapshot_times), "rescaled": self.rescaled,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        return cls(**d)


def default_theta(spec: ProblemSpec) -> float:
    """Quench threshold ``10 dx eps^min(alpha, 1)``, capped at 5% of the initial minimum.

    The cap keeps the threshold below the initial data when ``alpha > 1`` or
    on coarse grids.
    """
    grid = spec.grid
    if spec.rescaled:
        natural = 10.0 * grid.dx
    else:
        natural = 10.0 * grid.dx * spec.eps ** min(spec.alpha, 1.0)
    g_min = float(sample_function(spec.g, grid).min())
    return min(natural, 0.05 * spec.scale * g_min)


def default_horizon(spec: ProblemSpec) -> float:
    """``10 eps^2 (max g)^2 / (n-1)``: several natural quench timescales."""
    g_max = float(sample_function(spec.g, spec.grid).max())
    eps2 = 1.0 if spec.rescaled else spec.eps ** 2
    return 10.0 * eps2 * g_max ** 2 / max(spec.n - 1, 1)


def make_spec(f, g, **kw) -> ProblemSpec:
    """Build a :class:`ProblemSpec` from strings or trees and resolve defaults."""
    return ProblemSpec(f=f, g=g, **kw).resolved()

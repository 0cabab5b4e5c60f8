"""
Quench or survive: sweeping the amplitude scale
===============================================

For f = g = 1 the initial radius eps^alpha decides the outcome as eps -> 0.
Every row carries a certificate: an ODE barrier that was checked against
the discrete solution at every accepted step.
"""

from quenchflow import ProblemSpec, SweepPlan, epsilon_sweep

eps = [0.2, 0.1, 0.05]

# alpha = 2: thin start, curvature wins
table = epsilon_sweep(SweepPlan(ProblemSpec(f="1", g="1", alpha=2.0, J=16), "eps", eps))
print(table.summary())
print()

# alpha = 0.5: thick start, forcing wins and the neck keeps growing
table = epsilon_sweep(SweepPlan(ProblemSpec(f="1", g="1", alpha=0.5, J=16), "eps", eps, horizon=10.0))
print(table.summary())
print()

# outside both proven regimes the run is still made, but labelled as such
from quenchflow import certified_run

rec = certified_run(ProblemSpec(f="1+0.5*cos(2*pi*x)", g="1", J=32, t_max=2.0))
print(rec.verdict, rec.extra["theory"], rec.extra["certificate"])

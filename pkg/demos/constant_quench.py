"""
Constant data: the flow collapses onto an ODE
=============================================

With f and g constant the profile stays flat, so the whole flow reduces to
y' = -(n-1)/y + f/eps with a closed-form quench time.
"""

import math

from quenchflow import OdeSpec, ProblemSpec, ode_quench_time, run_until_event

# f = 1, g = 1/2 in dimension n = 2: the ODE quenches at ln 2 - 1/2
exact = ode_quench_time(OdeSpec(n=2, a=1.0, eps=1.0, y0=0.5))
print("closed form   ", exact, math.log(2) - 0.5)

rec = run_until_event(ProblemSpec(f="1", g="0.5", J=128))
print("verdict       ", rec.verdict)
print("T* (extrap.)  ", rec.T_star_estimate)
print("T* (fit)      ", rec.T_star_fit)
print("relative error", abs(rec.T_star_estimate - exact) / exact)

# halving every step cap shrinks the error roughly in proportion
for s in (1.0, 0.5, 0.25):
    r = run_until_event(ProblemSpec(f="1", g="0.5", J=128, dt_max=1e-2 * s, c_diff=0.4 * s,
                                    c_react=0.05 * s, c_force=0.1 * s))
    print(f"caps x{s:<5} error {abs(r.T_star_estimate - exact) / exact:.3e}")

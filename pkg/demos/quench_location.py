"""
Where does the neck pinch?
==========================

Symmetric data that is monotone on [0, 1/2] pinches at x = 0 only.  The
evidence collected here: the quench arc, a sine lower barrier for u_x on
[a, b], and the resulting floor for u(1/2).
"""

import numpy as np

from quenchflow import ProblemSpec, limit_profile, parse_expr, quench_location_study

f, g = "0.5-0.1*cos(2*pi*x)", "0.8-0.2*cos(2*pi*x)"

for J in (128, 256):
    rep = quench_location_study(ProblemSpec(f=f, g=g, J=J, theta_q=1e-3))
    print(f"--- J = {J}")
    print(rep.summary())

# for comparison: the pointwise limit problem quenches first where f and g are smallest
spec = ProblemSpec(f=f, g=g, J=128)
lp = limit_profile(parse_expr(f), parse_expr(g), 2, spec.grid, 0.0)
j = int(np.argmin(lp.quench_time))
print("limit problem quenches first at x =", spec.grid.x[j], "t =", lp.quench_time[j])

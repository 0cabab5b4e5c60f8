"""Finite-difference study of quenching for forced axisymmetric curvature flow."""

from .expr import parse_expr, to_string, eval_expr, eval_array, differentiate, validate_assumptions
from .model import Grid, ProblemSpec, State, build_grid, make_spec, sample_function
from .solver import (QUENCHED, SURVIVED, ABORTED, RunRecord, run_until_event, step, adaptive_dt,
                     discrete_rhs, quench_locations, extrapolate_quench_time, fit_quench_time)
from .ode import OdeSpec, integrate_ode, ode_quench_time, ode_exact, limit_profile
from .barriers import (pde_residual, theorem1a_subsolution, short_time_envelope,
                       sine_gradient_subsolution, constant_barrier)
from .records import save_record, load_record
from .experiments import (SweepPlan, certified_run, epsilon_sweep, limit_convergence_study,
                          quench_location_study, comparison_battery)
from .mesh import export_mesh

__version__ = "0.1.0"

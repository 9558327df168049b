"""Clipped stochastic gradient methods under heavy-tailed noise.

A small laboratory: geometries and mirror steps, calibrated heavy-tailed
noise oracles, the clipping operator and its error decomposition, the
schedules behind the high-probability guarantees, the three optimization
loops, pathwise and Monte Carlo diagnostics for the analysis inequalities,
and a seeded experiment harness.
"""

from .algorithms import (RunRecord, run_asmd, run_sgd, run_smd, run_vanilla_sgd)
from .clipping import ThetaEstimate, clip, estimate_g0, estimate_theta, geometric_median
from .geometry import Geometry, ball, bregman, dual_norm, euclidean, mirror_step, norm, simplex
from .noise import Oracle, RadialParetoNoise, TwoPointNoise, make_noise, make_rng, moment_check
from .problems import (Problem, make_nonconvex_ratio, make_quadratic,
                       make_quadratic_plus_norm, make_simplex_quadratic)
from .schedules import (Schedule, ScheduleInputs, asmd_anytime, asmd_known_t, derive_inputs,
                        make_schedule, sgd_anytime, sgd_known_t, smd_anytime, smd_known_t,
                        smd_param_free, theorem_bound, verify_schedule_conditions)

__version__ = "0.1.0"

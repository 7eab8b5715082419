"""Descent methods, descent-condition certificates and rate analysis under
Polyak-Lojasiewicz-Kurdyka (PLK) inequalities.

Hot numerical kernels come from a compiled extension when it was built and
from a pure-Python fallback otherwise; ``kernels.BACKEND`` says which.
"""

from .core import (DesingularizingFunction, IterateRecord, PLKProfile, Trajectory,
                   desingularizing_derivative, desingularizing_value, plk_residual,
                   read_trajectory, write_trajectory)
from .kernels import BACKEND
from .problems import (DCAbs, DCQuadratic, PiecewisePlus, PowAbs, Quadratic, SubgradientSet,
                       dc_parts, evaluate, problem_from_spec, prox_step, subgrad_dist)
from .algorithms import (BDCAConfig, IRGConfig, ProximalConfig, run_algorithm, run_bdca,
                         run_dca, run_irg, run_proximal)
from .monitors import (certify, certify_descent_conditions_irg, certify_h1, certify_h2,
                       certify_h3, certify_h4, certify_irg_scheme, check_summability)
from .rates import (GapSequence, classify_rate, envelope_check, estimate_plk_exponent,
                    inconsistency_probe, integral_comparison_check, simulate_power_recurrence)
from .geometry import (estimate_level_lipschitz, exponent_lipschitz_probe, sigma0, sigma1,
                       verify_level_decrease)

__version__ = "0.1.0"

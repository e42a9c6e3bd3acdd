"""PASS-assisted symbiotic radio: joint transmit and pinching beamforming.

A numpy/scipy library that models the downlink of a pinching-antenna system
serving primary receivers alongside a backscatter IoT link, and maximizes the
sum rate under power, detection, spacing, and placement constraints with two
independent solvers (penalized gradient descent and alternating SCA-PSO) plus
brute-force and fixed-layout baselines.
"""

from .baselines import (ElementWiseConfig, conventional_mimo_baseline,
                        element_wise_search, fixed_pa_baseline, fixed_pa_layout)
from .channels import ChannelSet, build_channels, free_space_channel, waveguide_response
from .config import (Geometry, SystemConfig, dbm_to_watt, waveguide_y_grid,
                     watt_to_dbm)
from .detection import (DetectionMetric, detection_metric, detection_root,
                        gamma_b_requirement, kl_from_rho, kl_requirement)
from .harness import (ExperimentSpec, ResultRow, emit_results,
                      generate_realization, load_spec, parse_raw_csv,
                      run_experiment)
from .lgd import (Adam, LgdConfig, LgdState, adam_step, lgd_gradient,
                  normalize_offsets, offsets_to_positions, positions_to_offsets,
                  project_power, solve_lgd)
from .objective import FeasibilityReport, feasibility_check, penalty_objective
from .pso import PsoConfig, Swarm, pso_fitness, pso_step, repair_spacing, solve_pso
from .rates import RateReport, rate_k, sum_rate
from .report import SolveReport, SolverAbort
from .sca import (DetectionInfeasible, ScaConfig, SurrogatePoint,
                  detection_linearization, make_anchor, restore_detection,
                  sca_loop, solve_sca_subproblem, taylor_rate_bound)
from .scapso import solve_sca_pso

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

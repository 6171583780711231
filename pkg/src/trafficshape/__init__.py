"""Black-box traffic shaping: probe bonus responses, hull them, solve a covering LP,
and play the result as a randomized bonus policy."""

from .baseline import BaselineConfig, pid_step, run_baseline_episode
from .hull import FrontierPoint, HullCurve, eliminate_predicate, hull_value_at, outer_convex_curve, table_curves
from .model import (BonusGrid, ContractError, MetricsReport, ProbeTable, Scenario, compliance_rate,
                    policy_expectation, validate_scenario)
from .oracle import certify, deterministic_grid_optimum, mixture_optimum
from .pipeline import compare, probe, run_protocol
from .policy import MixedAssignment, StochasticPolicy, derive_policy, sample_policy
from .program import (build_program, build_segments, canonicalize_prefix, solve_greedy,
                      solve_reference)
from .scenario import Experiment, bundled_path, load_bundled, load_experiment
from .simenv import (ItemSpec, Marketplace, SessionTemplate, exact_response, exact_table, mc_probe,
                     run_episode)

__version__ = "0.1.0"

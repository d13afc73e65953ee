"""Solvers for multi-environment MDPs with parity objectives.

Exact rational arithmetic throughout the model and solver layers; the only
approximate quantities (logarithms, entropies) are certified dyadic
intervals. See the README for the model format and the CLI.
"""

from .belief import (Belief, BeliefUpdate, diff, likelihood_trace,
                     revealing_pairs, successor_dist, truncate, update)
from .dyadic import Interval, entropy_bounds, log2_bounds, sqrt_bounds
from .mdp_parity import (EndComponent, ValueTable, mec_decomposition,
                         parity_value, reachability_value, winning_mec_union)
from .model import (Mdp, Memdp, ModelError, ParityObjective, PomdpModel, Run,
                    ValidationReport, distinguishing_pairs, model_to_dict,
                    parse_model, restrict, serialize_model, validate)
from .pomdp import (DiracCheck, ReducedMemdp, StateBelief, entropy,
                    is_dirac_preserving, is_observation_compatible,
                    memdp_from_pomdp, memdp_to_pomdp, pomdp_successor)
from .prior_value import (AugmentedMdp, GammaConstants, PriorSolver,
                          PriorValueResult, SolverGuard, compute_constants,
                          gap_decide, mdp_from_memdp, prior_value,
                          support_triples)
from .simulate import (BeliefThresholdStrategy, MemorylessStrategy,
                       ParityEstimate, Strategy, TabularStrategy, TraceStats,
                       belief_trace_stats, exact_memoryless_parity_oracle,
                       mc_parity_estimate, sample_run, strategy_from_json)
from .uni_value import (BeliefGrid, UniValueResult, belief_grid, inf_f_search,
                        uni_value_grid, uni_value_two_env)

__version__ = "0.1.0"

"""Hierarchical crowdsourced-delivery matching.

A capacity-capped entropy-regularized scaling solve partitions delivery
tasks across driver groups, VCG auctions match tasks to individual drivers
inside each group, and an exact min-cost-flow baseline with equilibrium
verification grounds the accuracy and speed comparisons.
"""

from .auction import (AuctionOutcome, run_group_auction, solve_group_assignment,
                      truthful, vcg_rewards)
from .baseline import (GlobalMatching, aggregate_matching, brute_force_oracle,
                       extract_equilibrium, solve_global_relaxation,
                       verify_equilibrium)
from .bench import (Metrics, RunConfig, emit_report, kl_divergence,
                    run_pipeline, run_sweep)
from .errors import (ConfigurationError, ConvergenceError, InfeasibleError,
                     MatchingError, ParseError, ValidationError)
from .master import (DualPrices, build_kernel, extract_duals,
                     logit_value_function, master_objective, round_partition,
                     sinkhorn_solve)
from .network import (Network, TravelTimeMatrix, all_zone_times, detour_cost,
                      load_benchmark_network, make_scaled_network, parse_tntp,
                      write_tntp)
from .scenario import (Instance, ScenarioParams, dedicated_cost,
                       generate_instance, load_instance, sample_gumbel,
                       save_instance)

__version__ = "0.1.0"

__all__ = [
    "AuctionOutcome", "run_group_auction", "solve_group_assignment",
    "truthful", "vcg_rewards",
    "GlobalMatching", "aggregate_matching", "brute_force_oracle",
    "extract_equilibrium", "solve_global_relaxation", "verify_equilibrium",
    "Metrics", "RunConfig", "emit_report", "kl_divergence", "run_pipeline",
    "run_sweep",
    "ConfigurationError", "ConvergenceError", "InfeasibleError",
    "MatchingError", "ParseError", "ValidationError",
    "DualPrices", "build_kernel", "extract_duals", "logit_value_function",
    "master_objective", "round_partition", "sinkhorn_solve",
    "Network", "TravelTimeMatrix", "all_zone_times", "detour_cost",
    "load_benchmark_network", "make_scaled_network", "parse_tntp", "write_tntp",
    "Instance", "ScenarioParams", "dedicated_cost", "generate_instance",
    "load_instance", "sample_gumbel", "save_instance",
    "__version__",
]

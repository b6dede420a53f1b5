"""Equilibrium distance analysis for discretized first-price and all-pay
auctions: pair-relaxation linear programs over coarse correlated
equilibria, multiplicative-weights self-play, explicit distance bounds,
and numerical verification of the continuous-auction dual certificates.
"""

from .auctions import (DiscreteAuction, PureStrategy, allocation, discretize,
                       equilibrium_bid, equilibrium_bid_inverse,
                       interim_utility, make_auction, strategy_pmf, utility,
                       utility_table, win_probability)
from .dual_verify import (dual_gap_strict, dual_gap_strict_report,
                          dual_gap_weak, dual_gap_weak_report,
                          monotone_step_family, perturbation_family,
                          power_curve_family, strict_step_report,
                          verify_complete_info_example,
                          verify_convex_prior_example)
from .learning import (BootstrapResult, LearnerRun, StrategyDistribution,
                       bcce_violation, bootstrap_schedule, hedge_self_play,
                       learning_rate, regret_bound)
from .lp_model import (LpProblem, MarginalTensor, build_concentration_lp,
                       build_extended_lp, build_wasserstein_lp,
                       check_feasibility, explicit_uniform_bcce, marginalize)
from .lp_solve import (LpSolution, export_mps, import_solution, mps_string,
                       parse_mps, solve)
from .metrics import (bound_constants, distribution_distance, embed_strategy,
                      fineness, modified_wasserstein, monotonize,
                      theorem_bound, transport_slack, wasserstein2)
from .priors import DomainError, Prior
from .strategies import (EquilibriumPerturbation, PowerCurve, SlopedStep,
                         StepFunction, deviation_utility,
                         validate_dual_strategy)

__version__ = "0.1.0"

__all__ = [
    "DiscreteAuction", "PureStrategy", "allocation", "discretize",
    "equilibrium_bid", "equilibrium_bid_inverse", "interim_utility",
    "make_auction", "strategy_pmf", "utility", "utility_table",
    "win_probability",
    "dual_gap_strict", "dual_gap_strict_report", "dual_gap_weak",
    "dual_gap_weak_report", "monotone_step_family", "perturbation_family",
    "power_curve_family", "strict_step_report",
    "verify_complete_info_example", "verify_convex_prior_example",
    "BootstrapResult", "LearnerRun", "StrategyDistribution",
    "bcce_violation", "bootstrap_schedule", "hedge_self_play",
    "learning_rate", "regret_bound",
    "LpProblem", "MarginalTensor", "build_concentration_lp",
    "build_extended_lp", "build_wasserstein_lp", "check_feasibility",
    "explicit_uniform_bcce", "marginalize",
    "LpSolution", "export_mps", "import_solution", "mps_string", "parse_mps",
    "solve",
    "bound_constants", "distribution_distance", "embed_strategy", "fineness",
    "modified_wasserstein", "monotonize", "theorem_bound", "transport_slack",
    "wasserstein2",
    "DomainError", "Prior",
    "EquilibriumPerturbation", "PowerCurve", "SlopedStep", "StepFunction",
    "deviation_utility", "validate_dual_strategy",
    "__version__",
]

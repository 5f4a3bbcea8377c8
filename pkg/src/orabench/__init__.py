"""Exponential posted pricing for online resource allocation, with simulators and oracles."""

from .core import (Decision, Instance, InstanceError, RealizedRequest, RequestDistribution,
                   RequestType, Trace, best_response, realize, sample_request, validate_instance)
from .lp import (FractionalSolution, PackingLP, brute_force_offline_opt, build_configuration_lp,
                 build_sample_lp, lp_upper_bound, solution_consumption, solve_packing_lp)
from .pricing import (BudgetTooSmall, Estimates, PricingParams, check_no_regret_certificate,
                      check_revenue_loss_certificate, compute_parameters, price_vector,
                      run_exponential_pricing)

__version__ = "0.1.0"

__all__ = [
    "Decision", "Instance", "InstanceError", "RealizedRequest", "RequestDistribution",
    "RequestType", "Trace", "best_response", "realize", "sample_request", "validate_instance",
    "FractionalSolution", "PackingLP", "brute_force_offline_opt", "build_configuration_lp",
    "build_sample_lp", "lp_upper_bound", "solution_consumption", "solve_packing_lp",
    "BudgetTooSmall", "Estimates", "PricingParams", "check_no_regret_certificate",
    "check_revenue_loss_certificate", "compute_parameters", "price_vector",
    "run_exponential_pricing",
]

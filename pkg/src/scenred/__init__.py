"""Problem-dependent optimal-transport scenario reduction for two-stage stochastic programs."""

from .costs import GroundCostSpec, build_cost, validate_ground_cost
from .errors import ScenredError
from .measures import DiscreteDistribution, Scenario, dirac, empirical_from_samples, make_distribution, uniform
from .otsolve import CostMatrix, TransportPlan, transport_cost, wasserstein_p
from .problems import TwoStageInstance, expected_value, optimal_first_stage, second_stage
from .reduce import reduce_exhaustive, reduce_greedy, reduce_local_search, reduction_stability_audit
from .regret import certify_domination, regret_matrix
from .stability import check_stability, check_symmetric_shortcut, stability_pipeline

__all__ = [
    "CostMatrix", "DiscreteDistribution", "GroundCostSpec", "Scenario", "ScenredError", "TransportPlan",
    "TwoStageInstance", "build_cost", "certify_domination", "check_stability", "check_symmetric_shortcut",
    "dirac", "empirical_from_samples", "expected_value", "make_distribution", "optimal_first_stage",
    "reduce_exhaustive", "reduce_greedy", "reduce_local_search", "reduction_stability_audit",
    "regret_matrix", "second_stage", "stability_pipeline", "transport_cost", "uniform",
    "validate_ground_cost", "wasserstein_p",
]

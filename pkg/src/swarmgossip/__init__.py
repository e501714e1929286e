"""Broadcast gossip over an interference-limited wireless swarm.

A simulator and analysis toolkit for randomized pairwise averaging driven by
slotted-Aloha broadcasts: spatial deployments, SIR-based decoding with its
closed-form reception law, greedy per-slot matchings, contraction bounds,
the closed-form optimal access probability, and a Monte-Carlo sweep harness
that cross-validates the predictions.
"""

__version__ = "0.1.0"

from .analysis import (ContractionEstimate, ProxyCoefficients, ab_coefficients,
                       consensus_time_bound, estimate_rho, optimal_access,
                       optimal_access_dense, q_lower_bound)
from .channel import (ChannelParams, SuccessEstimate, closed_form_success,
                      interference_constant, monte_carlo_success, rayleigh_power_gains,
                      sir_exact, spatial_contention)
from .geometry import (Deployment, GeometryStats, NoLinksError, Window,
                       build_disk_graph, deployment_stats, effective_distance,
                       load_points, parse_points, sample_binomial, sample_ppp)
from .gossip import (DegenerateStartError, Trajectory, apply_matching,
                     disagreement_energy, run_trajectory, update_matrix)
from .harness import (BoundReport, InvariantViolation, SweepConfig, SweepResult,
                      canonical_config, compare_bound, load_config, log_domain_ci,
                      sweep_access_probability)
from .mac import (SlotOutcome, aloha_thinning, resolve_matching, sample_matching,
                  select_candidate, simulate_slot)

__all__ = [
    "__version__",
    "ChannelParams", "SuccessEstimate", "closed_form_success", "interference_constant",
    "monte_carlo_success", "rayleigh_power_gains", "sir_exact", "spatial_contention",
    "Deployment", "GeometryStats", "NoLinksError", "Window", "build_disk_graph",
    "deployment_stats", "effective_distance", "load_points", "parse_points",
    "sample_binomial", "sample_ppp",
    "SlotOutcome", "aloha_thinning", "resolve_matching", "sample_matching",
    "select_candidate", "simulate_slot",
    "DegenerateStartError", "Trajectory", "apply_matching", "disagreement_energy",
    "run_trajectory", "update_matrix",
    "ContractionEstimate", "ProxyCoefficients", "ab_coefficients",
    "consensus_time_bound", "estimate_rho", "optimal_access", "optimal_access_dense",
    "q_lower_bound",
    "BoundReport", "InvariantViolation", "SweepConfig", "SweepResult",
    "canonical_config", "compare_bound", "load_config", "log_domain_ci",
    "sweep_access_probability",
]

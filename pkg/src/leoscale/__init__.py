"""Capacity scalability of torus LEO constellations under Markov ISL failures."""

__version__ = "0.1.0"

from .link_dynamics import (  # noqa: E402
    INFINITE,
    LinkDynamics,
    MaintenancePolicy,
    Region,
    RegionThresholds,
    belief,
    binary_entropy,
    classify_region,
    consensus_lower_bound,
    k_step_transition,
    region_consensus_approx,
    steady_state,
)
from .scalability import (  # noqa: E402
    delta_tau,
    max_scalability,
    n_star_approx,
    region_tau_bound,
    solve_optimal_n,
    tau_envelope,
    tau_upper,
)

"""groupcover: capacity planning and simulation for group-based
anonymous messaging.

Users are partitioned uniformly into m groups; the social graph projects
to a relation between groups whose stream sizes are approximately
Poisson(n*d/m^2). This package plans m for the light/hybrid/stream
designs, validates the closed forms numerically and by Monte Carlo, and
measures receiver-side retrieval costs under different strategies.
"""

from .analytics import (
    DesignPlan,
    ResourceEstimate,
    conditional_mean_streams,
    connection_curve,
    coupon_expectation,
    disconnect_prob_integral,
    disconnect_prob_mgf,
    edge_privacy_closed_form,
    harmonic,
    plan_light,
    plan_stream,
    poisson_lambda,
    prob_at_least,
    replan_for_growth,
    resource_table,
    table1,
)
from .degrees import (
    DegreeDistribution,
    GraphProfile,
    fit_matched_lognormal,
    load_histogram,
    sample_degree_sequence,
)
from .errors import (
    ConfigurationError,
    FitError,
    GroupcoverError,
    NumericError,
    ParseError,
    PlanningError,
)
from .projection import (
    GroupAssignment,
    Message,
    ProjectedMessage,
    ProjectionNetwork,
    SocialGraph,
    assign_groups,
    project_graph,
    project_message,
    streams_between,
)
from .simulation import (
    AdversaryLog,
    SimReport,
    WorkloadConfig,
    estimate_edge_privacy,
    export_adversary_log,
    run_workload,
    simulate_connection_prob,
    simulate_stream_histogram,
    strategy_bulk_download,
    strategy_dynamic_rendezvous,
    strategy_random_poll,
)

FACEBOOK_PROFILE = GraphProfile(n=721094633, d=191.4161, sigma=190.4263)

__version__ = "0.1.0"

__all__ = [
    "AdversaryLog",
    "ConfigurationError",
    "DegreeDistribution",
    "DesignPlan",
    "FACEBOOK_PROFILE",
    "FitError",
    "GraphProfile",
    "GroupAssignment",
    "GroupcoverError",
    "Message",
    "NumericError",
    "ParseError",
    "PlanningError",
    "ProjectedMessage",
    "ProjectionNetwork",
    "ResourceEstimate",
    "SimReport",
    "SocialGraph",
    "WorkloadConfig",
    "assign_groups",
    "conditional_mean_streams",
    "connection_curve",
    "coupon_expectation",
    "disconnect_prob_integral",
    "disconnect_prob_mgf",
    "edge_privacy_closed_form",
    "estimate_edge_privacy",
    "export_adversary_log",
    "fit_matched_lognormal",
    "harmonic",
    "load_histogram",
    "plan_light",
    "plan_stream",
    "poisson_lambda",
    "prob_at_least",
    "project_graph",
    "project_message",
    "replan_for_growth",
    "resource_table",
    "run_workload",
    "sample_degree_sequence",
    "simulate_connection_prob",
    "simulate_stream_histogram",
    "strategy_bulk_download",
    "strategy_dynamic_rendezvous",
    "strategy_random_poll",
    "streams_between",
    "table1",
]

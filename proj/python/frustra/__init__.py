"""Frustration index and near-monotonicity analysis of feed-forward networks."""

from ._frustra import (
    Graph,
    Model,
    Network,
    ValidationError,
    NumericalError,
    brute_force,
    build_graph,
    frustration,
    from_edges,
    generate_synthetic,
    lambda_from_samples,
    load_model,
    null_graph,
    omega,
    perturb,
    run_pipeline,
    welch_t,
)

__all__ = [
    "Graph",
    "Model",
    "Network",
    "ValidationError",
    "NumericalError",
    "brute_force",
    "build_graph",
    "frustration",
    "from_edges",
    "generate_synthetic",
    "lambda_from_samples",
    "load_model",
    "null_graph",
    "omega",
    "perturb",
    "run_pipeline",
    "welch_t",
]

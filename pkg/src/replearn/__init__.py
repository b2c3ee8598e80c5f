"""Replicable learning of wrap-around box intervals, with the graph and
coupling machinery used to study when replicability is possible."""

from .domain import (
    LabeledSample,
    Params,
    choose_prime_k,
    evaluate_hypothesis,
    exact_error,
    is_prime,
    labeling_of,
    sample_training_set,
    tuple_distance,
    wrap_distance,
)
from .errors import (
    DominanceError,
    ResourceLimitError,
    UsageError,
    VerificationError,
)
from .learner import (
    SharedKey,
    enumerate_acceptance_ball,
    estimate_transitions,
    exact_mode,
    learn_from_transitions,
    replicable_learn,
    replicable_learn_batch,
)
from .balls import (
    BallTable,
    build_ball_table,
    interior_statistics,
    l1_ball_count,
    sample_uniform_wrap_ball,
    wrap_ball_count,
)
from .spectral import (
    CayleyInstance,
    analytic_eigenvalue,
    eigen_check,
    expansion_ratio,
    indicator_sum,
    inner_product_independence_check,
    internal_edge_count,
    littlewood_offord_estimate,
    littlewood_offord_exact,
    low_rank_fraction_estimate,
    rank_mod_k,
    tail_and_moment_estimate,
)
from .coupling import (
    CouplingMatrix,
    StepOutcome,
    build_step_coupling,
    candidate_direction_set,
    majorization_coupling,
    random_step,
    verify_step_distribution,
)
from .harness import (
    ExperimentConfig,
    ReplicationReport,
    parse_config,
    replication_beta,
    run_replication_experiment,
    suggested_sample_size,
    sweep_experiments,
)

__version__ = "0.1.0"

__all__ = [
    "BallTable",
    "CayleyInstance",
    "CouplingMatrix",
    "DominanceError",
    "ExperimentConfig",
    "LabeledSample",
    "Params",
    "ReplicationReport",
    "ResourceLimitError",
    "SharedKey",
    "StepOutcome",
    "UsageError",
    "VerificationError",
    "analytic_eigenvalue",
    "build_ball_table",
    "build_step_coupling",
    "candidate_direction_set",
    "choose_prime_k",
    "eigen_check",
    "enumerate_acceptance_ball",
    "estimate_transitions",
    "evaluate_hypothesis",
    "exact_error",
    "exact_mode",
    "expansion_ratio",
    "indicator_sum",
    "inner_product_independence_check",
    "interior_statistics",
    "internal_edge_count",
    "is_prime",
    "l1_ball_count",
    "labeling_of",
    "learn_from_transitions",
    "littlewood_offord_estimate",
    "littlewood_offord_exact",
    "low_rank_fraction_estimate",
    "majorization_coupling",
    "parse_config",
    "random_step",
    "rank_mod_k",
    "replicable_learn",
    "replicable_learn_batch",
    "replication_beta",
    "run_replication_experiment",
    "sample_training_set",
    "sample_uniform_wrap_ball",
    "suggested_sample_size",
    "sweep_experiments",
    "tail_and_moment_estimate",
    "tuple_distance",
    "verify_step_distribution",
    "wrap_ball_count",
    "wrap_distance",
]

"""Equal-utility allocation counting and Rashomon-set sampling evaluation."""

from ._core import (
    CandidatePool,
    TrainedModel,
    age_entropy,
    allocation_utility,
    analytic_space_stats,
    boundary_lottery,
    count_equal_utility,
    cross_entropy,
    emit_plot_data,
    ensemble_allocation,
    filter_epsilon,
    generate_synthetic,
    load_csv,
    outcome_profile,
    pairwise_consistency,
    predict_pool,
    reference_least_discriminatory,
    relabel,
    run_experiment,
    sample_equal_utility,
    sigmoid_logit_lottery,
    sigmoid_logit_weight,
    threshold_test_ratio,
    top_k,
    train_model,
    unique_allocations,
)

__all__ = [
    "CandidatePool",
    "TrainedModel",
    "age_entropy",
    "allocation_utility",
    "analytic_space_stats",
    "boundary_lottery",
    "count_equal_utility",
    "cross_entropy",
    "emit_plot_data",
    "ensemble_allocation",
    "filter_epsilon",
    "generate_synthetic",
    "load_csv",
    "outcome_profile",
    "pairwise_consistency",
    "predict_pool",
    "reference_least_discriminatory",
    "relabel",
    "run_experiment",
    "sample_equal_utility",
    "sigmoid_logit_lottery",
    "sigmoid_logit_weight",
    "threshold_test_ratio",
    "top_k",
    "train_model",
    "unique_allocations",
]

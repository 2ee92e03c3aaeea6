"""Lightning nowcasting from satellite frame extrapolation errors."""

from ._stormcast import (
    Model,
    StormcastError,
    balance_per_image,
    compute_flow,
    conv_filter,
    extrapolation_error,
    gini,
    load_model,
    metrics,
    operational_projection,
    required_fpr,
    roc_auc,
    run_experiment,
    schema_names,
    train,
)

__all__ = [
    "Model",
    "StormcastError",
    "balance_per_image",
    "compute_flow",
    "conv_filter",
    "extrapolation_error",
    "gini",
    "load_model",
    "metrics",
    "operational_projection",
    "required_fpr",
    "roc_auc",
    "run_experiment",
    "schema_names",
    "train",
]

"""Pluggable multi-horizon regressors: gradient-boosted trees, a
feed-forward network, and file-backed external predictions — plus
checkpoint serialization."""

from .base import (
    KIND_EXTERNAL,
    KIND_GBT,
    KIND_MLP,
    ExternalParams,
    GbtParams,
    MlpParams,
    RegressorSpec,
    TrainedModel,
    TrainReport,
    fit,
    mse,
)
from .external import ExternalState, load_prediction_table, save_prediction_table
from .gbt import GbtEnsemble, GbtState, GbtTree
from .io import load_model, save_model
from .mlp import (
    MlpState,
    finite_difference_gradients,
    forward,
    init_parameters,
    loss_and_gradients,
)

__all__ = [
    "KIND_EXTERNAL",
    "KIND_GBT",
    "KIND_MLP",
    "ExternalParams",
    "ExternalState",
    "GbtEnsemble",
    "GbtParams",
    "GbtState",
    "GbtTree",
    "MlpParams",
    "MlpState",
    "RegressorSpec",
    "TrainReport",
    "TrainedModel",
    "finite_difference_gradients",
    "fit",
    "forward",
    "init_parameters",
    "load_model",
    "load_prediction_table",
    "loss_and_gradients",
    "mse",
    "save_model",
    "save_prediction_table",
]

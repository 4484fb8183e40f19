"""Regression families mapping bifurcation geometry to RRI coefficients.

Six kinds, all implemented here: k-nearest neighbors, a variance-reduction
decision tree, ordinary least squares, epsilon-insensitive SVR on a dual
coordinate solver, Gaussian-process regression, and a neural network trained
on the composed pressure-difference loss.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .base import (
    MODALITIES,
    MODALITY_TARGETS,
    REGRESSOR_KINDS,
    Hyperparameters,
    Standardizer,
    TraceSamples,
    TrainedRegressor,
    compose_dp,
    default_hyperparameters,
    load_model,
    output_dim,
    split_dataset,
    validate_training_data,
)
from .gpr import GPRRegressor
from .knn import KNNRegressor
from .linear import LinearRegressor
from .neural import NeuralNetRegressor
from .svr import SVRRegressor
from .tree import DecisionTreeRegressor

_KIND_CLASSES = {
    "knn": KNNRegressor,
    "dtree": DecisionTreeRegressor,
    "linear": LinearRegressor,
    "svr": SVRRegressor,
    "gpr": GPRRegressor,
    "nn": NeuralNetRegressor,
}


def train(
    kind: str,
    modality: str,
    features: np.ndarray,
    targets: np.ndarray,
    traces: Optional[Sequence[TraceSamples]] = None,
    hyperparameters: Optional[Hyperparameters] = None,
    seed: int = 0,
    dataset_fingerprint: str | None = None,
) -> TrainedRegressor:
    """Fit one regressor on geometry features and coefficient targets.

    ``traces`` supplies per-row (Q, dQ/dt, dP) samples and is required for
    (and only consumed by) the neural network, whose loss compares composed
    pressure differences rather than coefficients.
    """
    hp = hyperparameters or Hyperparameters()
    features, targets = validate_training_data(
        kind, modality, features, targets, traces, hp
    )
    klass = _KIND_CLASSES[kind]
    model = klass.__new__(klass)
    TrainedRegressor.__init__(
        model,
        modality=modality,
        feature_scaler=Standardizer.fit(features),
        target_scaler=Standardizer.fit(targets),
        hyperparameters=hp,
        dataset_fingerprint=dataset_fingerprint,
    )
    features_std = model.feature_scaler.transform(features)
    targets_std = model.target_scaler.transform(targets)
    if kind == "nn":
        model._fit_nn(features_std, traces, seed)
    else:
        model._fit(features_std, targets_std)
    return model


__all__ = [
    "MODALITIES",
    "MODALITY_TARGETS",
    "REGRESSOR_KINDS",
    "Hyperparameters",
    "Standardizer",
    "TraceSamples",
    "TrainedRegressor",
    "compose_dp",
    "default_hyperparameters",
    "load_model",
    "output_dim",
    "split_dataset",
    "train",
    "KNNRegressor",
    "DecisionTreeRegressor",
    "LinearRegressor",
    "SVRRegressor",
    "GPRRegressor",
    "NeuralNetRegressor",
]

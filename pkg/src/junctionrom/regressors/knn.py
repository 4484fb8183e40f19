"""K-nearest-neighbors regression on standardized features."""

from __future__ import annotations

import numpy as np

from .base import TrainedRegressor, register_kind


@register_kind
class KNNRegressor(TrainedRegressor):
    kind = "knn"

    def _fit(self, features_std: np.ndarray, targets_std: np.ndarray) -> None:
        self.table_features = features_std
        self.table_targets = targets_std
        self.n_neighbors = self.hyperparameters.knn_neighbors

    def _predict_std(self, features_std: np.ndarray) -> np.ndarray:
        predictions = np.empty((features_std.shape[0], self.table_targets.shape[1]))
        for i, x in enumerate(features_std):
            squared = np.sum((self.table_features - x) ** 2, axis=1)
            # Stable sort keeps neighbor choice deterministic under ties.
            order = np.argsort(squared, kind="stable")[: self.n_neighbors]
            predictions[i] = self.table_targets[order].mean(axis=0)
        return predictions

    def _params_to_dict(self) -> dict:
        return {
            "table_features": self.table_features.tolist(),
            "table_targets": self.table_targets.tolist(),
            "n_neighbors": self.n_neighbors,
        }

    @classmethod
    def _params_from_dict(cls, data: dict) -> dict:
        return {
            "table_features": np.array(data["table_features"], dtype=float),
            "table_targets": np.array(data["table_targets"], dtype=float),
            "n_neighbors": int(data["n_neighbors"]),
        }

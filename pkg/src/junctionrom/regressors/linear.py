"""Ordinary least-squares regression with an intercept."""

from __future__ import annotations

import numpy as np

from ..errors import TrainingError
from .base import TrainedRegressor, register_kind


@register_kind
class LinearRegressor(TrainedRegressor):
    kind = "linear"

    def _fit(self, features_std: np.ndarray, targets_std: np.ndarray) -> None:
        design = np.column_stack([np.ones(features_std.shape[0]), features_std])
        coefficients, _, rank, _ = np.linalg.lstsq(design, targets_std, rcond=None)
        if not np.all(np.isfinite(coefficients)):
            raise TrainingError("linear solve produced non-finite coefficients")
        self.coefficients = coefficients  # (1 + n_features, n_targets)

    def _predict_std(self, features_std: np.ndarray) -> np.ndarray:
        design = np.column_stack([np.ones(features_std.shape[0]), features_std])
        return design @ self.coefficients

    def _params_to_dict(self) -> dict:
        return {"coefficients": self.coefficients.tolist()}

    @classmethod
    def _params_from_dict(cls, data: dict) -> dict:
        return {"coefficients": np.array(data["coefficients"], dtype=float)}

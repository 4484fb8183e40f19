"""Gaussian-process regression with an RBF kernel (predictive mean only).

Stores the ridge-regularized kernel solve (K + alpha*I)^-1 Y computed via a
Cholesky factorization; prediction is the cross-kernel times that solve.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..errors import TrainingError
from .base import TrainedRegressor, register_kind


def gp_kernel(a: np.ndarray, b: np.ndarray, length_scale: float) -> np.ndarray:
    sq = (
        np.sum(a**2, axis=1)[:, None]
        + np.sum(b**2, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.exp(-0.5 * np.maximum(sq, 0.0) / length_scale**2)


@register_kind
class GPRRegressor(TrainedRegressor):
    kind = "gpr"

    def _fit(self, features_std: np.ndarray, targets_std: np.ndarray) -> None:
        hp = self.hyperparameters
        self.length_scale = hp.gpr_length_scale
        self.train_features = features_std
        kernel = gp_kernel(features_std, features_std, self.length_scale)
        kernel[np.diag_indices_from(kernel)] += hp.gpr_alpha
        try:
            factor = cho_factor(kernel, lower=True)
        except np.linalg.LinAlgError as exc:
            raise TrainingError(f"kernel matrix is not positive definite: {exc}") from exc
        # C-contiguous so reloaded models reproduce predictions bitwise
        # (BLAS accumulation order depends on memory layout).
        self.weights = np.ascontiguousarray(cho_solve(factor, targets_std))

    def _predict_std(self, features_std: np.ndarray) -> np.ndarray:
        cross = gp_kernel(features_std, self.train_features, self.length_scale)
        return cross @ self.weights

    def _params_to_dict(self) -> dict:
        return {
            "length_scale": self.length_scale,
            "train_features": self.train_features.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def _params_from_dict(cls, data: dict) -> dict:
        return {
            "length_scale": float(data["length_scale"]),
            "train_features": np.array(data["train_features"], dtype=float),
            "weights": np.array(data["weights"], dtype=float),
        }

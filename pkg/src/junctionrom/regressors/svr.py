"""Epsilon-insensitive support vector regression, RBF kernel, dual solver.

The dual is optimized over net coefficients beta_i = alpha_i - alpha_i* with
the pairwise (two-variable) coordinate scheme that preserves sum(beta) = 0:
each update picks the maximal-violating pair, maximizes the concave piecewise
quadratic restriction exactly, and clips to the [-C, C] box.  Iteration stops
when the maximal KKT violation gap falls below the configured tolerance.
Multi-target problems train one independent dual per target.
"""

from __future__ import annotations

import numpy as np

from ..errors import TrainingError
from .base import TrainedRegressor, register_kind


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        np.sum(a**2, axis=1)[:, None]
        + np.sum(b**2, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


def _dual_objective(beta, targets, model_values, epsilon):
    return float(
        beta @ targets - 0.5 * beta @ model_values - epsilon * np.sum(np.abs(beta))
    )


def _delta_objective(delta, eta, gain, beta_i, beta_j, epsilon):
    return (
        gain * delta
        - 0.5 * eta * delta * delta
        - epsilon * (abs(beta_i + delta) - abs(beta_i))
        - epsilon * (abs(beta_j - delta) - abs(beta_j))
    )


def solve_svr_dual(kernel, targets, c, epsilon, tol, max_updates):
    """Optimize one dual problem; returns (beta, bias, diagnostics)."""
    n = len(targets)
    beta = np.zeros(n)
    model_values = np.zeros(n)  # K @ beta, maintained incrementally
    objective_history = [0.0]
    updates = 0
    gap = np.inf
    bound = c * (1.0 - 1e-12)
    while updates < max_updates:
        residual = targets - model_values
        up = np.where(beta >= 0.0, residual - epsilon, residual + epsilon)
        down = np.where(beta <= 0.0, residual + epsilon, residual - epsilon)
        can_up = beta < bound
        can_down = beta > -bound
        if not can_up.any() or not can_down.any():
            break
        i = int(np.argmax(np.where(can_up, up, -np.inf)))
        j = int(np.argmin(np.where(can_down, down, np.inf)))
        gap = up[i] - down[j]
        if i == j or gap <= tol:
            break
        eta = kernel[i, i] + kernel[j, j] - 2.0 * kernel[i, j]
        gain = residual[i] - residual[j]
        lo = max(-c - beta[i], beta[j] - c)
        hi = min(c - beta[i], beta[j] + c)
        candidates = [lo, hi, -beta[i], beta[j]]
        if eta > 1e-14:
            for s_i in (-1.0, 1.0):
                for s_j in (-1.0, 1.0):
                    candidates.append((gain - epsilon * s_i + epsilon * s_j) / eta)
        best_delta = 0.0
        best_gain = 0.0
        for delta in candidates:
            delta = min(max(delta, lo), hi)
            value = _delta_objective(delta, eta, gain, beta[i], beta[j], epsilon)
            if value > best_gain:
                best_gain = value
                best_delta = delta
        if best_gain <= 0.0:
            break
        beta[i] = min(max(beta[i] + best_delta, -c), c)
        beta[j] = min(max(beta[j] - best_delta, -c), c)
        model_values += best_delta * (kernel[:, i] - kernel[:, j])
        updates += 1
        if updates % n == 0:
            objective_history.append(
                _dual_objective(beta, targets, model_values, epsilon)
            )
    objective_history.append(_dual_objective(beta, targets, model_values, epsilon))
    residual = targets - model_values
    up = np.where(beta >= 0.0, residual - epsilon, residual + epsilon)
    down = np.where(beta <= 0.0, residual + epsilon, residual - epsilon)
    up_max = np.max(np.where(beta < bound, up, -np.inf))
    down_min = np.min(np.where(beta > -bound, down, np.inf))
    if not np.isfinite(up_max) or not np.isfinite(down_min):
        bias = 0.0
    else:
        bias = 0.5 * (up_max + down_min)
    diagnostics = {
        "updates": updates,
        "kkt_gap": float(up_max - down_min) if np.isfinite(up_max - down_min) else 0.0,
        "objective_history": objective_history,
    }
    return beta, float(bias), diagnostics


@register_kind
class SVRRegressor(TrainedRegressor):
    kind = "svr"

    def _fit(self, features_std: np.ndarray, targets_std: np.ndarray) -> None:
        hp = self.hyperparameters
        self.gamma = hp.svr_gamma if hp.svr_gamma is not None else 1.0 / features_std.shape[1]
        self.support = features_std
        kernel = rbf_kernel(features_std, features_std, self.gamma)
        betas = []
        biases = []
        per_target = []
        for t in range(targets_std.shape[1]):
            beta, bias, diagnostics = solve_svr_dual(
                kernel,
                targets_std[:, t],
                c=hp.svr_c,
                epsilon=hp.svr_epsilon,
                tol=hp.svr_kkt_tol,
                max_updates=hp.svr_max_updates,
            )
            if not np.all(np.isfinite(beta)):
                raise TrainingError("svr dual produced non-finite coefficients")
            betas.append(beta)
            biases.append(bias)
            per_target.append(diagnostics)
        self.beta = np.array(betas)  # (n_targets, n_rows)
        self.bias = np.array(biases)
        self.training_info["svr"] = per_target

    def _predict_std(self, features_std: np.ndarray) -> np.ndarray:
        kernel = rbf_kernel(features_std, self.support, self.gamma)
        return kernel @ self.beta.T + self.bias

    def _params_to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "support": self.support.tolist(),
            "beta": self.beta.tolist(),
            "bias": self.bias.tolist(),
        }

    @classmethod
    def _params_from_dict(cls, data: dict) -> dict:
        return {
            "gamma": float(data["gamma"]),
            "support": np.array(data["support"], dtype=float),
            "beta": np.array(data["beta"], dtype=float),
            "bias": np.array(data["bias"], dtype=float),
        }

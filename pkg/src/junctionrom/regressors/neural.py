"""Feedforward network trained on the pressure-difference loss.

Unlike the other families, the network is not fit to coefficient targets
directly: its outputs are mapped back to physical coefficients and composed
with each training row's flow samples, and the squared error of the resulting
pressure differences is minimized.  Plain stochastic gradient descent with a
hyperbolically decaying learning rate; tanh hidden layers keep the loss
smooth enough for finite-difference gradient verification.
"""

from __future__ import annotations

import numpy as np

from ..errors import TrainingError
from .base import TrainedRegressor, register_kind


def init_params(rng, layer_sizes):
    """Glorot-uniform weights, zero biases, for consecutive layer sizes."""
    params = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        params.append((weights, np.zeros(fan_out)))
    return params


def forward(params, features):
    """Network output and the per-layer activations needed for backprop."""
    activations = [features]
    a = features
    for weights, bias in params[:-1]:
        a = np.tanh(a @ weights + bias)
        activations.append(a)
    weights, bias = params[-1]
    return a @ weights + bias, activations


def loss_and_gradient(params, features, phi, dp, mask, counts, target_mean,
                      target_std, dp_scale, with_gradient=True):
    """Composed pressure-difference loss and its parameter gradient.

    ``phi`` holds the flow basis per row and sample, shaped
    (rows, samples, outputs), so the predicted pressure difference is the dot
    product of the physical coefficients with each sample's basis.  Rows are
    averaged over their valid samples (``mask``/``counts``) and the loss is
    normalized by ``dp_scale`` squared to keep gradients O(1).
    """
    outputs, activations = forward(params, features)
    coefficients = target_mean + target_std * outputs
    dp_pred = np.einsum("bd,bmd->bm", coefficients, phi)
    error = (dp_pred - dp) * mask
    n_rows = features.shape[0]
    norm = n_rows * dp_scale**2
    loss = float(np.sum(error**2 / counts[:, None]) / norm)
    if not with_gradient:
        return loss, None
    d_coeff = 2.0 * np.einsum("bm,bmd->bd", error / counts[:, None], phi) / norm
    delta = d_coeff * target_std
    gradients = [None] * len(params)
    for layer in range(len(params) - 1, -1, -1):
        a_prev = activations[layer]
        gradients[layer] = (a_prev.T @ delta, delta.sum(axis=0))
        if layer > 0:
            delta = (delta @ params[layer][0].T) * (1.0 - a_prev**2)
    return loss, gradients


def _pack_traces(traces, modality, subsample):
    """Pad per-row flow samples into dense (rows, samples, outputs) tensors."""
    rows = []
    for trace in traces:
        q, q_dot, dp = trace.q, trace.q_dot, trace.dp
        if subsample and len(q) > subsample:
            idx = np.unique(np.round(np.linspace(0, len(q) - 1, subsample)).astype(int))
            q, q_dot, dp = q[idx], q_dot[idx], dp[idx]
        if modality == "steady_rr":
            basis = np.column_stack([q, q * q])
        elif modality == "inductance":
            basis = q_dot[:, None]
        else:
            basis = np.column_stack([q, q * q, q_dot])
        rows.append((basis, dp))
    max_samples = max(len(dp) for _, dp in rows)
    n_outputs = rows[0][0].shape[1]
    phi = np.zeros((len(rows), max_samples, n_outputs))
    dp_padded = np.zeros((len(rows), max_samples))
    mask = np.zeros((len(rows), max_samples))
    counts = np.zeros(len(rows))
    for i, (basis, dp) in enumerate(rows):
        m = len(dp)
        phi[i, :m] = basis
        dp_padded[i, :m] = dp
        mask[i, :m] = 1.0
        counts[i] = m
    return phi, dp_padded, mask, counts


@register_kind
class NeuralNetRegressor(TrainedRegressor):
    kind = "nn"

    def _fit_nn(self, features_std, traces, seed):
        hp = self.hyperparameters
        modality = self.modality
        phi, dp, mask, counts = _pack_traces(traces, modality, hp.nn_trace_subsample)
        dp_scale = float(np.sqrt(np.mean((dp[mask == 1.0]) ** 2)))
        if dp_scale == 0.0:
            dp_scale = 1.0
        self.dp_scale = dp_scale
        target_mean = self.target_scaler.mean
        target_std = self.target_scaler.std

        rng = np.random.default_rng(seed)
        n_rows, n_features = features_std.shape
        sizes = [n_features] + [hp.nn_hidden_size] * hp.nn_hidden_layers + [len(target_mean)]
        params = init_params(rng, sizes)

        indices = rng.permutation(n_rows)
        n_val = int(round(hp.nn_validation_fraction * n_rows)) if n_rows >= 5 else 0
        val_idx = indices[:n_val]
        train_idx = indices[n_val:]

        def dataset_loss(idx):
            loss, _ = loss_and_gradient(
                params, features_std[idx], phi[idx], dp[idx], mask[idx],
                counts[idx], target_mean, target_std, dp_scale,
                with_gradient=False,
            )
            return loss

        best_val = np.inf
        best_params = [(w.copy(), b.copy()) for w, b in params]
        best_epoch = 0
        train_history = []
        val_history = []
        epochs_run = 0
        for epoch in range(hp.nn_epochs):
            lr = hp.nn_learning_rate / (1.0 + hp.nn_lr_decay * epoch)
            order = rng.permutation(train_idx)
            for start in range(0, len(order), hp.nn_batch_size):
                batch = order[start : start + hp.nn_batch_size]
                loss, gradients = loss_and_gradient(
                    params, features_std[batch], phi[batch], dp[batch],
                    mask[batch], counts[batch], target_mean, target_std, dp_scale,
                )
                if not np.isfinite(loss):
                    raise TrainingError(
                        f"neural network training diverged at epoch {epoch}"
                    )
                params = [
                    (w - lr * gw, b - lr * gb)
                    for (w, b), (gw, gb) in zip(params, gradients)
                ]
            epochs_run = epoch + 1
            train_history.append(dataset_loss(train_idx))
            if n_val:
                val_loss = dataset_loss(val_idx)
                val_history.append(val_loss)
                if val_loss < best_val:
                    best_val = val_loss
                    best_params = [(w.copy(), b.copy()) for w, b in params]
                    best_epoch = epoch
                elif epoch - best_epoch >= hp.nn_patience:
                    break
        if n_val:
            params = best_params
        self.layers = params
        self.training_info["nn"] = {
            "train_loss_history": train_history,
            "val_loss_history": val_history,
            "best_epoch": best_epoch,
            "epochs_run": epochs_run,
            "dp_scale": dp_scale,
        }

    def _predict_std(self, features_std: np.ndarray) -> np.ndarray:
        outputs, _ = forward(self.layers, features_std)
        return outputs

    def _params_to_dict(self) -> dict:
        return {
            "layers": [[w.tolist(), b.tolist()] for w, b in self.layers],
            "dp_scale": self.dp_scale,
        }

    @classmethod
    def _params_from_dict(cls, data: dict) -> dict:
        return {
            "layers": [
                (np.array(w, dtype=float), np.array(b, dtype=float))
                for w, b in data["layers"]
            ],
            "dp_scale": float(data["dp_scale"]),
        }

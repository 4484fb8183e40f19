"""Shared regressor infrastructure: scaling, hyperparameters, serialization.

All six regression families map a standardized 7-feature geometry vector to
standardized coefficient targets.  Three modalities fix the output layout:
``steady_rr`` predicts the two resistances, ``inductance`` predicts the
inductance alone, and ``transient_to`` predicts all three coefficients from
transient-optimized targets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigurationError, TrainingError

SERIALIZATION_VERSION = 1

REGRESSOR_KINDS = ("knn", "dtree", "linear", "svr", "gpr", "nn")

MODALITIES = ("steady_rr", "inductance", "transient_to")

# Targets predicted per modality, in column order.
MODALITY_TARGETS = {
    "steady_rr": ("r_linear", "r_quadratic"),
    "inductance": ("inductance",),
    "transient_to": ("r_linear", "r_quadratic", "inductance"),
}


def output_dim(modality: str) -> int:
    _check_modality(modality)
    return len(MODALITY_TARGETS[modality])


def _check_modality(modality: str) -> None:
    if modality not in MODALITIES:
        raise ConfigurationError(
            f"unknown modality {modality!r}; choose one of: {', '.join(MODALITIES)}"
        )


def compose_dp(modality: str, coefficients: np.ndarray, q: np.ndarray, q_dot: np.ndarray) -> np.ndarray:
    """Pressure difference implied by predicted coefficients at given flows.

    ``coefficients`` holds one row per case in the modality's column order;
    ``q``/``q_dot`` are (cases, samples) arrays.  The inductance modality
    explains only the inductive part of the pressure difference.
    """
    c = np.atleast_2d(coefficients)
    if modality == "steady_rr":
        return c[:, [0]] * q + c[:, [1]] * q * q
    if modality == "inductance":
        return c[:, [0]] * q_dot
    if modality == "transient_to":
        return c[:, [0]] * q + c[:, [1]] * q * q + c[:, [2]] * q_dot
    _check_modality(modality)


@dataclass(frozen=True)
class Hyperparameters:
    """Regression hyperparameters; defaults are the tuned values.

    The neural network hidden size defaults to 48 and is bumped to 70 for the
    isoradial cohort (see :func:`default_hyperparameters`).  Fields without a
    tuned value (kernel width, stopping controls) carry engineering defaults.
    """

    knn_neighbors: int = 7
    dtree_max_depth: int = 4
    dtree_min_samples_leaf: int = 8
    svr_c: float = 1.4
    svr_epsilon: float = 0.029
    svr_gamma: Optional[float] = None  # None -> 1 / n_features
    svr_kkt_tol: float = 1e-3
    svr_max_updates: int = 200_000
    gpr_alpha: float = 0.002
    gpr_length_scale: float = 1.6
    nn_hidden_size: int = 48
    nn_hidden_layers: int = 2
    nn_learning_rate: float = 0.018
    nn_lr_decay: float = 0.031
    nn_batch_size: int = 24
    nn_epochs: int = 500
    nn_patience: int = 50
    nn_validation_fraction: float = 0.15
    nn_trace_subsample: int = 50

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "Hyperparameters":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(
                f"unknown hyperparameter(s): {', '.join(sorted(unknown))}"
            )
        return cls(**data)


def default_hyperparameters(cohort: str | None = None, **overrides) -> Hyperparameters:
    """Tuned defaults, with the isoradial neural network widened to 70."""
    hp = Hyperparameters()
    if cohort == "isoradial" and "nn_hidden_size" not in overrides:
        hp = replace(hp, nn_hidden_size=70)
    if overrides:
        hp = replace(hp, **overrides)
    return hp


class Standardizer:
    """Per-dimension z-scoring fit on training data.

    Constant dimensions keep a unit scale (and are flagged) so transforming
    never divides by zero; transform followed by inverse_transform is the
    identity to machine precision.
    """

    def __init__(self, mean: np.ndarray, std: np.ndarray, constant: np.ndarray):
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.asarray(std, dtype=float)
        self.constant = np.asarray(constant, dtype=bool)

    @classmethod
    def fit(cls, values: np.ndarray) -> "Standardizer":
        values = np.asarray(values, dtype=float)
        mean = values.mean(axis=0)
        std = values.std(axis=0)
        constant = std == 0.0
        std = np.where(constant, 1.0, std)
        return cls(mean, std, constant)

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.mean) / self.std

    def inverse_transform(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.std + self.mean

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "constant": self.constant.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Standardizer":
        return cls(
            np.array(data["mean"], dtype=float),
            np.array(data["std"], dtype=float),
            np.array(data["constant"], dtype=bool),
        )


@dataclass
class TraceSamples:
    """Per-training-row flow samples feeding the pressure-difference loss."""

    q: np.ndarray
    q_dot: np.ndarray
    dp: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.q_dot = np.asarray(self.q_dot, dtype=float)
        self.dp = np.asarray(self.dp, dtype=float)
        if not (len(self.q) == len(self.q_dot) == len(self.dp)):
            raise ConfigurationError("trace sample arrays must have equal length")


class TrainedRegressor:
    """Base class: standardization plumbing around a kind-specific core."""

    kind: str = "base"

    def __init__(
        self,
        modality: str,
        feature_scaler: Standardizer,
        target_scaler: Standardizer,
        hyperparameters: Hyperparameters,
        dataset_fingerprint: str | None = None,
        training_info: dict | None = None,
    ):
        _check_modality(modality)
        self.modality = modality
        self.feature_scaler = feature_scaler
        self.target_scaler = target_scaler
        self.hyperparameters = hyperparameters
        self.dataset_fingerprint = dataset_fingerprint
        self.training_info = training_info or {}

    # Kind-specific prediction on standardized features, returning
    # standardized targets; shapes (n, d) -> (n, t).
    def _predict_std(self, features_std: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_many(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=float))
        if not np.all(np.isfinite(features)):
            raise ConfigurationError("features must be finite")
        if features.shape[1] != self.feature_scaler.mean.shape[0]:
            raise ConfigurationError(
                f"expected {self.feature_scaler.mean.shape[0]} features, "
                f"got {features.shape[1]}"
            )
        std_pred = self._predict_std(self.feature_scaler.transform(features))
        return self.target_scaler.inverse_transform(std_pred)

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.predict_many(features)[0]

    # --- serialization -------------------------------------------------

    def _params_to_dict(self) -> dict:
        raise NotImplementedError

    @classmethod
    def _params_from_dict(cls, data: dict) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "version": SERIALIZATION_VERSION,
            "kind": self.kind,
            "modality": self.modality,
            "dataset_fingerprint": self.dataset_fingerprint,
            "hyperparameters": self.hyperparameters.to_dict(),
            "feature_scaler": self.feature_scaler.to_dict(),
            "target_scaler": self.target_scaler.to_dict(),
            "params": self._params_to_dict(),
            "training_info": _jsonable(self.training_info),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainedRegressor":
        if "version" not in data:
            raise ConfigurationError("model file is missing the version field")
        if data["version"] != SERIALIZATION_VERSION:
            raise ConfigurationError(
                f"unsupported model version {data['version']}"
            )
        kind = data["kind"]
        klass = _REGISTRY.get(kind)
        if klass is None:
            raise ConfigurationError(f"unknown regressor kind {kind!r}")
        model = klass.__new__(klass)
        TrainedRegressor.__init__(
            model,
            modality=data["modality"],
            feature_scaler=Standardizer.from_dict(data["feature_scaler"]),
            target_scaler=Standardizer.from_dict(data["target_scaler"]),
            hyperparameters=Hyperparameters.from_dict(data["hyperparameters"]),
            dataset_fingerprint=data.get("dataset_fingerprint"),
            training_info=data.get("training_info") or {},
        )
        model.__dict__.update(klass._params_from_dict(data["params"]))
        return model

    def save(self, path) -> None:
        with open(path, "w") as handle:
            json.dump(self.to_dict(), handle)
            handle.write("\n")


def load_model(path) -> TrainedRegressor:
    with open(path) as handle:
        return TrainedRegressor.from_dict(json.load(handle))


_REGISTRY: Dict[str, type] = {}


def register_kind(klass: type) -> type:
    _REGISTRY[klass.kind] = klass
    return klass


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def validate_training_data(
    kind: str,
    modality: str,
    features: np.ndarray,
    targets: np.ndarray,
    traces: Optional[Sequence[TraceSamples]],
    hp: Hyperparameters,
) -> Tuple[np.ndarray, np.ndarray]:
    if kind not in REGRESSOR_KINDS:
        raise ConfigurationError(
            f"unknown regressor kind {kind!r}; choose one of: {', '.join(REGRESSOR_KINDS)}"
        )
    _check_modality(modality)
    features = np.atleast_2d(np.asarray(features, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if features.shape[0] == 0:
        raise TrainingError("no training rows")
    if features.shape[0] != targets.shape[0]:
        raise TrainingError(
            f"feature/target row mismatch: {features.shape[0]} vs {targets.shape[0]}"
        )
    if targets.shape[1] != output_dim(modality):
        raise TrainingError(
            f"{modality} expects {output_dim(modality)} target column(s), "
            f"got {targets.shape[1]}"
        )
    if not np.all(np.isfinite(features)):
        raise TrainingError("features contain NaN or infinity")
    if not np.all(np.isfinite(targets)):
        raise TrainingError("targets contain NaN or infinity")
    if kind == "knn" and features.shape[0] < hp.knn_neighbors:
        raise TrainingError(
            f"knn needs at least {hp.knn_neighbors} rows, got {features.shape[0]}"
        )
    if kind == "dtree" and features.shape[0] < hp.dtree_min_samples_leaf:
        raise TrainingError(
            f"dtree needs at least {hp.dtree_min_samples_leaf} rows, "
            f"got {features.shape[0]}"
        )
    if kind == "nn":
        if traces is None:
            raise TrainingError("nn training requires per-row flow samples")
        if len(traces) != features.shape[0]:
            raise TrainingError("one TraceSamples per training row is required")
    return features, targets


def split_dataset(records, train_fraction: float = 0.8, seed: int = 0,
                  geometry_key=None):
    """Deterministic geometry-level train/test split.

    Both outlets of one geometry always land on the same side.  The train
    side receives floor(train_fraction * n_geometries) geometries.
    """
    records = list(records)
    if len(records) < 2:
        raise ConfigurationError("need at least two records to split")
    if not (0.0 < train_fraction < 1.0):
        raise ConfigurationError("train_fraction must lie in (0, 1)")
    if geometry_key is None:
        geometry_key = lambda record: record.geometry_id
    keys = []
    seen = set()
    for record in records:
        key = geometry_key(record)
        if key not in seen:
            seen.add(key)
            keys.append(key)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(keys))
    n_train = int(math.floor(train_fraction * len(keys)))
    train_keys = {keys[i] for i in order[:n_train]}
    train = [r for r in records if geometry_key(r) in train_keys]
    test = [r for r in records if geometry_key(r) not in train_keys]
    return train, test

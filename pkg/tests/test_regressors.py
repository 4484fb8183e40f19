import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from junctionrom.errors import ConfigurationError, TrainingError
from junctionrom.regressors import (
    REGRESSOR_KINDS,
    Hyperparameters,
    Standardizer,
    TraceSamples,
    default_hyperparameters,
    load_model,
    output_dim,
    split_dataset,
    train,
)
from junctionrom.regressors.base import compose_dp
from junctionrom.regressors.neural import init_params, loss_and_gradient
from junctionrom.regressors.tree import iter_leaves, tree_depth


def synthetic_data(n_rows=60, n_targets=3, seed=0):
    """Smooth nonlinear map from 7 features to targets, plus trace samples."""
    rng = np.random.default_rng(seed)
    lo = np.array([0.3, 0.2, 0.2, 0.2, 0.2, 5.0, 5.0])
    hi = np.array([0.6, 0.45, 0.45, 0.9, 0.9, 12.0, 12.0])
    features = rng.uniform(lo, hi, size=(n_rows, 7))
    r_lin = -(30.0 + 40.0 * features[:, 5] / features[:, 1] ** 2)
    r_quad = -(1.0 + 3.0 * np.sin(features[:, 3]) / features[:, 1] ** 2)
    inductance = -(10.0 + features[:, 6] / features[:, 2] ** 2)
    targets = np.column_stack([r_lin, r_quad, inductance])[:, :n_targets]
    traces = []
    for i in range(n_rows):
        t = np.linspace(0.0, 0.2, 21)
        q = 20.0 * np.sin(np.pi * t / 0.2) ** 2
        q_dot = np.concatenate([[0.0], np.diff(q) / (t[1] - t[0])])
        coeffs = np.zeros(3)
        coeffs[:n_targets] = targets[i]
        dp = coeffs[0] * q + coeffs[1] * q * q + coeffs[2] * q_dot
        if n_targets == 1:
            dp = targets[i, 0] * q_dot
        traces.append(TraceSamples(q=q, q_dot=q_dot, dp=dp))
    return features, targets, traces


MODALITY_FOR_DIM = {2: "steady_rr", 1: "inductance", 3: "transient_to"}


class TestStandardizer:
    def test_round_trip(self):
        rng = np.random.default_rng(1)
        values = rng.normal(5.0, 3.0, size=(40, 4))
        scaler = Standardizer.fit(values)
        back = scaler.inverse_transform(scaler.transform(values))
        np.testing.assert_allclose(back, values, rtol=1e-12, atol=1e-12)

    def test_constant_dimension_flagged(self):
        values = np.column_stack([np.ones(10), np.arange(10.0)])
        scaler = Standardizer.fit(values)
        assert scaler.constant.tolist() == [True, False]
        assert scaler.std[0] == 1.0

    @settings(max_examples=50, deadline=None)
    @given(
        arrays(
            np.float64,
            (7, 3),
            elements=st.floats(-1e6, 1e6, allow_nan=False),
        )
    )
    def test_round_trip_property(self, values):
        scaler = Standardizer.fit(values)
        back = scaler.inverse_transform(scaler.transform(values))
        np.testing.assert_allclose(back, values, rtol=1e-9, atol=1e-9)


class TestSplitDataset:
    class Record:
        def __init__(self, geometry_id, outlet_index):
            self.geometry_id = geometry_id
            self.outlet_index = outlet_index

    def make_records(self, n_geometries):
        return [
            self.Record(g, outlet) for g in range(n_geometries) for outlet in (1, 2)
        ]

    @pytest.mark.parametrize(
        "n_geometries,expected_train,expected_test",
        [(187, 149, 38), (123, 98, 25), (110, 88, 22)],
    )
    def test_published_split_counts(self, n_geometries, expected_train, expected_test):
        records = self.make_records(n_geometries)
        train_side, test_side = split_dataset(records, seed=3)
        assert len({r.geometry_id for r in train_side}) == expected_train
        assert len({r.geometry_id for r in test_side}) == expected_test

    def test_partition_and_geometry_grouping(self):
        records = self.make_records(25)
        train_side, test_side = split_dataset(records, seed=9)
        assert len(train_side) + len(test_side) == len(records)
        train_ids = {r.geometry_id for r in train_side}
        test_ids = {r.geometry_id for r in test_side}
        assert train_ids.isdisjoint(test_ids)
        # both outlets of each geometry landed together
        for side, ids in ((train_side, train_ids), (test_side, test_ids)):
            by_geom = {}
            for r in side:
                by_geom.setdefault(r.geometry_id, set()).add(r.outlet_index)
            assert all(v == {1, 2} for v in by_geom.values())

    def test_deterministic_in_seed(self):
        records = self.make_records(30)
        a = split_dataset(records, seed=5)
        b = split_dataset(records, seed=5)
        assert [r.geometry_id for r in a[0]] == [r.geometry_id for r in b[0]]


class TestHyperparameters:
    def test_tuned_defaults(self):
        hp = Hyperparameters()
        assert hp.knn_neighbors == 7
        assert hp.dtree_max_depth == 4
        assert hp.dtree_min_samples_leaf == 8
        assert hp.svr_c == 1.4
        assert hp.svr_epsilon == 0.029
        assert hp.gpr_alpha == 0.002
        assert hp.gpr_length_scale == 1.6
        assert hp.nn_hidden_size == 48
        assert hp.nn_hidden_layers == 2
        assert hp.nn_learning_rate == 0.018
        assert hp.nn_lr_decay == 0.031
        assert hp.nn_batch_size == 24

    def test_isoradial_widens_network(self):
        assert default_hyperparameters("isoradial").nn_hidden_size == 70
        assert default_hyperparameters("pulmonary").nn_hidden_size == 48

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigurationError):
            Hyperparameters.from_dict({"bogus": 1})


class TestKNN:
    def test_k1_returns_exact_training_target(self):
        features, targets, _ = synthetic_data()
        hp = replace(Hyperparameters(), knn_neighbors=1)
        model = train("knn", "transient_to", features, targets, hyperparameters=hp)
        for i in range(0, len(features), 7):
            np.testing.assert_allclose(
                model.predict(features[i]), targets[i], rtol=1e-12
            )

    def test_needs_at_least_k_rows(self):
        features, targets, _ = synthetic_data(n_rows=5)
        with pytest.raises(TrainingError):
            train("knn", "transient_to", features, targets)


class TestLinear:
    def test_recovers_affine_map(self):
        rng = np.random.default_rng(3)
        features = rng.uniform(-1, 1, size=(50, 7))
        weights = rng.normal(size=(7, 2))
        intercept = np.array([3.0, -2.0])
        targets = features @ weights + intercept
        model = train("linear", "steady_rr", features, targets)
        residuals = model.predict_many(features) - targets
        assert np.max(np.abs(residuals)) <= 1e-8


class TestDecisionTree:
    def test_leaf_population_and_depth_bounds(self):
        features, targets, _ = synthetic_data(n_rows=80)
        model = train("dtree", "transient_to", features, targets)
        hp = model.hyperparameters
        assert tree_depth(model.root) <= hp.dtree_max_depth
        leaves = list(iter_leaves(model.root))
        assert all(leaf["count"] >= hp.dtree_min_samples_leaf for leaf in leaves)
        total = sum(leaf["count"] for leaf in leaves)
        assert total == 80

    def test_prediction_is_a_leaf_mean(self):
        features, targets, _ = synthetic_data(n_rows=80)
        model = train("dtree", "transient_to", features, targets)
        leaf_values = {
            tuple(np.round(leaf["value"], 12)) for leaf in iter_leaves(model.root)
        }
        rng = np.random.default_rng(5)
        probes = rng.uniform(features.min(0), features.max(0), size=(20, 7))
        for x in probes:
            std_pred = model._predict_std(model.feature_scaler.transform([x]))[0]
            assert tuple(np.round(std_pred, 12)) in leaf_values


class TestSVR:
    def test_dual_coefficients_respect_box(self):
        features, targets, _ = synthetic_data()
        model = train("svr", "transient_to", features, targets)
        c = model.hyperparameters.svr_c
        assert np.all(model.beta >= -c - 1e-12)
        assert np.all(model.beta <= c + 1e-12)

    def test_dual_objective_non_decreasing(self):
        features, targets, _ = synthetic_data()
        model = train("svr", "transient_to", features, targets)
        for diag in model.training_info["svr"]:
            history = diag["objective_history"]
            assert all(b >= a - 1e-10 for a, b in zip(history, history[1:]))

    def test_reaches_kkt_tolerance(self):
        features, targets, _ = synthetic_data()
        model = train("svr", "transient_to", features, targets)
        for diag in model.training_info["svr"]:
            assert diag["kkt_gap"] <= model.hyperparameters.svr_kkt_tol

    def test_fit_quality_on_smooth_data(self):
        features, targets, _ = synthetic_data(n_rows=120)
        model = train("svr", "transient_to", features, targets)
        pred = model.predict_many(features)
        scale = targets.std(axis=0)
        rel = np.abs(pred - targets) / scale
        assert np.median(rel) < 0.3


class TestGPR:
    def test_near_interpolation_for_tiny_ridge(self):
        features, targets, _ = synthetic_data(n_rows=40)
        hp = replace(Hyperparameters(), gpr_alpha=1e-10)
        model = train("gpr", "transient_to", features, targets, hyperparameters=hp)
        std_targets = model.target_scaler.transform(targets)
        std_pred = model._predict_std(model.feature_scaler.transform(features))
        assert np.max(np.abs(std_pred - std_targets)) <= 1e-6

    def test_training_error_shrinks_with_ridge(self):
        features, targets, _ = synthetic_data(n_rows=40)
        errors = []
        for alpha in (1e-1, 1e-2, 1e-3):
            hp = replace(Hyperparameters(), gpr_alpha=alpha)
            model = train("gpr", "transient_to", features, targets, hyperparameters=hp)
            pred = model.predict_many(features)
            errors.append(float(np.max(np.abs(pred - targets))))
        assert errors[0] > errors[1] > errors[2]


class TestNeuralNetwork:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(8)
        n_rows, n_features, n_out, n_samples = 5, 7, 3, 4
        params = init_params(rng, [n_features, 4, 4, n_out])
        features = rng.normal(size=(n_rows, n_features))
        phi = rng.normal(size=(n_rows, n_samples, n_out))
        dp = rng.normal(size=(n_rows, n_samples))
        mask = np.ones((n_rows, n_samples))
        counts = np.full(n_rows, float(n_samples))
        mean = rng.normal(size=n_out)
        std = rng.uniform(0.5, 2.0, size=n_out)

        loss, grads = loss_and_gradient(
            params, features, phi, dp, mask, counts, mean, std, 1.0
        )

        def loss_at(p):
            value, _ = loss_and_gradient(
                p, features, phi, dp, mask, counts, mean, std, 1.0,
                with_gradient=False,
            )
            return value

        h = 1e-6
        for layer in range(len(params)):
            for arr_idx in (0, 1):
                analytic = grads[layer][arr_idx]
                numeric = np.zeros_like(analytic)
                it = np.nditer(analytic, flags=["multi_index"])
                while not it.finished:
                    idx = it.multi_index
                    perturbed = [
                        (w.copy(), b.copy()) for w, b in params
                    ]
                    arr = perturbed[layer][arr_idx]
                    arr[idx] += h
                    up = loss_at(perturbed)
                    arr[idx] -= 2 * h
                    down = loss_at(perturbed)
                    numeric[idx] = (up - down) / (2 * h)
                    it.iternext()
                scale = np.maximum(np.abs(analytic), np.abs(numeric))
                scale = np.maximum(scale, 1e-8)
                assert np.max(np.abs(analytic - numeric) / scale) <= 1e-4

    def test_training_is_deterministic(self):
        features, targets, traces = synthetic_data(n_rows=40)
        hp = replace(Hyperparameters(), nn_epochs=30, nn_hidden_size=8)
        a = train("nn", "transient_to", features, targets, traces, hp, seed=5)
        b = train("nn", "transient_to", features, targets, traces, hp, seed=5)
        probe = features[:5]
        assert np.array_equal(a.predict_many(probe), b.predict_many(probe))

    def test_requires_traces(self):
        features, targets, _ = synthetic_data(n_rows=30)
        with pytest.raises(TrainingError):
            train("nn", "transient_to", features, targets)

    def test_learns_composed_pressure_map(self):
        features, targets, traces = synthetic_data(n_rows=60)
        hp = replace(Hyperparameters(), nn_hidden_size=24)
        model = train("nn", "transient_to", features, targets, traces, hp, seed=2)
        pred = model.predict_many(features)
        # Composed-loss training should land near the generating coefficients.
        rel = np.abs(pred - targets) / targets.std(axis=0)
        assert np.median(rel) < 0.5


class TestComposeDp:
    def test_modalities(self):
        q = np.array([[1.0, 2.0]])
        q_dot = np.array([[3.0, 4.0]])
        np.testing.assert_allclose(
            compose_dp("steady_rr", np.array([[2.0, 1.0]]), q, q_dot),
            [[2 * 1 + 1 * 1, 2 * 2 + 1 * 4]],
        )
        np.testing.assert_allclose(
            compose_dp("inductance", np.array([[-0.5]]), q, q_dot),
            [[-1.5, -2.0]],
        )
        np.testing.assert_allclose(
            compose_dp("transient_to", np.array([[2.0, 1.0, -0.5]]), q, q_dot),
            [[2 + 1 - 1.5, 4 + 4 - 2.0]],
        )


class TestSerialization:
    @pytest.mark.parametrize("kind", REGRESSOR_KINDS)
    def test_round_trip_is_bitwise(self, kind, tmp_path):
        modality = "transient_to"
        features, targets, traces = synthetic_data(n_rows=40)
        hp = replace(Hyperparameters(), nn_epochs=20, nn_hidden_size=8)
        model = train(
            kind, modality, features, targets,
            traces if kind == "nn" else None, hp, seed=4,
            dataset_fingerprint="abc123",
        )
        path = tmp_path / f"{kind}.json"
        model.save(path)
        loaded = load_model(path)
        assert loaded.kind == kind
        assert loaded.dataset_fingerprint == "abc123"
        probe = features[::5]
        assert np.array_equal(model.predict_many(probe), loaded.predict_many(probe))

    def test_version_field_is_mandatory(self, tmp_path):
        features, targets, _ = synthetic_data(n_rows=20)
        model = train("linear", "transient_to", features, targets)
        data = model.to_dict()
        del data["version"]
        path = tmp_path / "model.json"
        path.write_text(json.dumps(data))
        with pytest.raises(ConfigurationError, match="version"):
            load_model(path)

    def test_prediction_is_pure(self):
        features, targets, _ = synthetic_data(n_rows=20)
        model = train("gpr", "transient_to", features, targets)
        x = features[3]
        first = model.predict(x)
        second = model.predict(x)
        assert np.array_equal(first, second)


class TestValidation:
    def test_rejects_nan_features(self):
        features, targets, _ = synthetic_data(n_rows=20)
        features[0, 0] = np.nan
        with pytest.raises(TrainingError):
            train("linear", "transient_to", features, targets)

    def test_rejects_wrong_target_width(self):
        features, targets, _ = synthetic_data(n_rows=20)
        with pytest.raises(TrainingError):
            train("linear", "steady_rr", features, targets)

    def test_output_dims(self):
        assert output_dim("steady_rr") == 2
        assert output_dim("inductance") == 1
        assert output_dim("transient_to") == 3

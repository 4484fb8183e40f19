"""Decision-tree regression with variance-reduction splitting.

Splits greedily on the squared-error reduction summed across all target
dimensions, bounded by a maximum depth and a minimum leaf population; leaves
predict the mean target of their training rows.
"""

from __future__ import annotations

import numpy as np

from .base import TrainedRegressor, register_kind


def _column_sse(cumsum, cumsq, count):
    # Sum of squared errors around the mean, per target, from prefix sums.
    return cumsq - cumsum**2 / count


def _best_split(features, targets, min_leaf):
    """Best (feature, threshold, reduction) or None when no legal split helps."""
    n, n_features = features.shape
    if n < 2 * min_leaf:
        return None
    total_sse = float(np.sum(targets.var(axis=0)) * n)
    best = None
    for j in range(n_features):
        order = np.argsort(features[:, j], kind="stable")
        xs = features[order, j]
        ys = targets[order]
        cum = np.cumsum(ys, axis=0)
        cumsq = np.cumsum(ys * ys, axis=0)
        total = cum[-1]
        total_sq = cumsq[-1]
        for i in range(min_leaf, n - min_leaf + 1):
            if xs[i - 1] == xs[i]:
                continue
            left = float(np.sum(_column_sse(cum[i - 1], cumsq[i - 1], i)))
            right_count = n - i
            right = float(
                np.sum(_column_sse(total - cum[i - 1], total_sq - cumsq[i - 1], right_count))
            )
            reduction = total_sse - (left + right)
            if best is None or reduction > best[2]:
                best = (j, 0.5 * (xs[i - 1] + xs[i]), reduction)
    if best is None or best[2] <= 0.0:
        return None
    return best


def _grow(features, targets, depth, max_depth, min_leaf):
    if depth < max_depth:
        split = _best_split(features, targets, min_leaf)
    else:
        split = None
    if split is None:
        return {"value": targets.mean(axis=0).tolist(), "count": int(len(targets))}
    feature, threshold, _ = split
    mask = features[:, feature] <= threshold
    return {
        "feature": int(feature),
        "threshold": float(threshold),
        "left": _grow(features[mask], targets[mask], depth + 1, max_depth, min_leaf),
        "right": _grow(features[~mask], targets[~mask], depth + 1, max_depth, min_leaf),
    }


def iter_leaves(node):
    if "value" in node:
        yield node
    else:
        yield from iter_leaves(node["left"])
        yield from iter_leaves(node["right"])


def tree_depth(node):
    if "value" in node:
        return 0
    return 1 + max(tree_depth(node["left"]), tree_depth(node["right"]))


@register_kind
class DecisionTreeRegressor(TrainedRegressor):
    kind = "dtree"

    def _fit(self, features_std: np.ndarray, targets_std: np.ndarray) -> None:
        self.root = _grow(
            features_std,
            targets_std,
            depth=0,
            max_depth=self.hyperparameters.dtree_max_depth,
            min_leaf=self.hyperparameters.dtree_min_samples_leaf,
        )

    def _predict_std(self, features_std: np.ndarray) -> np.ndarray:
        out = []
        for x in features_std:
            node = self.root
            while "value" not in node:
                node = node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]
            out.append(node["value"])
        return np.array(out, dtype=float)

    def _params_to_dict(self) -> dict:
        return {"root": self.root}

    @classmethod
    def _params_from_dict(cls, data: dict) -> dict:
        return {"root": data["root"]}

"""Regression tree and gradient-boosted ensemble with exact greedy splits."""

from __future__ import annotations

import heapq
import warnings

import numpy as np

from ..errors import ConfigWarning, InsufficientDataError
from ..series import SupervisedWindowSet

MIN_GAIN = 1e-12


def _sse(total: float, total_sq: float, count: int) -> float:
    return total_sq - total * total / count


def best_split(
    features: np.ndarray, targets: np.ndarray, min_child: int = 1
) -> tuple[int, float, float] | None:
    """Exact variance-reduction scan over every feature and threshold.

    Returns (feature index, midpoint threshold, SSE reduction) for the best
    split, or None when no split improves. Thresholds sit between distinct
    sorted values, so the result is invariant to sample order; ties prefer
    the lowest feature index, then the lowest threshold.
    """
    n = len(targets)
    if n < 2 * min_child:
        return None
    total = float(targets.sum())
    total_sq = float((targets * targets).sum())
    parent = _sse(total, total_sq, n)
    best: tuple[int, float, float] | None = None
    for f in range(features.shape[1]):
        column = features[:, f]
        order = np.argsort(column)
        xs = column[order]
        ys = targets[order]
        cut = np.nonzero(xs[:-1] < xs[1:])[0]
        if min_child > 1:
            left_ok = cut + 1 >= min_child
            right_ok = n - cut - 1 >= min_child
            cut = cut[left_ok & right_ok]
        if cut.size == 0:
            continue
        cum = np.cumsum(ys)
        cum_sq = np.cumsum(ys * ys)
        left_count = cut + 1
        right_count = n - left_count
        left_sse = cum_sq[cut] - cum[cut] ** 2 / left_count
        right_sse = (total_sq - cum_sq[cut]) - (total - cum[cut]) ** 2 / right_count
        gains = parent - left_sse - right_sse
        pick = int(np.argmax(gains))
        gain = float(gains[pick])
        if gain <= MIN_GAIN:
            continue
        if best is None or gain > best[2]:
            threshold = float((xs[cut[pick]] + xs[cut[pick] + 1]) / 2.0)
            best = (f, threshold, gain)
    return best


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, value: float):
        self.feature: int | None = None
        self.threshold = 0.0
        self.left: "_Node | None" = None
        self.right: "_Node | None" = None
        self.value = value

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


class RegressionTree:
    """CART-style tree grown best-first so the leaf budget binds gracefully.

    Candidate leaves are expanded in order of decreasing variance reduction
    until max_leaves is reached, depth runs out, or no split improves.
    """

    def __init__(self, max_depth: int = 4, max_leaves: int = 25, min_child_samples: int = 1):
        self.max_depth = max_depth
        self.max_leaves = max_leaves
        self.min_child_samples = min_child_samples
        self.root: _Node | None = None

    def fit(self, windows: SupervisedWindowSet, seed: int = 0) -> "RegressionTree":
        self.fit_arrays(windows.inputs, windows.targets)
        return self

    def fit_arrays(self, features: np.ndarray, targets: np.ndarray) -> "RegressionTree":
        if len(targets) == 0:
            raise InsufficientDataError("cannot fit a tree on zero samples")
        self.root = _Node(float(targets.mean()))
        leaves = 1
        counter = 0
        heap: list[tuple[float, int, _Node, np.ndarray, tuple[int, float]]] = []

        def consider(node: _Node, index: np.ndarray, depth: int):
            nonlocal counter
            if depth >= self.max_depth:
                return
            found = best_split(features[index], targets[index], self.min_child_samples)
            if found is None:
                return
            f, threshold, gain = found
            heapq.heappush(heap, (-gain, counter, node, index, (f, threshold), depth))
            counter += 1

        all_index = np.arange(len(targets))
        consider(self.root, all_index, 0)
        while heap and leaves < self.max_leaves:
            _, _, node, index, (f, threshold), depth = heapq.heappop(heap)
            mask = features[index, f] <= threshold
            left_index, right_index = index[mask], index[~mask]
            node.feature = f
            node.threshold = threshold
            node.left = _Node(float(targets[left_index].mean()))
            node.right = _Node(float(targets[right_index].mean()))
            leaves += 1
            consider(node.left, left_index, depth + 1)
            consider(node.right, right_index, depth + 1)
        return self

    def predict(self, features: np.ndarray) -> np.ndarray:
        if self.root is None:
            raise InsufficientDataError("tree is not fitted")
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        out = np.empty(len(features))
        for i, row in enumerate(features):
            node = self.root
            while not node.is_leaf:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.value
        return out

    def depth(self) -> int:
        def walk(node: _Node) -> int:
            if node.is_leaf:
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root) if self.root else 0

    def leaf_count(self) -> int:
        def walk(node: _Node) -> int:
            if node.is_leaf:
                return 1
            return walk(node.left) + walk(node.right)

        return walk(self.root) if self.root else 0

    def to_dict(self) -> dict:
        """Flat node-list encoding: children referenced by list index."""
        nodes: list[dict] = []

        def emit(node: _Node) -> int:
            slot = len(nodes)
            nodes.append({})
            if node.is_leaf:
                nodes[slot] = {"leaf": node.value}
            else:
                left = emit(node.left)
                right = emit(node.right)
                nodes[slot] = {
                    "feature": node.feature,
                    "threshold": node.threshold,
                    "left": left,
                    "right": right,
                }
            return slot

        if self.root is not None:
            emit(self.root)
        return {
            "max_depth": self.max_depth,
            "max_leaves": self.max_leaves,
            "min_child_samples": self.min_child_samples,
            "nodes": nodes,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RegressionTree":
        tree = cls(payload["max_depth"], payload["max_leaves"], payload["min_child_samples"])
        nodes = payload["nodes"]
        if not nodes:
            return tree

        def build(slot: int) -> _Node:
            raw = nodes[slot]
            if "leaf" in raw:
                return _Node(raw["leaf"])
            node = _Node(0.0)
            node.feature = raw["feature"]
            node.threshold = raw["threshold"]
            node.left = build(raw["left"])
            node.right = build(raw["right"])
            return node

        tree.root = build(0)
        return tree


class GradientBoostedTrees:
    """Stagewise boosting of shallow exact-split trees on squared error.

    Early stopping watches MSE on the chronological last 20% of windows with
    the configured patience; the kept ensemble is the best-scoring prefix.
    """

    def __init__(
        self,
        estimators: int = 500,
        learning_rate: float = 0.01,
        subsample: float = 0.8,
        min_child_samples: int = 90,
        early_stopping_rounds: int = 400,
        inner_depth: int = 3,
    ):
        self.estimators = estimators
        self.learning_rate = learning_rate
        self.subsample = subsample
        self.min_child_samples = min_child_samples
        self.early_stopping_rounds = early_stopping_rounds
        self.inner_depth = inner_depth
        self.initial = 0.0
        self.trees: list[RegressionTree] = []

    def fit(self, windows: SupervisedWindowSet, seed: int = 0) -> "GradientBoostedTrees":
        features, targets = windows.inputs, windows.targets
        n = len(targets)
        if n < 2:
            raise InsufficientDataError(f"boosting needs >= 2 windows, got {n}")
        min_child = self.min_child_samples
        if min_child > n:
            warnings.warn(
                f"min_child_samples {min_child} exceeds window count {n}; clamping",
                ConfigWarning,
                stacklevel=2,
            )
            min_child = n
        val_count = max(1, int(round(0.2 * n))) if n >= 5 else 0
        fit_count = n - val_count
        train_x, train_y = features[:fit_count], targets[:fit_count]
        val_x, val_y = features[fit_count:], targets[fit_count:]

        rng = np.random.default_rng(seed)
        self.initial = float(train_y.mean())
        self.trees = []
        residual = train_y - self.initial
        val_pred = np.full(val_count, self.initial)
        best_val = float(np.mean((val_y - val_pred) ** 2)) if val_count else np.inf
        best_round = 0
        stale = 0
        sample_size = max(1, int(round(self.subsample * fit_count)))
        for _ in range(self.estimators):
            if self.subsample < 1.0:
                chosen = rng.choice(fit_count, size=sample_size, replace=False)
            else:
                chosen = np.arange(fit_count)
            tree = RegressionTree(
                max_depth=self.inner_depth, max_leaves=2**self.inner_depth,
                min_child_samples=min_child,
            )
            tree.fit_arrays(train_x[chosen], residual[chosen])
            self.trees.append(tree)
            residual -= self.learning_rate * tree.predict(train_x)
            if val_count:
                val_pred += self.learning_rate * tree.predict(val_x)
                val_mse = float(np.mean((val_y - val_pred) ** 2))
                if val_mse < best_val - 1e-15:
                    best_val = val_mse
                    best_round = len(self.trees)
                    stale = 0
                else:
                    stale += 1
                    if stale >= self.early_stopping_rounds:
                        break
        if val_count and best_round < len(self.trees):
            self.trees = self.trees[:best_round]
        return self

    def predict(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        out = np.full(len(features), self.initial)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(features)
        return out

    def training_curve(self, features: np.ndarray, targets: np.ndarray) -> list[float]:
        """MSE after each boosting round, for monotonicity diagnostics."""
        pred = np.full(len(targets), self.initial)
        curve = [float(np.mean((targets - pred) ** 2))]
        for tree in self.trees:
            pred += self.learning_rate * tree.predict(features)
            curve.append(float(np.mean((targets - pred) ** 2)))
        return curve

    def to_dict(self) -> dict:
        return {
            "initial": self.initial,
            "learning_rate": self.learning_rate,
            "trees": [tree.to_dict() for tree in self.trees],
        }

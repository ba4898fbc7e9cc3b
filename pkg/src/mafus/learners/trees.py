"""Decision-tree structure and builders.

One flat-array tree type serves three consumers: impurity-split
classification trees (bagged forests), and second-order gradient trees
grown depth-wise or leaf-wise (boosting). Split-use counts per feature
are tracked exactly; the relevance module consumes them.

Routing convention everywhere: x[feature] < threshold goes left.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np


class Tree:
    """Flat-array binary tree; leaves carry a real value."""

    __slots__ = ("feature", "threshold", "left", "right", "value", "gain")

    def __init__(self, feature, threshold, left, right, value, gain):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.gain = np.asarray(gain, dtype=np.float64)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_internal(self) -> int:
        return int(np.sum(self.feature >= 0))

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            f = self.feature[node]
            if f < 0:
                out[idx] = self.value[node]
                continue
            goes_left = X[idx, f] < self.threshold[node]
            stack.append((self.left[node], idx[goes_left]))
            stack.append((self.right[node], idx[~goes_left]))
        return out

    def split_counts(self, d: int) -> np.ndarray:
        counts = np.zeros(d, dtype=np.int64)
        for f in self.feature:
            if f >= 0:
                counts[f] += 1
        return counts

    def split_gains(self, d: int) -> np.ndarray:
        gains = np.zeros(d)
        for f, g in zip(self.feature, self.gain):
            if f >= 0:
                gains[f] += g
        return gains

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        return cls(doc["feature"], doc["threshold"], doc["left"], doc["right"],
                   doc["value"], doc["gain"])


class _TreeBuilder:
    """Accumulates nodes; leaves have feature -1."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.gain: list[float] = []

    def add(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.gain.append(0.0)
        return len(self.feature) - 1

    def make_internal(self, node: int, feature: int, threshold: float, gain: float) -> tuple[int, int]:
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.gain[node] = gain
        self.left[node] = self.add()
        self.right[node] = self.add()
        return self.left[node], self.right[node]

    def build(self) -> Tree:
        return Tree(self.feature, self.threshold, self.left, self.right, self.value, self.gain)


def _candidate_boundaries(values_sorted: np.ndarray) -> np.ndarray:
    """Indices k where a split between positions k-1 and k is meaningful."""
    diff = values_sorted[1:] != values_sorted[:-1]
    return np.flatnonzero(diff) + 1


def _midpoint(a: float, b: float) -> float:
    m = 0.5 * (a + b)
    return b if m <= a else m  # float collapse: keep a strictly left


# ---------------------------------------------------------------------------
# Impurity splits (classification / forests)
# ---------------------------------------------------------------------------

def _child_impurity(s1, s0, criterion):
    """Weighted impurity mass of a child given class weight sums."""
    total = s1 + s0
    with np.errstate(divide="ignore", invalid="ignore"):
        p1 = np.where(total > 0, s1 / total, 0.0)
        p0 = np.where(total > 0, s0 / total, 0.0)
        if criterion == "gini":
            imp = 1.0 - p1 * p1 - p0 * p0
        else:  # entropy
            imp = -(np.where(p1 > 0, p1 * np.log2(p1), 0.0)
                    + np.where(p0 > 0, p0 * np.log2(p0), 0.0))
    return total * imp


def _best_impurity_split(X, y, w, idx, features, criterion, min_samples_leaf):
    """Split minimizing weighted child impurity over the given features."""
    best = None  # (impurity, feature, threshold, k, order)
    for f in features:
        values = X[idx, f]
        order = np.argsort(values, kind="mergesort")
        v = values[order]
        boundaries = _candidate_boundaries(v)
        if boundaries.size == 0:
            continue
        keep = (boundaries >= min_samples_leaf) & (boundaries <= len(v) - min_samples_leaf)
        boundaries = boundaries[keep]
        if boundaries.size == 0:
            continue
        wi = w[idx][order]
        yi = y[idx][order]
        cw1 = np.cumsum(wi * (yi == 1.0))
        cw0 = np.cumsum(wi * (yi == 0.0))
        t1, t0 = cw1[-1], cw0[-1]
        left = _child_impurity(cw1[boundaries - 1], cw0[boundaries - 1], criterion)
        right = _child_impurity(t1 - cw1[boundaries - 1], t0 - cw0[boundaries - 1], criterion)
        total = left + right
        k = int(np.argmin(total))
        if best is None or total[k] < best[0]:
            b = boundaries[k]
            best = (float(total[k]), int(f), _midpoint(v[b - 1], v[b]), b, order)
    return best


def build_classification_tree(X, y, w, rng, max_depth, criterion="gini",
                              max_features=None, min_samples_leaf=1) -> Tree:
    """Depth-wise impurity tree; leaf value = weighted class-1 share.

    max_features, when set, draws that many candidate features per split
    from rng (classic forest-style subsampling).
    """
    d = X.shape[1]
    builder = _TreeBuilder()
    root = builder.add()
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        wi = w[idx]
        s1 = float(np.sum(wi * (y[idx] == 1.0)))
        s0 = float(np.sum(wi * (y[idx] == 0.0)))
        builder.value[node] = s1 / (s1 + s0)
        pure = s1 == 0.0 or s0 == 0.0
        depth_done = max_depth is not None and depth >= max_depth
        if pure or depth_done or idx.size < 2 * min_samples_leaf:
            continue
        if max_features is not None and max_features < d:
            features = np.sort(rng.choice(d, size=max_features, replace=False))
        else:
            features = np.arange(d)
        found = _best_impurity_split(X, y, w, idx, features, criterion, min_samples_leaf)
        if found is None:
            continue
        impurity, f, thr, k, order = found
        parent = _child_impurity(np.array([s1]), np.array([s0]), criterion)[0]
        left, right = builder.make_internal(node, f, thr, float(parent - impurity))
        stack.append((left, idx[order[:k]], depth + 1))
        stack.append((right, idx[order[k:]], depth + 1))
    return builder.build()


# ---------------------------------------------------------------------------
# Gradient splits (boosting)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GradTreeParams:
    max_depth: int | None = 6      # None or negative = unlimited
    num_leaves: int | None = None  # leaf-wise cap; None = unlimited
    growth: str = "depth"          # depth | leaf
    reg_lambda: float = 1.0
    reg_alpha: float = 0.0
    min_gain: float = 0.0          # minimum loss reduction to split
    min_child_weight: float = 1.0

    @property
    def depth_cap(self) -> float:
        if self.max_depth is None or self.max_depth < 0:
            return np.inf
        return float(self.max_depth)


def _soft_threshold(G, alpha):
    return np.where(G > alpha, G - alpha, np.where(G < -alpha, G + alpha, 0.0))


def _structure_score(G, H, params):
    t = _soft_threshold(G, params.reg_alpha)
    denom = np.maximum(H + params.reg_lambda, 1e-12)
    return t * t / denom


def _leaf_weight(G: float, H: float, params: GradTreeParams) -> float:
    t = _soft_threshold(np.asarray(G), params.reg_alpha)
    denom = max(H + params.reg_lambda, 1e-12)
    return float(-t / denom)


def _best_gradient_split(X, g, h, idx, features, params):
    """Split maximizing the second-order gain, or None.

    gain = 0.5 * (score_L + score_R - score_parent); a split qualifies
    only when gain exceeds min_gain and both children carry at least
    min_child_weight of hessian mass.
    """
    G = float(np.sum(g[idx]))
    H = float(np.sum(h[idx]))
    parent = float(_structure_score(np.asarray(G), np.asarray(H), params))
    best = None  # (gain, feature, threshold, k, order)
    for f in features:
        values = X[idx, f]
        order = np.argsort(values, kind="mergesort")
        v = values[order]
        boundaries = _candidate_boundaries(v)
        if boundaries.size == 0:
            continue
        cg = np.cumsum(g[idx][order])
        ch = np.cumsum(h[idx][order])
        GL, HL = cg[boundaries - 1], ch[boundaries - 1]
        GR, HR = G - GL, H - HL
        ok = (HL >= params.min_child_weight) & (HR >= params.min_child_weight)
        if not ok.any():
            continue
        gains = 0.5 * (_structure_score(GL, HL, params) + _structure_score(GR, HR, params) - parent)
        gains[~ok] = -np.inf
        k = int(np.argmax(gains))
        if gains[k] <= params.min_gain:
            continue
        if best is None or gains[k] > best[0]:
            b = boundaries[k]
            best = (float(gains[k]), int(f), _midpoint(v[b - 1], v[b]), b, order)
    return best


def build_gradient_tree(X, g, h, params: GradTreeParams, features=None) -> Tree:
    """Grow a regression tree on gradient/hessian targets.

    Depth-wise growth splits every splittable node level by level;
    leaf-wise growth repeatedly splits the current best leaf until
    num_leaves is reached. Both share the same split search, so a
    depth-1 tree and a 2-leaf tree are structurally identical.
    """
    if features is None:
        features = np.arange(X.shape[1])
    builder = _TreeBuilder()
    root = builder.add()
    all_idx = np.arange(X.shape[0])
    builder.value[root] = _leaf_weight(float(np.sum(g)), float(np.sum(h)), params)

    if params.growth == "depth":
        stack = [(root, all_idx, 0)]
        while stack:
            node, idx, depth = stack.pop()
            builder.value[node] = _leaf_weight(float(np.sum(g[idx])), float(np.sum(h[idx])), params)
            if depth >= params.depth_cap:
                continue
            found = _best_gradient_split(X, g, h, idx, features, params)
            if found is None:
                continue
            gain, f, thr, k, order = found
            left, right = builder.make_internal(node, f, thr, gain)
            stack.append((left, idx[order[:k]], depth + 1))
            stack.append((right, idx[order[k:]], depth + 1))
        return builder.build()

    if params.growth != "leaf":
        raise ValueError(f"unknown growth policy {params.growth!r}")

    # Leaf-wise: heap of pending splits keyed by (-gain, creation order).
    cap = params.num_leaves if params.num_leaves is not None else np.inf
    counter = 0
    heap = []

    def push(node, idx, depth):
        nonlocal counter
        if depth >= params.depth_cap:
            return
        found = _best_gradient_split(X, g, h, idx, features, params)
        if found is not None:
            heapq.heappush(heap, (-found[0], counter, node, idx, depth, found))
            counter += 1

    push(root, all_idx, 0)
    n_leaves = 1
    while heap and n_leaves < cap:
        _, _, node, idx, depth, found = heapq.heappop(heap)
        gain, f, thr, k, order = found
        left, right = builder.make_internal(node, f, thr, gain)
        left_idx, right_idx = idx[order[:k]], idx[order[k:]]
        builder.value[left] = _leaf_weight(float(np.sum(g[left_idx])), float(np.sum(h[left_idx])), params)
        builder.value[right] = _leaf_weight(float(np.sum(g[right_idx])), float(np.sum(h[right_idx])), params)
        n_leaves += 1
        push(left, left_idx, depth + 1)
        push(right, right_idx, depth + 1)
    return builder.build()

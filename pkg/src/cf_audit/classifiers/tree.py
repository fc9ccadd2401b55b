"""CART decision trees (Gini) and random forests of them."""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .base import as_matrix, encode_labels


@njit(cache=True)
def _leaves(X, feature, threshold, left, right, root):
    out = np.empty(X.shape[0], np.int64)
    for i in range(X.shape[0]):
        node = root
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=True)
def _votes(X, feature, threshold, left, right, leaf_class, roots, n_classes):
    votes = np.zeros((X.shape[0], n_classes), np.int64)
    # tree-major order keeps one tree's nodes in cache across all points
    for t in range(roots.shape[0]):
        for i in range(X.shape[0]):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            votes[i, leaf_class[node]] += 1
    return votes


def _best_split(X, onehot, features, n_try, min_leaf):
    """Best Gini split over `features`, searched in order.

    At least `n_try` features are examined; the search continues past them
    only while no valid split has been found.  Zero-gain splits are allowed
    (XOR-like data needs them).
    """
    n = X.shape[0]
    nl = np.arange(1, n, dtype=float)
    nr = n - nl
    size_ok = (nl >= min_leaf) & (nr >= min_leaf)
    total = onehot.sum(axis=0)
    best = (math.inf, -1, 0.0)
    for count, f in enumerate(features):
        if count >= n_try and best[1] >= 0:
            break
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        valid = size_ok & (xs[1:] > xs[:-1])
        if not np.any(valid):
            continue
        cl = np.cumsum(onehot[order], axis=0)[:-1]
        cr = total - cl
        score = (nl - (cl * cl).sum(axis=1) / nl) + (nr - (cr * cr).sum(axis=1) / nr)
        score = np.where(valid, score, math.inf)
        p = int(np.argmin(score))
        if score[p] < best[0]:
            thr = 0.5 * (xs[p] + xs[p + 1])
            if not thr < xs[p + 1]:
                thr = xs[p]
            best = (score[p], f, thr)
    return best[1], best[2]


def _grow(X, codes, n_classes, max_depth, min_leaf, feature_frac, rng):
    d = X.shape[1]
    n_try = d if feature_frac is None else max(1, int(round(feature_frac * d)))
    onehot = np.eye(n_classes)[codes]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(onehot[idx].sum(axis=0))
        return len(feature) - 1

    stack = [(new_node(np.arange(X.shape[0])), np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = value[node]
        if np.count_nonzero(counts) <= 1 or len(idx) < 2 * min_leaf:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        features = rng.permutation(d) if n_try < d else np.arange(d)
        f, thr = _best_split(X[idx], onehot[idx], features, n_try, min_leaf)
        if f < 0:
            continue
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node] = int(f)
        threshold[node] = float(thr)
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return (np.array(feature, np.int64), np.array(threshold, float),
            np.array(left, np.int64), np.array(right, np.int64), np.array(value, float))


class DecisionTree:
    family = "tree"
    has_confidence = True

    def __init__(self, feature, threshold, left, right, value, classes, params=None):
        self.feature = np.asarray(feature, np.int64)
        self.threshold = np.asarray(threshold, float)
        self.left = np.asarray(left, np.int64)
        self.right = np.asarray(right, np.int64)
        self.value = np.asarray(value, float).reshape(len(self.feature), -1)
        self.classes_ = np.asarray(classes, np.int64)
        self.params = dict(params or {})
        self.leaf_class = np.argmax(self.value, axis=1).astype(np.int64)

    @property
    def n_nodes(self):
        return len(self.feature)

    def apply(self, X):
        return _leaves(as_matrix(X), self.feature, self.threshold, self.left, self.right, 0)

    def predict(self, X):
        return self.classes_[self.leaf_class[self.apply(X)]]

    def predict_confidence(self, X):
        v = self.value[self.apply(X)]
        return v / v.sum(axis=1, keepdims=True)

    def paths(self):
        """(leaf index, [(feature, goes_left, threshold), ...]) for every leaf."""
        out = []
        stack = [(0, [])]
        while stack:
            node, path = stack.pop()
            if self.feature[node] < 0:
                out.append((node, path))
                continue
            f, t = int(self.feature[node]), float(self.threshold[node])
            stack.append((int(self.right[node]), path + [(f, False, t)]))
            stack.append((int(self.left[node]), path + [(f, True, t)]))
        return out

    def state(self):
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist(), "classes": self.classes_.tolist()}

    @classmethod
    def from_state(cls, state, params=None):
        return cls(state["feature"], state["threshold"], state["left"], state["right"],
                   state["value"], state["classes"], params)


def train_tree(X, y, max_depth=None, min_leaf=1, rng=None, feature_frac=None, classes=None):
    """Fit a CART tree.  `feature_frac` < 1 samples features at every split."""
    X = as_matrix(X)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValueError("cannot train on empty data")
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y lengths differ")
    if classes is None:
        classes, codes = encode_labels(y)
    else:
        classes = np.asarray(classes, np.int64)
        codes = np.searchsorted(classes, y)
    rng = np.random.default_rng(rng)
    arrays = _grow(X, codes, len(classes), max_depth, min_leaf, feature_frac, rng)
    params = {"max_depth": max_depth, "min_leaf": min_leaf, "feature_frac": feature_frac}
    return DecisionTree(*arrays, classes, params)


class RandomForest:
    """Majority vote of trees; ties go to the lowest class id."""

    family = "forest"
    has_confidence = True

    def __init__(self, trees, classes, params=None):
        if not trees:
            raise ValueError("a forest needs at least one tree")
        self.trees = list(trees)
        self.classes_ = np.asarray(classes, np.int64)
        self.params = dict(params or {})
        offsets = np.cumsum([0] + [t.n_nodes for t in self.trees[:-1]])
        shift = lambda a, o: np.where(a >= 0, a + o, -1)
        self._feature = np.concatenate([t.feature for t in self.trees])
        self._threshold = np.concatenate([t.threshold for t in self.trees])
        self._left = np.concatenate([shift(t.left, o) for t, o in zip(self.trees, offsets)])
        self._right = np.concatenate([shift(t.right, o) for t, o in zip(self.trees, offsets)])
        self._leaf_class = np.concatenate([t.leaf_class for t in self.trees])
        self._roots = offsets.astype(np.int64)

    @property
    def n_trees(self):
        return len(self.trees)

    def votes(self, X):
        return _votes(as_matrix(X), self._feature, self._threshold, self._left, self._right,
                      self._leaf_class, self._roots, len(self.classes_))

    def predict(self, X):
        return self.classes_[np.argmax(self.votes(X), axis=1)]

    def predict_confidence(self, X):
        return self.votes(X) / float(self.n_trees)

    def state(self):
        return {"classes": self.classes_.tolist(), "trees": [t.state() for t in self.trees]}

    @classmethod
    def from_state(cls, state, params=None):
        return cls([DecisionTree.from_state(t) for t in state["trees"]], state["classes"], params)


def train_forest(X, y, n_trees=200, max_depth=None, feature_frac="sqrt", min_leaf=1,
                 bootstrap=True, rng=None):
    """Random forest: one bootstrap sample and per-split feature sampling per tree.

    feature_frac="sqrt" uses sqrt(d) features per split; None uses all of them.
    """
    X = as_matrix(X)
    y = np.asarray(y)
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if X.shape[0] == 0:
        raise ValueError("cannot train on empty data")
    d = X.shape[1]
    frac = math.sqrt(d) / d if feature_frac == "sqrt" else feature_frac
    classes, _ = encode_labels(y)
    rng = np.random.default_rng(rng)
    seeds = rng.integers(0, 2**63 - 1, size=n_trees)
    trees = []
    for s in seeds:
        tree_rng = np.random.default_rng(int(s))
        if bootstrap:
            idx = tree_rng.integers(0, X.shape[0], size=X.shape[0])
        else:
            idx = np.arange(X.shape[0])
        trees.append(train_tree(X[idx], y[idx], max_depth=max_depth, min_leaf=min_leaf,
                                rng=tree_rng, feature_frac=frac, classes=classes))
    params = {"n_trees": n_trees, "max_depth": max_depth, "feature_frac": feature_frac,
              "min_leaf": min_leaf, "bootstrap": bootstrap}
    return RandomForest(trees, classes, params)

"""Logistic regression (gradient descent on log-loss) and k-nearest neighbours."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .base import as_matrix, encode_labels


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_loss_and_grad(params, X, y01, l2=0.0):
    """Mean binary log-loss (+ l2/2 |w|^2) and its gradient.

    `params` is [w_1..w_d, b]; `y01` holds 0/1 targets.
    """
    w, b = params[:-1], params[-1]
    z = X @ w + b
    # log(1 + e^z) - y z, computed stably
    loss = np.mean(np.logaddexp(0.0, z) - y01 * z) + 0.5 * l2 * float(w @ w)
    r = (_sigmoid(z) - y01) / X.shape[0]
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r + l2 * w
    grad[-1] = r.sum()
    return loss, grad


class LogisticRegression:
    family = "logreg"
    has_confidence = True

    def __init__(self, weights, bias, classes, params=None):
        self.weights = np.asarray(weights, float)
        self.bias = float(bias)
        self.classes_ = np.asarray(classes, np.int64)
        self.params = dict(params or {})

    def decision_function(self, X):
        return as_matrix(X) @ self.weights + self.bias

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(np.int64)]

    def predict_confidence(self, X):
        p = _sigmoid(self.decision_function(X))
        return np.column_stack([1 - p, p])

    def state(self):
        return {"weights": self.weights.tolist(), "bias": self.bias,
                "classes": self.classes_.tolist()}

    @classmethod
    def from_state(cls, state, params=None):
        return cls(state["weights"], state["bias"], state["classes"], params)


def train_logreg(X, y, lr=0.5, iters=2000, l2=0.0):
    X = as_matrix(X)
    classes, codes = encode_labels(y)
    if len(classes) != 2:
        raise ValueError("logistic regression here is binary only")
    params = np.zeros(X.shape[1] + 1)
    y01 = codes.astype(float)
    for _ in range(iters):
        _, grad = log_loss_and_grad(params, X, y01, l2)
        params -= lr * grad
    return LogisticRegression(params[:-1], params[-1], classes,
                              {"lr": lr, "iters": iters, "l2": l2})


class KNN:
    """k-nearest-neighbour vote; ties go to the lowest class id."""

    family = "knn"
    has_confidence = True

    def __init__(self, X, y, k=1, params=None):
        self.X = as_matrix(X).copy()
        self.y = np.asarray(y, np.int64).copy()
        self.k = int(k)
        self.classes_, self._codes = encode_labels(self.y)
        self.params = dict(params or {"k": self.k})
        self._tree = cKDTree(self.X)

    def predict_confidence(self, X):
        X = as_matrix(X)
        _, idx = self._tree.query(X, k=self.k)
        idx = np.asarray(idx).reshape(X.shape[0], self.k)
        votes = np.zeros((X.shape[0], len(self.classes_)))
        np.add.at(votes, (np.repeat(np.arange(X.shape[0]), self.k), self._codes[idx].ravel()), 1.0)
        return votes / self.k

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_confidence(X), axis=1)]

    def state(self):
        return {"X": self.X.tolist(), "y": self.y.tolist(), "k": self.k}

    @classmethod
    def from_state(cls, state, params=None):
        return cls(state["X"], state["y"], state["k"], params)


def train_knn(X, y, k=1):
    X = as_matrix(X)
    if k < 1 or k > X.shape[0]:
        raise ValueError(f"k must be in [1, {X.shape[0]}], got {k}")
    return KNN(X, y, k)

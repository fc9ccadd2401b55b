from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np


@runtime_checkable
class BlackBox(Protocol):
    """Query-only view of a classifier.

    `predict` maps an (m, d) array to m labels.  Models with
    `has_confidence` also answer `predict_confidence` with an (m, n_classes)
    array whose columns follow `classes_`.
    """

    classes_: np.ndarray
    has_confidence: bool

    def predict(self, X) -> np.ndarray: ...


def as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected a (m, d) array, got shape {X.shape}")
    return X


def encode_labels(y):
    """Sorted class ids and the index of each label among them."""
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] == 0:
        raise ValueError("labels must be a non-empty 1-D array")
    classes, codes = np.unique(y, return_inverse=True)
    return classes.astype(np.int64), codes.astype(np.int64)


class CountingBlackBox:
    """Wraps a black box and counts the points it is asked about."""

    def __init__(self, model):
        self.model = model
        self.queries = 0
        self.classes_ = model.classes_
        self.has_confidence = getattr(model, "has_confidence", False)

    def predict(self, X):
        X = as_matrix(X)
        self.queries += X.shape[0]
        return self.model.predict(X)

    def predict_confidence(self, X):
        X = as_matrix(X)
        self.queries += X.shape[0]
        return self.model.predict_confidence(X)

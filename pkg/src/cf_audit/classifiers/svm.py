"""Binary Gaussian-kernel SVM trained by SMO (maximal violating pair)."""
from __future__ import annotations

import numpy as np

from .base import as_matrix, encode_labels

_TAU = 1e-12


def rbf_kernel(A, B, gamma):
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def _smo(K, y, C, tol, max_iter):
    n = len(y)
    alpha = np.zeros(n)
    G = -np.ones(n)
    Q = K * np.outer(y, y)
    QD = np.diag(Q).copy()
    for _ in range(max_iter):
        up = ((alpha < C) & (y > 0)) | ((alpha > 0) & (y < 0))
        low = ((alpha < C) & (y < 0)) | ((alpha > 0) & (y > 0))
        score = -y * G
        if not (np.any(up) and np.any(low)):
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        if score[i] - score[j] < tol:
            break
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(QD[i] + QD[j] + 2 * Q[i, j], _TAU)
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = max(QD[i] + QD[j] - 2 * Q[i, j], _TAU)
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        G += Q[i] * (ni - ai) + Q[j] * (nj - aj)
        alpha[i], alpha[j] = ni, nj
    free = (alpha > 0) & (alpha < C)
    yg = y * G
    if np.any(free):
        rho = yg[free].mean()
    else:
        up = ((alpha < C) & (y > 0)) | ((alpha > 0) & (y < 0))
        low = ((alpha < C) & (y < 0)) | ((alpha > 0) & (y > 0))
        ub = yg[up].min() if np.any(up) else np.inf
        lb = yg[low].max() if np.any(low) else -np.inf
        rho = 0.5 * (ub + lb) if np.isfinite(ub + lb) else 0.0
    return alpha, -rho


class RbfSvm:
    family = "svm"
    # confidences are a plain sigmoid of the decision value, not calibrated
    has_confidence = True

    def __init__(self, support, coef, bias, gamma, classes, params=None):
        self.support = as_matrix(support) if len(support) else np.empty((0, 0))
        self.coef = np.asarray(coef, float)
        self.bias = float(bias)
        self.gamma = float(gamma)
        self.classes_ = np.asarray(classes, np.int64)
        self.params = dict(params or {})

    def decision_function(self, X):
        X = as_matrix(X)
        if self.coef.size == 0:
            return np.full(X.shape[0], self.bias)
        out = np.empty(X.shape[0])
        for s in range(0, X.shape[0], 4096):
            out[s:s + 4096] = rbf_kernel(X[s:s + 4096], self.support, self.gamma) @ self.coef
        return out + self.bias

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(np.int64)]

    def predict_confidence(self, X):
        p = 1.0 / (1.0 + np.exp(-np.clip(self.decision_function(X), -500, 500)))
        return np.column_stack([1 - p, p])

    def state(self):
        return {"support": self.support.tolist(), "coef": self.coef.tolist(), "bias": self.bias,
                "gamma": self.gamma, "classes": self.classes_.tolist()}

    @classmethod
    def from_state(cls, state, params=None):
        return cls(state["support"], state["coef"], state["bias"], state["gamma"],
                   state["classes"], params)


def train_rbf_svm(X, y, C=1.0, gamma=None, tol=1e-3, max_iter=100_000):
    """Solve the C-SVM dual to KKT violation < tol.  gamma defaults to 1/d."""
    X = as_matrix(X)
    classes, codes = encode_labels(y)
    if len(classes) != 2:
        raise ValueError("RbfSvm is binary only")
    gamma = 1.0 / X.shape[1] if gamma is None else float(gamma)
    ys = np.where(codes == 1, 1.0, -1.0)
    alpha, bias = _smo(rbf_kernel(X, X, gamma), ys, float(C), tol, max_iter)
    sv = alpha > 0
    return RbfSvm(X[sv], (alpha * ys)[sv], bias, gamma, classes,
                  {"C": C, "gamma": gamma, "tol": tol})

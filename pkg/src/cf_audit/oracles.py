"""Brute-force references and analytically known classifiers.

Nothing here imports the production geometry / clustering code, so these can
serve as independent checks of it, on the shipped geometries or on your own.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np


def _dist_matrix(points):
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    out = np.zeros((n, n))
    for a in range(n):
        diff = points - points[a]
        out[a] = np.sqrt((diff * diff).sum(axis=1))
    return out


def dbscan_reference(points, eps, min_pts=2):
    """Textbook DBSCAN with neighbourhoods {q : d(p, q) < eps} (p included).

    Returns labels with -1 for noise.
    """
    dist = _dist_matrix(points)
    n = dist.shape[0]
    neighbours = [np.nonzero(dist[p] < eps)[0] for p in range(n)]
    core = np.array([len(nb) >= min_pts for nb in neighbours])
    labels = np.full(n, -1)
    cid = 0
    for p in range(n):
        if labels[p] != -1 or not core[p]:
            continue
        labels[p] = cid
        queue = deque([p])
        while queue:
            q = queue.popleft()
            if not core[q]:
                continue
            for r in neighbours[q]:
                if labels[r] == -1:
                    labels[r] = cid
                    queue.append(r)
        cid += 1
    return labels


def partition_from_dbscan(labels):
    """Noise points become singletons, matching the epsilon-graph view."""
    groups = {}
    for i, lab in enumerate(labels):
        key = ("noise", i) if lab == -1 else lab
        groups.setdefault(key, []).append(i)
    return frozenset(frozenset(g) for g in groups.values())


def max_nn_distance_bruteforce(points):
    points = [list(map(float, p)) for p in points]
    best = 0.0
    for i, p in enumerate(points):
        nearest = math.inf
        for j, q in enumerate(points):
            if i != j:
                nearest = min(nearest, math.sqrt(sum((a - b) ** 2 for a, b in zip(p, q))))
        best = max(best, nearest)
    return best


def sorted_anchor_indices(x, predicted_x, X, y, train_pred):
    """Full scan: correctly predicted other-class training points by distance, then index."""
    rows = []
    for idx in range(len(X)):
        if y[idx] != predicted_x and train_pred[idx] == y[idx]:
            dist = math.sqrt(sum((float(a) - float(b)) ** 2 for a, b in zip(X[idx], x)))
            rows.append((dist, idx))
    rows.sort()
    return [idx for _, idx in rows]


class _Synthetic:
    classes_ = np.array([0, 1])
    n_classes = 2
    has_confidence = True

    def predict(self, X):
        return np.argmax(self.predict_confidence(X), axis=1)


@dataclass
class RadialClassifier(_Synthetic):
    """Class 1 strictly beyond `radius` from `center`, class 0 inside."""

    center: np.ndarray
    radius: float = 1.0
    sharpness: float = 10.0

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        r = np.sqrt(((X - np.asarray(self.center, dtype=float)) ** 2).sum(axis=1))
        return (r > self.radius).astype(np.int64)

    def predict_confidence(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        r = np.sqrt(((X - np.asarray(self.center, dtype=float)) ** 2).sum(axis=1))
        p = 1.0 / (1.0 + np.exp(-self.sharpness * (r - self.radius)))
        # keep the label and the confidence argmax consistent at r == radius
        p = np.where(r > self.radius, np.maximum(p, 0.5 + 1e-12), np.minimum(p, 0.5))
        return np.column_stack([1 - p, p])


@dataclass
class HalfPlaneClassifier(_Synthetic):
    """Class 1 iff X[:, axis] > threshold."""

    axis: int = 0
    threshold: float = 0.5

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return (X[:, self.axis] > self.threshold).astype(np.int64)

    def predict_confidence(self, X):
        lab = self.predict(X)
        return np.column_stack([1 - lab, lab]).astype(float)


@dataclass
class PocketGeometry:
    """2-D class-1 regions: an axis-aligned square pocket plus the half-plane
    X[:, axis] >= boundary.  Everything else is class 0.

    The studied instance is `x` (class 0) and `a0` is a class-1 training point
    on the half-plane; the ball B(x, d(x, a0)) is where the risk is measured.
    """

    x: tuple = (0.0, 0.0)
    pocket_center: tuple = (-0.5, 0.0)
    pocket_side: float = 0.2
    axis: int = 0
    boundary: float = 0.9
    a0: tuple = (1.0, 0.0)

    def in_pocket(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        c = np.asarray(self.pocket_center, dtype=float)
        return np.all(np.abs(X - c) <= self.pocket_side / 2, axis=1)

    def training_set(self):
        """Training points: none in the pocket, a0 closest class-1 point to x."""
        class0 = [(0.0, 0.0), (0.0, 0.6), (0.0, -0.6), (-0.3, 0.45), (0.35, -0.3),
                  (-0.9, 0.3), (-0.85, -0.35), (0.4, 0.7), (-0.1, -1.4), (-1.6, 0.1)]
        a0 = np.asarray(self.a0, dtype=float)
        class1 = [tuple(a0)]
        for k, off in enumerate([(0.3, 0.2), (0.25, -0.45), (0.6, 0.0), (0.5, 0.7),
                                 (0.9, -0.6), (1.2, 0.3), (0.4, 1.1), (1.5, -1.0)]):
            class1.append(tuple(a0 + np.asarray(off)))
        X = np.array(class0 + class1, dtype=float)
        y = np.array([0] * len(class0) + [1] * len(class1), dtype=np.int64)
        return X, y

    def ball_radius(self):
        return math.dist(self.x, self.a0)

    def pocket_center_point(self):
        return np.asarray(self.pocket_center, dtype=float)


@dataclass
class PocketClassifier(_Synthetic):
    geometry: PocketGeometry

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        g = self.geometry
        return (g.in_pocket(X) | (X[:, g.axis] >= g.boundary)).astype(np.int64)

    def predict_confidence(self, X):
        lab = self.predict(X)
        return np.column_stack([1 - lab, lab]).astype(float)

    def to_dict(self):
        g = self.geometry
        return {"x": list(g.x), "pocket_center": list(g.pocket_center),
                "pocket_side": g.pocket_side, "axis": g.axis,
                "boundary": g.boundary, "a0": list(g.a0)}

    @classmethod
    def from_dict(cls, d):
        return cls(PocketGeometry(x=tuple(d["x"]), pocket_center=tuple(d["pocket_center"]),
                                  pocket_side=d["pocket_side"], axis=d["axis"],
                                  boundary=d["boundary"], a0=tuple(d["a0"])))


def pocket_classifier(geometry: PocketGeometry) -> PocketClassifier:
    return PocketClassifier(geometry)


def _segment_area(r, offset):
    """Area of {p in disk(0, r) : p_axis >= offset}."""
    if offset >= r:
        return 0.0
    if offset <= -r:
        return math.pi * r * r
    return r * r * math.acos(offset / r) - offset * math.sqrt(r * r - offset * offset)


def exact_risk(geometry: PocketGeometry, x=None, a0=None) -> float:
    """Analytic share of the class-1 area in B(x, d(x, a0)) that is the pocket.

    Only pockets entirely inside or entirely outside the ball are supported;
    the half-plane piece is assumed connected to a0 (it is convex and a0 lies
    on it).
    """
    x = np.asarray(geometry.x if x is None else x, dtype=float)
    a0 = np.asarray(geometry.a0 if a0 is None else a0, dtype=float)
    if x.shape != (2,) or a0.shape != (2,):
        raise ValueError("exact_risk supports 2-D geometries only")
    r = math.dist(x, a0)
    if a0[geometry.axis] < geometry.boundary:
        raise ValueError("a0 must lie in the half-plane class-1 region")
    c = np.asarray(geometry.pocket_center, dtype=float)
    h = geometry.pocket_side / 2
    corners = [c + np.array([sx * h, sy * h]) for sx in (-1, 1) for sy in (-1, 1)]
    far = max(math.dist(x, q) for q in corners)
    # closest point of the square to x
    near = math.dist(x, np.clip(x, c - h, c + h))
    if c[geometry.axis] + h >= geometry.boundary:
        raise ValueError("pocket must not touch the half-plane region")
    if far <= r:
        pocket_area = geometry.pocket_side ** 2
    elif near >= r:
        pocket_area = 0.0
    else:
        raise ValueError("pocket partially overlapping the ball is not supported")
    plane_area = _segment_area(r, geometry.boundary - x[geometry.axis])
    total = pocket_area + plane_area
    return 0.0 if total == 0 else pocket_area / total


def grid_closest_enemy(x, f, half_width, resolution=801):
    """Dense 2-D grid search for the closest point predicted differently from x."""
    x = np.asarray(x, dtype=float)
    lab = f.predict(x[None, :])[0]
    axes = [np.linspace(c - half_width, c + half_width, resolution) for c in x]
    gx, gy = np.meshgrid(*axes, indexing="ij")
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    enemy = f.predict(grid) != lab
    if not np.any(enemy):
        return math.inf
    return float(np.sqrt(((grid[enemy] - x) ** 2).sum(axis=1)).min())

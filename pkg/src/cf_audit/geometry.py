"""Euclidean metric and uniform samplers over balls and spherical layers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not np.isfinite(self.radius) or self.radius < 0:
            raise ValueError(f"ball radius must be finite and >= 0, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.center.shape[0]


@dataclass(frozen=True)
class SphericalLayer:
    """Region r_inner <= |p - center| <= r_outer."""

    center: np.ndarray
    r_inner: float
    r_outer: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not (0 <= self.r_inner <= self.r_outer) or not np.isfinite(self.r_outer):
            raise ValueError(
                f"invalid layer radii: r_inner={self.r_inner}, r_outer={self.r_outer}"
            )

    @property
    def dim(self) -> int:
        return self.center.shape[0]


def as_point(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.shape[0] < 1:
        raise ValueError(f"a point must be a non-empty 1-D vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point coordinates must be finite")
    return p


def distance(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def distances_to(points, center) -> np.ndarray:
    """Distances from every row of `points` to `center`."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    center = np.asarray(center, dtype=float)
    if points.shape[1] != center.shape[0]:
        raise ValueError(f"dimension mismatch: {points.shape[1]} vs {center.shape[0]}")
    return np.sqrt(np.sum((points - center) ** 2, axis=1))


def _directions(n, d, rng):
    g = rng.standard_normal((n, d))
    norms = np.sqrt(np.sum(g * g, axis=1))
    # a zero Gaussian draw has probability zero, but keep the output finite anyway
    bad = norms == 0
    if np.any(bad):
        g[bad] = 0.0
        g[bad, 0] = 1.0
        norms[bad] = 1.0
    return g / norms[:, None]


def _place(center, dirs, radii, r_min, r_max):
    """center + dirs * radii, nudged so that rounding never leaves [r_min, r_max]."""
    pts = center + dirs * radii[:, None]
    if r_min == r_max:
        return pts
    mid = 0.5 * (r_min + r_max)
    frac = 2.0 ** -50
    # pull stray points towards mid-layer, doubling the pull each pass
    for _ in range(52):
        dist = distances_to(pts, center)
        bad = (dist > r_max) | (dist < r_min)
        if not np.any(bad):
            break
        edge = np.where(dist[bad] > r_max, r_max, r_min)
        target = edge + (mid - edge) * frac
        pts[bad] = center + dirs[bad] * target[:, None]
        frac = min(1.0, 2 * frac)
    return pts


def sample_ball(ball: Ball, n: int, rng) -> np.ndarray:
    """Draw `n` points uniformly from the volume of `ball`, shape (n, d)."""
    return sample_layer(SphericalLayer(ball.center, 0.0, ball.radius), n, rng)


def sample_layer(layer: SphericalLayer, n: int, rng) -> np.ndarray:
    """Draw `n` points uniformly from the volume of a spherical layer.

    Radii follow the inverse of F(r) = (r^d - r_in^d) / (r_out^d - r_in^d).
    The ratio r_in / r_out is used instead of raw powers so large d cannot
    overflow.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = np.random.default_rng(rng)
    d = layer.dim
    c = layer.center
    if n == 0:
        return np.empty((0, d))
    if layer.r_outer == 0:
        return np.tile(c, (n, 1))
    dirs = _directions(n, d, rng)
    u = rng.random(n)
    q = (layer.r_inner / layer.r_outer) ** d
    radii = layer.r_outer * (q + u * (1.0 - q)) ** (1.0 / d)
    radii = np.clip(radii, layer.r_inner, layer.r_outer)
    return _place(c, dirs, radii, layer.r_inner, layer.r_outer)


def layer_volume_ratio(r_inner: float, r_outer: float, r_ref: float, d: int) -> float:
    """vol(layer(r_inner, r_outer)) / vol(ball(r_ref)) in dimension d."""
    return (r_outer / r_ref) ** d - (r_inner / r_ref) ** d

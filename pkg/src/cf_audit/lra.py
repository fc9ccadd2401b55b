"""Local risk assessment: how much of the counterfactual class near an
instance x is not epsilon-connected to correctly predicted training data.

Procedure for one instance:

1. a0 is the closest correctly predicted training point of another class.
   n points are drawn uniformly in B(x, d(x, a0)); epsilon is the largest
   nearest-neighbour distance among them.
2. The samples predicted f(a0) are clustered together with a0.  a0's
   cluster is justified.
3. Unjustified clusters are followed outward by sampling spherical layers
   up to the next anchors and merging what lands within epsilon.  A cluster
   whose members all lie eps inside the explored radius can no longer grow
   and is stalled; exploration ends when no cluster of initial samples is
   still growing or the anchors run out.

n_J / n_U count the *initial* ball samples by the final status of their
cluster.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .classifiers.base import as_matrix
from .connect import GROWING, STALLED, auto_epsilon, cluster, merge_new
from .geometry import Ball, SphericalLayer, as_point, distances_to, sample_ball, sample_layer

DEFAULT_MAX_LAYERS = 50
DEFAULT_DENSITY_CAP = 10.0


class NoAnchorError(ValueError):
    """No correctly predicted training instance of the required class."""


@dataclass
class AnchorList:
    indices: np.ndarray
    points: np.ndarray
    distances: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return len(self.indices)

    def select(self, mask):
        return AnchorList(self.indices[mask], self.points[mask], self.distances[mask],
                          self.labels[mask])


def _train_arrays(train):
    if hasattr(train, "X"):
        return np.asarray(train.X, dtype=float), np.asarray(train.y)
    X, y = train
    return as_matrix(X), np.asarray(y)


def sorted_training(center, f, train, train_pred=None, keep=None) -> AnchorList:
    """Correctly predicted training points passing `keep(labels)`, sorted by
    distance to `center` (ties by training index)."""
    X, y = _train_arrays(train)
    if train_pred is None:
        train_pred = f.predict(X)
    ok = train_pred == y
    if keep is not None:
        ok &= keep(y)
    idx = np.nonzero(ok)[0]
    dist = distances_to(X[idx], center) if idx.size else np.empty(0)
    order = np.lexsort((idx, dist))
    idx = idx[order]
    return AnchorList(idx, X[idx], dist[order], y[idx])


def anchors(x, f, train, train_pred=None) -> AnchorList:
    """Correctly predicted training instances of a class other than f(x), closest first."""
    x = as_point(x)
    fx = f.predict(x[None, :])[0]
    out = sorted_training(x, f, train, train_pred, keep=lambda y: y != fx)
    if len(out) == 0:
        raise NoAnchorError("no counterfactual class representative")
    return out


@dataclass
class LRAReport:
    n_J: int
    n_U: int
    n_samples: int
    epsilon: float
    layers_explored: int
    radius: float
    a0_index: int
    counterfactual_class: int
    sample_justified: np.ndarray = field(repr=False)
    empty_ball: bool = False
    exhausted: bool = False
    wall_time: float = 0.0


@dataclass(frozen=True)
class RiskScores:
    S: int
    R: float


def scores(report: LRAReport) -> RiskScores:
    total = report.n_U + report.n_J
    return RiskScores(int(report.n_U > 0), report.n_U / total if total else 0.0)


def expand_layers(state, radii, center, f, target, anch: AnchorList, n, r0, rng,
                  tracked, stop=None, max_layers=DEFAULT_MAX_LAYERS,
                  density_cap=DEFAULT_DENSITY_CAP):
    """Grow `state` outward from B(center, r0) through spherical layers.

    Each round covers (r_in, r_out] and adds every anchor inside it.  r_out
    is the next anchor distance, widened to r_in + eps when that is closer,
    but never so far that matched density would need more than
    density_cap * n points: layer counts always equal the volume ratio
    times n.  A growing cluster stalls once all its members lie at least eps
    inside r_out, since later points cannot reach it.  `tracked` indexes the
    points whose clusters decide when to stop; `stop(state)` can end the
    loop early.

    Returns (state, radii, rounds, exhausted) where exhausted means some
    tracked cluster was still growing when the anchors or rounds ran out.
    """
    d = center.shape[0]
    eps = state.eps
    r_in = r0
    nxt = 1
    rounds = 0

    def growing_tracked(st):
        return [c for c in np.unique(st.labels[tracked]).tolist() if st.status[c] == GROWING]

    while growing_tracked(state):
        if stop is not None and stop(state):
            return state, radii, rounds, False
        if nxt >= len(anch) or rounds >= max_layers:
            return state, radii, rounds, True
        # farthest r_out whose layer holds at most density_cap * n matched-density points:
        # r_out^d - r_in^d = cap * r0^d, written so large d cannot overflow
        r_cap = r_in * math.exp(math.log1p(density_cap * (r0 / r_in) ** d) / d)
        r_cap = max(r_cap, math.nextafter(r_in, math.inf))
        r_out = min(max(float(anch.distances[nxt]), r_in + eps), r_cap)
        stop_at = int(np.searchsorted(anch.distances, r_out, side="right"))
        ratio = (r_in / r0) ** d * math.expm1(d * math.log(r_out / r_in))
        m = int(min(density_cap * n, max(1, math.ceil(n * ratio))))
        pts = sample_layer(SphericalLayer(center, r_in, r_out), m, rng)
        pts = pts[f.predict(pts) == target]
        new_a = anch.select(slice(nxt, stop_at))
        # new points all lie beyond r_in, so only existing points past r_in - eps can link
        cand = np.nonzero(radii > r_in - eps)[0]
        state, _ = merge_new(state, pts, new_a.points, anchor_ids=new_a.indices,
                             candidates=cand)
        radii = np.concatenate([radii, distances_to(pts, center) if len(pts) else [],
                                new_a.distances])
        reach = np.full(state.n_points, -np.inf)
        np.maximum.at(reach, state.labels, radii)
        for c, s in state.status.items():
            if s == GROWING and reach[c] <= r_out - eps:
                state.status[c] = STALLED
        r_in = r_out
        nxt = stop_at
        rounds += 1
    return state, radii, rounds, False


def lra(x, f, train, n=2000, rng=None, *, train_pred=None, max_layers=DEFAULT_MAX_LAYERS,
        density_cap=DEFAULT_DENSITY_CAP, multiclass=False) -> LRAReport:
    """Run the local risk assessment around `x` (see module docstring)."""
    if n < 2:
        raise ValueError("n must be >= 2 so that epsilon is defined")
    t0 = time.perf_counter()
    x = as_point(x)
    rng = np.random.default_rng(rng)
    if len(f.classes_) > 2 and not multiclass:
        raise ValueError("LRA supports binary classifiers; pass multiclass=True to override")
    anch = anchors(x, f, train, train_pred)
    target = anch.labels[0]
    anch = anch.select(anch.labels == target)
    r0 = float(anch.distances[0])

    ball = sample_ball(Ball(x, r0), n, rng)
    eps = auto_epsilon(ball)
    cf = ball[f.predict(ball) == target]
    n_cf = cf.shape[0]
    if n_cf == 0:
        return LRAReport(0, 0, n, eps, 0, r0, int(anch.indices[0]), int(target),
                         np.zeros(0, bool), empty_ball=True,
                         wall_time=time.perf_counter() - t0)

    pts = np.vstack([cf, anch.points[:1]])
    ids = np.concatenate([np.full(n_cf, -1, np.int64), anch.indices[:1]])
    state = cluster(pts, eps, ids)
    radii = np.concatenate([distances_to(cf, x), anch.distances[:1]])
    tracked = np.arange(n_cf)
    state, radii, rounds, exhausted = expand_layers(
        state, radii, x, f, target, anch, n, r0, rng, tracked,
        max_layers=max_layers, density_cap=density_cap)

    justified = np.isin(state.labels[:n_cf], state.justified_ids())
    n_J = int(justified.sum())
    return LRAReport(n_J, n_cf - n_J, n, eps, rounds, r0, int(anch.indices[0]), int(target),
                     justified, exhausted=exhausted, wall_time=time.perf_counter() - t0)


def _instance_seeds(rng, n_instances, runs):
    rng = np.random.default_rng(rng)
    return rng.integers(0, 2**63 - 1, size=(n_instances, runs))


@dataclass
class InstanceRisk:
    instance: int
    status: str
    S: float = 0.0
    R: float = 0.0
    n_J: float = 0.0
    n_U: float = 0.0
    epsilon: float = 0.0
    layers: float = 0.0
    empty_balls: int = 0
    wall_time: float = 0.0
    runs: list = field(default_factory=list, repr=False)


@dataclass
class AggregateRisk:
    S_bar: float
    R_bar: float
    R_std: float
    n_instances: int
    n_skipped: int
    instances: list


def aggregate(test_X, f, train, n=2000, runs=10, rng=None, *, max_layers=DEFAULT_MAX_LAYERS,
              density_cap=DEFAULT_DENSITY_CAP, progress=None) -> AggregateRisk:
    """Mean S_x and R_x per instance over `runs` seeded repetitions, then
    averaged over instances (R also gets its std across instances).

    Instances without any anchor are reported with status "no_anchor" and
    left out of the averages.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    test_X = as_matrix(test_X)
    Xtr, ytr = _train_arrays(train)
    train_pred = f.predict(Xtr)
    seeds = _instance_seeds(rng, test_X.shape[0], runs)
    rows = []
    for i, x in enumerate(test_X):
        try:
            reports = [lra(x, f, (Xtr, ytr), n, int(s), train_pred=train_pred,
                           max_layers=max_layers, density_cap=density_cap) for s in seeds[i]]
        except NoAnchorError:
            rows.append(InstanceRisk(i, "no_anchor"))
            continue
        sc = [scores(r) for r in reports]
        rows.append(InstanceRisk(
            i, "ok",
            S=float(np.mean([s.S for s in sc])),
            R=float(np.mean([s.R for s in sc])),
            n_J=float(np.mean([r.n_J for r in reports])),
            n_U=float(np.mean([r.n_U for r in reports])),
            epsilon=float(np.mean([r.epsilon for r in reports])),
            layers=float(np.mean([r.layers_explored for r in reports])),
            empty_balls=sum(r.empty_ball for r in reports),
            wall_time=float(sum(r.wall_time for r in reports)),
            runs=[(r.n_J, r.n_U, s.S, s.R) for r, s in zip(reports, sc)],
        ))
        if progress is not None:
            progress(i, rows[-1])
    used = [r for r in rows if r.status == "ok"]
    if not used:
        return AggregateRisk(0.0, 0.0, 0.0, 0, len(rows), rows)
    R = np.array([r.R for r in used])
    return AggregateRisk(float(np.mean([r.S for r in used])), float(R.mean()), float(R.std()),
                         len(used), len(rows) - len(used), rows)


def n_sweep(x, f, train, n_grid, rng=None, runs=1, **kwargs):
    """R_x (mean over runs) for each n in `n_grid`; one row per requested n."""
    seeds = _instance_seeds(rng, len(n_grid), runs)
    out = []
    for n, row_seeds in zip(n_grid, seeds):
        reps = [lra(x, f, train, int(n), int(s), **kwargs) for s in row_seeds]
        sc = [scores(r) for r in reps]
        out.append({"n": int(n), "R": float(np.mean([s.R for s in sc])),
                    "S": float(np.mean([s.S for s in sc])),
                    "epsilon": float(np.mean([r.epsilon for r in reps]))})
    return out

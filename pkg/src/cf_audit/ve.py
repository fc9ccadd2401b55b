"""Vulnerability evaluation: is a generated counterfactual justified, and how
often do generators produce justified ones on risky instances?"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifiers.base import as_matrix
from .connect import JUSTIFIED, auto_epsilon, cluster
from .generators import Counterfactual, NoCounterfactualError
from .geometry import Ball, as_point, distances_to, sample_ball
from .lra import (DEFAULT_DENSITY_CAP, DEFAULT_MAX_LAYERS, NoAnchorError, _instance_seeds,
                  _train_arrays, expand_layers, lra, scores, sorted_training)


@dataclass
class VEResult:
    J: int
    witness: int | None
    layers_explored: int
    epsilon: float
    b0_index: int
    counterfactual: Counterfactual | None = None
    outcome: str = ""

    @property
    def exhausted(self):
        return self.witness is None


def justification_check(e, f, train, n=2000, rng=None, *, train_pred=None,
                        max_layers=DEFAULT_MAX_LAYERS, density_cap=DEFAULT_DENSITY_CAP):
    """J = 1 iff e is epsilon-chained to a correctly predicted training point of class f(e).

    Samples B(e, d(e, b0)) with b0 the closest such point, clusters the
    samples of class f(e) with e and b0 (epsilon recomputed from this ball),
    then widens through layers towards b1, b2, ... until e's cluster meets
    an anchor (J=1) or stops growing / runs out of anchors (J=0).
    `witness` is the training index of the anchor reached, else None.
    """
    e = as_point(e)
    rng = np.random.default_rng(rng)
    fe = f.predict(e[None, :])[0]
    anch = sorted_training(e, f, train, train_pred, keep=lambda y: y == fe)
    if len(anch) == 0:
        raise NoAnchorError("no correctly predicted training instance of the counterfactual class")
    r0 = float(anch.distances[0])
    b0 = int(anch.indices[0])
    if r0 == 0.0:
        return VEResult(1, b0, 0, 0.0, b0, outcome="training point")

    ball = sample_ball(Ball(e, r0), n, rng)
    eps = auto_epsilon(ball)
    same = ball[f.predict(ball) == fe]
    k = same.shape[0]
    pts = np.vstack([same, e[None, :], anch.points[:1]])
    ids = np.concatenate([np.full(k + 1, -1, np.int64), anch.indices[:1]])
    state = cluster(pts, eps, ids)
    radii = np.concatenate([distances_to(same, e) if k else [], [0.0], anch.distances[:1]])

    def e_justified(st):
        return st.status[int(st.labels[k])] == JUSTIFIED

    state, radii, rounds, _ = expand_layers(state, radii, e, f, fe, anch, n, r0, rng,
                                            tracked=np.array([k]), stop=e_justified,
                                            max_layers=max_layers, density_cap=density_cap)
    cid = int(state.labels[k])
    if state.status[cid] == JUSTIFIED:
        members = state.anchor_ids[state.labels == cid]
        reached = members[members >= 0]
        # report the anchor closest to e among those in its cluster
        rank = {int(a): i for i, a in enumerate(anch.indices)}
        witness = min((int(a) for a in reached), key=lambda a: rank[a])
        return VEResult(1, witness, rounds, eps, b0, outcome="chained")
    return VEResult(0, None, rounds, eps, b0, outcome="not connected")


@dataclass
class GeneratorScore:
    dataset: str
    generator: str
    instances_kept: int
    J_bar: float
    failure_rate: float
    mean_queries: float
    J_values: list = field(default_factory=list, repr=False)


@dataclass
class VEBenchmark:
    rows: list
    empty: bool
    kept: list
    risks: list = field(default_factory=list, repr=False)

    def row(self, generator):
        for r in self.rows:
            if r.generator == generator:
                return r
        raise KeyError(generator)


def ve_benchmark(test_X, f, train, generators, risk_threshold=0.25, n=2000, runs=1, rng=None,
                 dataset="", **kwargs) -> VEBenchmark:
    """J-bar per generator over instances whose R_x exceeds `risk_threshold`.

    `generators` maps names to callables (x, f, train, rng, train_pred=...).
    For each run every test instance is assessed once by LRA; kept instances
    get one counterfactual per generator, checked for justification.  A
    generator error on an instance counts towards its failure rate and is
    left out of J-bar.  `instances_kept` counts kept (instance, run) pairs.
    """
    if not generators:
        raise ValueError("at least one generator is required")
    if isinstance(generators, (list, tuple)):
        generators = {getattr(g, "__name__", str(i)): g for i, g in enumerate(generators)}
    test_X = as_matrix(test_X)
    Xtr, ytr = _train_arrays(train)
    train_pred = f.predict(Xtr)
    tr = (Xtr, ytr)
    seeds = _instance_seeds(rng, test_X.shape[0], runs)
    names = list(generators)
    J = {g: [] for g in names}
    failures = {g: 0 for g in names}
    queries = {g: [] for g in names}
    kept, risks = [], []
    for run in range(runs):
        for i, x in enumerate(test_X):
            inst_rng = np.random.default_rng(int(seeds[i, run]))
            try:
                rep = lra(x, f, tr, n, inst_rng, train_pred=train_pred, **kwargs)
            except NoAnchorError:
                continue
            R = scores(rep).R
            risks.append((i, run, R))
            if not R > risk_threshold:
                continue
            kept.append((i, run))
            for g in names:
                try:
                    cf = generators[g](x, f, tr, inst_rng, train_pred=train_pred)
                except NoCounterfactualError:
                    failures[g] += 1
                    continue
                res = justification_check(cf.point, f, tr, n, inst_rng, train_pred=train_pred,
                                          **kwargs)
                J[g].append(res.J)
                queries[g].append(cf.queries)
    n_kept = len(kept)
    rows = [GeneratorScore(dataset, g, n_kept,
                           float(np.mean(J[g])) if J[g] else float("nan"),
                           failures[g] / n_kept if n_kept else float("nan"),
                           float(np.mean(queries[g])) if queries[g] else float("nan"),
                           J[g])
            for g in names]
    return VEBenchmark(rows, n_kept == 0, kept, risks)

"""Post-hoc counterfactual generators: Growing Spheres, HCLS and LORE-lite.

Every generator only queries the black box and returns a point whose true
predicted class differs from f(x).  Generators are looked up by name in
GENERATORS; each entry has the uniform signature (x, f, train, rng, **params).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifiers.base import CountingBlackBox
from .classifiers.tree import train_tree
from .geometry import Ball, SphericalLayer, as_point, distances_to, sample_ball, sample_layer
from .lra import _train_arrays, anchors


class NoCounterfactualError(RuntimeError):
    pass


@dataclass
class Counterfactual:
    point: np.ndarray
    source: np.ndarray
    generator: str
    queries: int
    info: dict = field(default_factory=dict)

    @property
    def distance(self):
        return float(np.sqrt(np.sum((self.point - self.source) ** 2)))


def _checked(cf: Counterfactual, f, fx):
    if f.predict(cf.point[None, :])[0] == fx:
        raise AssertionError(f"{cf.generator} returned a point of the original class")
    return cf


def growing_spheres(x, f, eta=0.1, growth=2.0, per_layer=2000, rng=None, max_radius=100.0):
    """Closest enemy found by sampling layers [k*eta, (k+1)*eta] outward.

    If B(x, eta) already holds enemies, eta is divided by `growth` until it
    does not.  The closest enemy of the first layer holding any is returned.
    """
    x = as_point(x)
    rng = np.random.default_rng(rng)
    box = CountingBlackBox(f)
    fx = box.predict(x[None, :])[0]
    if eta <= 0 or growth <= 1:
        raise ValueError("eta must be > 0 and growth > 1")

    pts = sample_ball(Ball(x, eta), per_layer, rng)
    enemies = pts[box.predict(pts) != fx]
    # shrink until the ball is enemy-free; at eta ~ 0 x sits on the boundary
    while len(enemies) and eta > 1e-12:
        eta /= growth
        pts = sample_ball(Ball(x, eta), per_layer, rng)
        enemies = pts[box.predict(pts) != fx]
    r_in = eta
    while len(enemies) == 0:
        if r_in >= max_radius:
            raise NoCounterfactualError(f"no counterfactual found within radius {max_radius}")
        pts = sample_layer(SphericalLayer(x, r_in, r_in + eta), per_layer, rng)
        enemies = pts[box.predict(pts) != fx]
        r_in += eta
    best = enemies[np.argmin(distances_to(enemies, x))]
    return _checked(Counterfactual(best, x, "gs", box.queries, {"layer_width": eta}), f, fx)


def hcls(x, f, budget, iters=100, pop=200, step=None, rng=None):
    """Budget-constrained confidence maximisation by stochastic hill climbing.

    Searches B(x, budget) for the point maximising the best other-class
    confidence.  Once an enemy is held, confidence ties are broken towards
    x; before that, equal-score moves are taken so flat regions are crossed.
    """
    x = as_point(x)
    if not getattr(f, "has_confidence", False):
        raise ValueError("hcls needs a black box with predict_confidence")
    if budget <= 0:
        raise ValueError("budget must be > 0")
    if iters < 1:
        raise NoCounterfactualError("hcls needs at least one iteration")
    rng = np.random.default_rng(rng)
    box = CountingBlackBox(f)
    fx = box.predict(x[None, :])[0]
    other = box.classes_ != fx
    step = budget / 4 if step is None else step

    def score(Z):
        return box.predict_confidence(Z)[:, other].max(axis=1)

    def is_enemy(p):
        return box.predict(p[None, :])[0] != fx

    cands = sample_ball(Ball(x, budget), pop, rng)
    s = score(cands)
    dist = distances_to(cands, x)
    k = int(np.lexsort((dist, -s))[0])
    cur, cur_s, cur_d = cands[k], s[k], dist[k]
    found = is_enemy(cur)
    for _ in range(iters):
        props = cur + step * rng.standard_normal((pop, x.shape[0]))
        off = props - x
        norm = np.sqrt((off * off).sum(axis=1))
        outside = norm > budget
        props[outside] = x + off[outside] * (budget / norm[outside])[:, None]
        s = score(props)
        dist = distances_to(props, x)
        k = int(np.lexsort((dist, -s))[0])
        tie = abs(s[k] - cur_s) <= 1e-12
        if s[k] > cur_s + 1e-12 or (tie and found and dist[k] < cur_d):
            cur, cur_s, cur_d = props[k], s[k], dist[k]
            found = is_enemy(cur)
        elif tie and not found:
            # drift across a flat region until the score starts to move
            cur, cur_d = props[k], dist[k]
            found = is_enemy(cur)
        else:
            step *= 0.7
    if box.predict(cur[None, :])[0] == fx:
        raise NoCounterfactualError("hcls found no class change within the budget")
    return _checked(Counterfactual(cur, x, "hcls", box.queries,
                                   {"confidence": float(cur_s), "budget": float(budget)}), f, fx)


def lore_neighborhood(x, f, pop, rng, r_start=0.1, growth=1.5, max_radius=100.0, batch=None,
                      min_enemy_frac=0.1, max_batches=200):
    """Balanced labelled neighbourhood: pop - pop//2 points of f(x), pop//2 not.

    The ball radius grows until at least `min_enemy_frac` of a batch are
    enemies; both halves are then rejection-sampled from that same ball.
    Returns (Z, labels, queries).
    """
    box = CountingBlackBox(f)
    fx = box.predict(x[None, :])[0]
    need_enemy = pop // 2
    need_same = pop - need_enemy
    batch = batch or max(pop, 200)
    r = r_start
    while True:
        if r > max_radius:
            raise NoCounterfactualError("no enemy found while building the neighbourhood")
        Z = sample_ball(Ball(x, r), batch, rng)
        lab = box.predict(Z)
        if np.mean(lab != fx) >= min_enemy_frac:
            break
        r *= growth
    same, enemy, enemy_lab = [], [], []
    n_same = n_enemy = 0
    for _ in range(max_batches):
        is_enemy = lab != fx
        same.append(Z[~is_enemy][: need_same - n_same])
        keep = need_enemy - n_enemy
        enemy.append(Z[is_enemy][:keep])
        enemy_lab.append(lab[is_enemy][:keep])
        n_same += len(same[-1])
        n_enemy += len(enemy[-1])
        if n_same == need_same and n_enemy == need_enemy:
            break
        Z = sample_ball(Ball(x, r), batch, rng)
        lab = box.predict(Z)
    Z = np.vstack(same + enemy)
    labels = np.concatenate([np.full(n_same, fx)] + enemy_lab)
    return Z, labels, box.queries


def _leaf_edit(x, path, margin):
    """Minimal edit of x satisfying the (feature, goes_left, threshold) path."""
    lo = np.full(x.shape[0], -np.inf)
    hi = np.full(x.shape[0], np.inf)
    for feat, goes_left, thr in path:
        if goes_left:
            hi[feat] = min(hi[feat], thr)
        else:
            lo[feat] = max(lo[feat], thr)
    z = x.copy()
    for j in np.nonzero((x <= lo) | (x > hi))[0]:
        width = hi[j] - lo[j]
        if width <= 2 * margin[j]:
            z[j] = lo[j] + width / 2
        elif x[j] <= lo[j]:
            z[j] = lo[j] + margin[j]
        else:
            z[j] = hi[j] - margin[j]
    return z, int(np.count_nonzero(z != x))


def lore_lite(x, f, train=None, pop=1000, tree_depth=4, rng=None, margin_frac=0.01,
              max_failures=3):
    """Surrogate-tree counterfactual with the fewest changed features.

    Fits a depth-limited tree to a balanced neighbourhood of x, ranks the
    enemy leaves by number of features x must change (then by L2), and
    returns x edited just past the leaf thresholds (margin = margin_frac of
    each feature's training range).  After `max_failures` edits rejected by
    the true model, falls back to Growing Spheres.
    """
    x = as_point(x)
    if pop < 2:
        raise ValueError("pop must be >= 2")
    rng = np.random.default_rng(rng)
    box = CountingBlackBox(f)
    fx = box.predict(x[None, :])[0]
    Z, labels, q = lore_neighborhood(x, f, pop, rng)
    box.queries += q
    surrogate = train_tree(Z, labels, max_depth=tree_depth)
    fidelity = float(np.mean(surrogate.predict(Z) == labels))

    if train is not None:
        Xtr, _ = _train_arrays(train)
        span = Xtr.max(axis=0) - Xtr.min(axis=0)
    else:
        span = Z.max(axis=0) - Z.min(axis=0)
    margin = margin_frac * np.where(span > 0, span, 1.0)

    options = []
    for leaf, path in surrogate.paths():
        if surrogate.classes_[surrogate.leaf_class[leaf]] == fx:
            continue
        z, changes = _leaf_edit(x, path, margin)
        options.append((changes, float(np.sqrt(np.sum((z - x) ** 2))), leaf, z))
    if not options:
        raise NoCounterfactualError("surrogate has no leaf of another class")
    options.sort(key=lambda o: (o[0], o[1], o[2]))

    failures = 0
    for changes, _, leaf, z in options:
        if box.predict(z[None, :])[0] != fx:
            return _checked(Counterfactual(z, x, "lore", box.queries,
                                           {"fidelity": fidelity, "changed_features": changes,
                                            "fallback": False}), f, fx)
        failures += 1
        if failures >= max_failures:
            break
    cf = growing_spheres(x, f, rng=rng)
    return Counterfactual(cf.point, x, "lore", box.queries + cf.queries,
                          {"fidelity": fidelity, "fallback": True})


def nearest_training_enemy(x, f, train, rng=None, train_pred=None):
    """The closest correctly predicted training instance of another class."""
    x = as_point(x)
    anch = anchors(x, f, train, train_pred)
    return Counterfactual(anch.points[0].copy(), x, "nearest_enemy", 0,
                          {"train_index": int(anch.indices[0])})


def fixed_point(point):
    """Generator that always answers `point`; used for known-geometry checks."""
    point = as_point(point)

    def gen(x, f, train=None, rng=None, **_):
        x = as_point(x)
        fx = f.predict(x[None, :])[0]
        if f.predict(point[None, :])[0] == fx:
            raise NoCounterfactualError("fixed point has the instance's own class")
        return Counterfactual(point.copy(), x, "fixed", 0)

    return gen


def _gs(x, f, train, rng, train_pred=None, **params):
    return growing_spheres(x, f, rng=rng, **params)


def _hcls(x, f, train, rng, train_pred=None, budget=None, **params):
    if budget is None:
        budget = float(anchors(x, f, train, train_pred).distances[0])
    return hcls(x, f, budget, rng=rng, **params)


def _lore(x, f, train, rng, train_pred=None, **params):
    return lore_lite(x, f, train, rng=rng, **params)


def _nearest(x, f, train, rng, train_pred=None, **params):
    return nearest_training_enemy(x, f, train, train_pred=train_pred)


GENERATORS = {"gs": _gs, "hcls": _hcls, "lore": _lore, "nearest_enemy": _nearest}


def get_generator(name, **params):
    if name not in GENERATORS:
        raise KeyError(f"unknown generator {name!r} (known: {sorted(GENERATORS)})")
    base = GENERATORS[name]

    def gen(x, f, train, rng, train_pred=None):
        return base(x, f, train, rng, train_pred=train_pred, **params)

    gen.__name__ = name
    return gen

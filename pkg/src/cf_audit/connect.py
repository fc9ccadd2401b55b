"""epsilon-chain machinery: automatic epsilon, epsilon-graph clustering and
incremental merging of newly explored points.

Two points are linked when their distance is strictly below epsilon.  With
DBSCAN's minPts=2 every point with a neighbour is a core point, so DBSCAN
clusters are exactly the connected components of this graph and noise points
are its singletons.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

JUSTIFIED = "justified"
GROWING = "growing"
STALLED = "stalled"

BRUTE_FORCE_BELOW = 1000
GRID_MAX_DIM = 3


def check_epsilon(eps) -> float:
    eps = float(eps)
    if not np.isfinite(eps) or eps <= 0:
        raise ValueError(f"epsilon must be finite and > 0, got {eps}")
    return eps


def auto_epsilon(points) -> float:
    """Largest nearest-neighbour distance within `points`."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] < 2:
        raise ValueError("auto_epsilon needs at least 2 points")
    nn, _ = cKDTree(points).query(points, k=2)
    eps = float(nn[:, 1].max())
    if eps <= 0:
        raise ValueError("all sampled points coincide; epsilon is undefined")
    return eps


def _pair_distances(points, i, j):
    diff = points[i] - points[j]
    return np.sqrt(np.sum(diff * diff, axis=1))


def _brute_pairs(points, eps):
    n = points.shape[0]
    i, j = np.triu_indices(n, k=1)
    keep = _pair_distances(points, i, j) < eps
    return i[keep], j[keep]


def _grid_pairs(points, eps):
    n, d = points.shape
    # slightly larger cells so quotient rounding can never push a linked pair two cells apart
    cells = np.floor(points / (eps * (1 + 1e-9))).astype(np.int64)
    cells -= cells.min(axis=0) - 1
    extent = cells.max(axis=0) + 2
    strides = np.cumprod(np.concatenate([[1], extent[:-1]]))
    keys = cells @ strides
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    uniq, starts, counts = np.unique(sorted_keys, return_index=True, return_counts=True)

    out_i, out_j = [], []
    for offset in product((-1, 0, 1), repeat=d):
        off_key = int(np.dot(offset, strides))
        if off_key < 0:
            continue  # each unordered cell pair is visited from one side only
        q = keys + off_key
        pos = np.searchsorted(uniq, q)
        pos = np.minimum(pos, len(uniq) - 1)
        hit = uniq[pos] == q
        src = np.nonzero(hit)[0]
        if src.size == 0:
            continue
        cnt = counts[pos[src]]
        rep_src = np.repeat(src, cnt)
        base = np.repeat(starts[pos[src]], cnt)
        within = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        dst = order[base + within]
        if off_key == 0:
            keep = rep_src < dst
            rep_src, dst = rep_src[keep], dst[keep]
        close = _pair_distances(points, rep_src, dst) < eps
        out_i.append(rep_src[close])
        out_j.append(dst[close])
    if not out_i:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    i = np.concatenate(out_i)
    j = np.concatenate(out_j)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    return lo, hi


def _kdtree_pairs(points, eps):
    pairs = cKDTree(points).query_pairs(eps * (1 + 1e-9), output_type="ndarray")
    if pairs.size == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    i, j = pairs[:, 0], pairs[:, 1]
    keep = _pair_distances(points, i, j) < eps
    return i[keep], j[keep]


def epsilon_pairs(points, eps, method: str | None = None):
    """All index pairs (i < j) with distance(points[i], points[j]) < eps.

    `method` forces "brute", "grid" or "kdtree"; by default brute force is used
    below 1000 points, a uniform grid with cell size eps in d <= 3, and a
    KD-tree otherwise (a grid visits 3^d cells per point).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    eps = check_epsilon(eps)
    n, d = points.shape
    if n < 2:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    if method is None:
        if n < BRUTE_FORCE_BELOW:
            method = "brute"
        elif d <= GRID_MAX_DIM:
            method = "grid"
        else:
            method = "kdtree"
    if method == "brute":
        return _brute_pairs(points, eps)
    if method == "grid":
        return _grid_pairs(points, eps)
    if method == "kdtree":
        return _kdtree_pairs(points, eps)
    raise ValueError(f"unknown neighbour search method {method!r}")


def cross_pairs(A, B, eps):
    """Index pairs (i into A, j into B) with distance < eps."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    eps = check_epsilon(eps)
    if A.shape[0] == 0 or B.shape[0] == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    if A.shape[0] * B.shape[0] <= 250_000:
        D = np.sqrt(((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1))
        i, j = np.nonzero(D < eps)
        return i.astype(np.int64), j.astype(np.int64)
    hits = cKDTree(A).query_ball_point(B, eps * (1 + 1e-9), return_sorted=False)
    lens = np.fromiter((len(h) for h in hits), np.int64, len(hits))
    if lens.sum() == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    i = np.concatenate([np.asarray(h, np.int64) for h in hits if h])
    j = np.repeat(np.arange(len(hits), dtype=np.int64), lens)
    diff = A[i] - B[j]
    keep = np.sqrt(np.sum(diff * diff, axis=1)) < eps
    return i[keep], j[keep]


def _components(n, i, j):
    graph = coo_matrix((np.ones(len(i), dtype=np.int8), (i, j)), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    return comp


def _canonical(comp, offset=0):
    """Map component ids to the smallest member index (+offset)."""
    n = comp.shape[0]
    first = np.full(comp.max() + 1 if n else 0, n, dtype=np.int64)
    np.minimum.at(first, comp, np.arange(n))
    return first[comp] + offset


@dataclass
class ClusterState:
    """Partition of explored points into epsilon-connected clusters.

    A cluster id is the index of its oldest member.  `anchor_ids` holds the
    training-set id of anchor points and -1 for sampled points.
    """

    points: np.ndarray
    labels: np.ndarray
    anchor_ids: np.ndarray
    eps: float
    status: dict = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def cluster_ids(self) -> np.ndarray:
        return np.unique(self.labels)

    def members(self, cid) -> np.ndarray:
        return np.nonzero(self.labels == cid)[0]

    def anchors(self) -> dict:
        """cluster id -> set of anchor ids attached to that cluster."""
        out = {int(c): set() for c in self.cluster_ids()}
        for idx in np.nonzero(self.anchor_ids >= 0)[0]:
            out[int(self.labels[idx])].add(int(self.anchor_ids[idx]))
        return out

    def justified_ids(self) -> np.ndarray:
        return np.unique(self.labels[self.anchor_ids >= 0])

    def is_justified(self, cid) -> bool:
        return self.status.get(int(cid)) == JUSTIFIED

    def partition(self) -> frozenset:
        groups = {}
        for i, c in enumerate(self.labels.tolist()):
            groups.setdefault(c, []).append(i)
        return frozenset(frozenset(g) for g in groups.values())


def _initial_status(labels, anchor_ids):
    status = {int(c): GROWING for c in np.unique(labels)}
    for c in np.unique(labels[anchor_ids >= 0]):
        status[int(c)] = JUSTIFIED
    return status


def cluster(points, eps, anchor_ids=None, method=None) -> ClusterState:
    """Connected components of the epsilon-graph on `points`.

    Clusters holding an anchor start `justified`, all others `growing`.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0:
        raise ValueError("cluster() needs at least one point")
    eps = check_epsilon(eps)
    n = points.shape[0]
    if anchor_ids is None:
        anchor_ids = np.full(n, -1, dtype=np.int64)
    anchor_ids = np.asarray(anchor_ids, dtype=np.int64)
    i, j = epsilon_pairs(points, eps, method)
    labels = _canonical(_components(n, i, j))
    return ClusterState(points.copy(), labels, anchor_ids.copy(), eps,
                        _initial_status(labels, anchor_ids))


def merge_new(state: ClusterState, new_points, new_anchors=None, eps=None, *,
              anchor_ids=None, candidates=None, method=None):
    """Attach new points and anchors to `state`, merging clusters they bridge.

    `candidates` optionally restricts which existing points are searched for
    links (caller guarantees no other existing point can be within eps of a
    new one).  Returns the new state and a dict cluster id -> grew flag; a
    cluster grew when it received at least one new member.  Merged clusters
    are justified if any part was or if they absorbed an anchor, otherwise
    growing.  Untouched clusters keep their status.
    """
    eps = state.eps if eps is None else check_epsilon(eps)
    d = state.points.shape[1]
    new_points = np.asarray(new_points, dtype=float).reshape(-1, d)
    if new_anchors is None:
        new_anchors = np.empty((0, d))
    new_anchors = np.asarray(new_anchors, dtype=float).reshape(-1, d)
    if anchor_ids is None:
        anchor_ids = np.arange(len(new_anchors), dtype=np.int64)
    anchor_ids = np.asarray(anchor_ids, dtype=np.int64)
    if anchor_ids.shape[0] != new_anchors.shape[0]:
        raise ValueError("anchor_ids must match new_anchors")

    added = np.vstack([new_points, new_anchors])
    added_ids = np.concatenate([np.full(len(new_points), -1, np.int64), anchor_ids])
    n_old, m = state.n_points, added.shape[0]
    if m == 0:
        return ClusterState(state.points, state.labels, state.anchor_ids, eps,
                            dict(state.status)), {c: False for c in state.status}

    if candidates is None:
        cand = np.arange(n_old)
    else:
        cand = np.asarray(candidates)
        if cand.dtype == bool:
            cand = np.nonzero(cand)[0]
    n_cand = cand.shape[0]
    # only pairs involving a new point matter; old-old links are already in the labels
    ci, cj = cross_pairs(state.points[cand], added, eps)
    ni, nj = epsilon_pairs(added, eps, method)
    i = np.concatenate([ci, ni + n_cand])
    j = np.concatenate([cj, nj]) + n_cand

    # graph nodes: touched old clusters first, then the new points
    old_side = i < n_cand
    touched = np.unique(state.labels[cand[i[old_side]]])
    k = touched.shape[0]
    node_i = np.where(old_side,
                      np.searchsorted(touched, state.labels[cand[np.minimum(i, n_cand - 1)]]) if n_cand else 0,
                      k + i - n_cand)
    node_j = k + j - n_cand
    comp = _components(k + m, node_i, node_j)

    # new label of a component: smallest old cluster id in it, else first new index
    n_comp = comp.max() + 1
    sentinel = np.iinfo(np.int64).max
    comp_label = np.full(n_comp, sentinel, dtype=np.int64)
    if k:
        np.minimum.at(comp_label, comp[:k], touched)
    no_old = comp_label == sentinel
    new_first = np.full(n_comp, sentinel, dtype=np.int64)
    np.minimum.at(new_first, comp[k:], n_old + np.arange(m))
    comp_label[no_old] = new_first[no_old]

    labels = np.concatenate([state.labels, comp_label[comp[k:]]])
    if k:
        remap = comp_label[comp[:k]]
        changed = remap != touched
        if np.any(changed):
            pos = np.searchsorted(touched, state.labels)
            pos = np.minimum(pos, k - 1)
            hit = touched[pos] == state.labels
            old_labels = state.labels.copy()
            old_labels[hit] = remap[pos[hit]]
            labels[:n_old] = old_labels

    status = dict(state.status)
    justified = {int(c) for c in touched if status.get(int(c)) == JUSTIFIED}
    for c in touched:
        status.pop(int(c), None)
    comp_has_anchor = np.zeros(n_comp, dtype=bool)
    comp_has_anchor[comp[k:][added_ids >= 0]] = True
    if k:
        for c, cc in zip(touched.tolist(), comp[:k].tolist()):
            if c in justified:
                comp_has_anchor[cc] = True
    grew = {c: False for c in status}
    for cc in np.unique(comp):
        cid = int(comp_label[cc])
        status[cid] = JUSTIFIED if comp_has_anchor[cc] else GROWING
        grew[cid] = True

    points = np.vstack([state.points, added])
    all_ids = np.concatenate([state.anchor_ids, added_ids])
    return ClusterState(points, labels, all_ids, eps, status), grew

"""k-means community detection and best-match F1 / Jaccard scoring."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .communities import Community, CommunitySet

MAX_ITER = 300
SHIFT_TOL = 1e-6


@dataclass(eq=False)
class Clustering:
    assignment: np.ndarray  # node -> cluster id in [0, k)
    k: int
    inertia: float
    centroids: np.ndarray
    history: list = field(default_factory=list)  # inertia after each Lloyd iteration
    iterations: int = 0

    def clusters(self) -> list:
        return [np.flatnonzero(self.assignment == c) for c in range(self.k)]

    def communities(self, nodes=None, prefix: str = "d", min_size: int = 1) -> CommunitySet:
        """Clusters as a detected :class:`CommunitySet`.

        ``nodes`` maps row positions to node indices when clustering ran on
        a subset.
        """
        out = []
        for c, rows in enumerate(self.clusters()):
            members = rows if nodes is None else np.asarray(nodes)[rows]
            if len(members) >= min_size:
                out.append(Community(f"{prefix}{c}", frozenset(int(m) for m in members)))
        return CommunitySet(out, "detected")


def _points(s) -> np.ndarray:
    pts = s.points if hasattr(s, "points") else np.asarray(s, dtype=np.float64)
    return np.ascontiguousarray(pts, dtype=np.float64)


def _sq_dists(X, C):
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _plusplus(X, k, rng):
    n = len(X)
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(X, X[chosen])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(rest))
        chosen.append(nxt)
        d2 = np.minimum(d2, _sq_dists(X, X[[nxt]])[:, 0])
    return X[chosen].copy()


def _lloyd(X, centroids, max_iter, tol):
    k = len(centroids)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        d = _sq_dists(X, centroids)
        labels = d.argmin(axis=1)  # ties -> lowest cluster id
        counts = np.bincount(labels, minlength=k)
        for c in np.flatnonzero(counts == 0):
            dist_own = d[np.arange(len(X)), labels]
            far = int(dist_own.argmax())
            if dist_own[far] == 0:
                break
            labels[far] = c
            d[far] = np.inf
            d[far, c] = 0.0
            counts = np.bincount(labels, minlength=k)
        new = centroids.copy()
        for c in range(k):
            if counts[c]:
                new[c] = X[labels == c].mean(axis=0)
        inertia = float(((X - new[labels]) ** 2).sum())
        history.append(inertia)
        shift = float(np.sqrt(((new - centroids) ** 2).sum(axis=1)).max())
        centroids = new
        if shift < tol:
            break
    d = _sq_dists(X, centroids)
    labels = d.argmin(axis=1)
    return labels, centroids, history, it


def kmeans(s, k_clusters: int, seed=0, n_init: int = 1, max_iter: int = MAX_ITER, tol: float = SHIFT_TOL) -> Clustering:
    """k-means++ seeding followed by Lloyd iterations.

    Stops when no centroid moves more than ``tol`` or after ``max_iter``
    iterations.  A cluster that empties is re-seeded with the point
    farthest from its centroid.  With ``n_init > 1`` the lowest-inertia
    run is kept.  Returned cluster ids are contiguous and non-empty.
    """
    X = _points(s)
    n = len(X)
    if k_clusters < 1:
        raise ValueError("k_clusters must be >= 1")
    if k_clusters > n:
        raise ValueError(f"k_clusters={k_clusters} exceeds the number of points {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        C = _plusplus(X, k_clusters, rng)
        labels, C, history, it = _lloyd(X, C, max_iter, tol)
        inertia = float(((X - C[labels]) ** 2).sum())
        if best is None or inertia < best[2]:
            best = (labels, C, inertia, history, it)
    labels, C, inertia, history, it = best
    used = np.unique(labels)
    remap = np.full(k_clusters, -1)
    remap[used] = np.arange(len(used))
    return Clustering(remap[labels], len(used), inertia, C[used], history, it)


# -- scoring ------------------------------------------------------------------


def _set(c):
    return c.members if isinstance(c, Community) else frozenset(c)


def pair_f1(detected, truth) -> float:
    """Harmonic mean of precision ``|c & c*| / |c|`` and recall ``|c & c*| / |c*|``."""
    a, b = _set(detected), _set(truth)
    inter = len(a & b)
    if inter == 0:
        return 0.0
    return 2.0 * inter / (len(a) + len(b))


def pair_jaccard(detected, truth) -> float:
    a, b = _set(detected), _set(truth)
    union = len(a | b)
    return len(a & b) / union if union else 0.0


METRICS = {"f1": pair_f1, "jaccard": pair_jaccard}


def score_matrix(detected, truth, metric: str = "f1") -> np.ndarray:
    fn = METRICS[metric]
    D = [_set(c) for c in detected]
    T = [_set(c) for c in truth]
    return np.array([[fn(d, t) for t in T] for d in D], dtype=np.float64).reshape(len(D), len(T))


def aggregate_score(detected, truth, metric: str = "f1") -> float:
    """Symmetric best-match average.

    Half the mean over detected communities of their best match in
    ``truth`` plus half the mean over truth communities of their best match
    among the detected ones.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {sorted(METRICS)}")
    if len(detected) == 0 or len(truth) == 0:
        raise ValueError("aggregate_score needs non-empty detected and truth sets")
    M = score_matrix(detected, truth, metric)
    return float(0.5 * M.max(axis=1).mean() + 0.5 * M.max(axis=0).mean())


def best_matches(detected, truth, metric: str = "f1") -> list:
    """``(side, id, best_id, score)`` rows for both matching directions."""
    M = score_matrix(detected, truth, metric)
    D, T = list(detected), list(truth)
    rows = []
    for i, c in enumerate(D):
        j = int(M[i].argmax())
        rows.append(("detected", c.id, T[j].id, float(M[i, j])))
    for j, c in enumerate(T):
        i = int(M[:, j].argmax())
        rows.append(("truth", c.id, D[i].id, float(M[i, j])))
    return rows


# -- model selection ------------------------------------------------------------


def default_candidates(m: int) -> list:
    """``{ceil(M/2), M, 2M}`` for ``M`` training communities."""
    return sorted({max(1, math.ceil(m / 2)), m, 2 * m})


def fold_assignment(n_items: int, folds: int, seed) -> list:
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_items)
    return [sorted(order[f::folds].tolist()) for f in range(folds)]


def validation_score(clustering: Clustering, validation: Sequence[Community], metric="f1") -> float:
    """Aggregate score of the clusters touching the validation communities."""
    held = set()
    for c in validation:
        held |= c.members
    touching = [set(map(int, rows)) for rows in clustering.clusters() if held.intersection(map(int, rows))]
    return aggregate_score(touching, validation, metric)


def select_k(
    s,
    train_communities: CommunitySet,
    candidates: Sequence[int],
    folds: int = 5,
    seed=0,
    n_init: int = 1,
) -> int:
    """Choose the cluster count by cross-validation over example communities.

    The training communities are split into ``folds`` groups.  For each
    candidate count the embedding is clustered and each group is scored by
    :func:`validation_score`.  The candidate with the best mean wins, ties
    going to the smaller count.

    ``s`` is a single embedding, or one embedding per fold (for instance
    from models refit without that fold's communities).
    """
    comms = list(train_communities)
    cands = sorted(set(int(c) for c in candidates))
    if not cands:
        raise ValueError("no candidate cluster counts")
    if len(cands) == 1:
        return cands[0]
    if len(comms) < 2:
        raise ValueError("select_k needs at least two training communities")
    if len(comms) < folds:
        warnings.warn(f"only {len(comms)} training communities; using {len(comms)} folds", stacklevel=2)
        folds = len(comms)
    per_fold = list(s) if isinstance(s, (list, tuple)) else [s] * folds
    if len(per_fold) != folds:
        raise ValueError(f"{len(per_fold)} embeddings for {folds} folds")
    n = len(_points(per_fold[0]))
    cands = [c for c in cands if c <= n] or [min(cands)]
    groups = fold_assignment(len(comms), folds, seed)

    cache = {}
    best_k, best_score = None, -np.inf
    for kc in cands:
        scores = []
        for f, group in enumerate(groups):
            key = (id(per_fold[f]), kc)
            if key not in cache:
                cache[key] = kmeans(per_fold[f], kc, seed=seed, n_init=n_init)
            scores.append(validation_score(cache[key], [comms[i] for i in group]))
        mean = float(np.mean(scores))
        if mean > best_score:
            best_k, best_score = kc, mean
    return best_k

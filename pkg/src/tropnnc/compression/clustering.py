"""Seeded k-means, average-linkage agglomerative clustering and threshold rules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Clustering:
    """Cluster id per input vector; ``-1`` marks vectors left out of every cluster."""

    labels: np.ndarray
    centers: np.ndarray | None = None
    sign_class: np.ndarray | None = None  # +1 / -1 per cluster, single-output only
    inertia_trace: list = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)

    @property
    def K(self) -> int:
        return int(self.labels.max()) + 1 if np.any(self.labels >= 0) else 0

    @property
    def n(self) -> int:
        return self.labels.size

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)

    def clusters(self) -> list[np.ndarray]:
        return [self.members(k) for k in range(self.K)]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels[self.labels >= 0], minlength=self.K)


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = (x * x).sum(1)[:, None] - 2.0 * x @ c.T + (c * c).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _plusplus(x: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    closest = _sq_dists(x, x[chosen])[:, 0]
    for _ in range(1, K):
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a centre already; pick an unused index
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(free))
        chosen.append(nxt)
        closest = np.minimum(closest, _sq_dists(x, x[nxt : nxt + 1])[:, 0])
    return x[chosen].copy()


def _repair_empty(x, labels, centers, K) -> None:
    for k in range(K):
        if np.any(labels == k):
            continue
        sizes = np.bincount(labels, minlength=K)
        big = int(np.argmax(sizes))
        members = np.flatnonzero(labels == big)
        far = members[int(np.argmax(((x[members] - centers[big]) ** 2).sum(1)))]
        labels[far] = k
        centers[k] = x[far]


def kmeans(vectors, K: int, seed: int = 0, max_iter: int = 300) -> Clustering:
    """Lloyd iterations from k-means++ seeds; deterministic for a given seed."""
    x = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    n = x.shape[0]
    if n < 1:
        raise ValueError("no vectors to cluster")
    if not 1 <= K <= n:
        raise ValueError(f"K={K} must lie in [1, {n}]")
    rng = np.random.default_rng(seed)
    centers = _plusplus(x, K, rng)
    labels = np.full(n, -1)
    trace = []
    for _ in range(max_iter):
        new = np.argmin(_sq_dists(x, centers), axis=1)
        _repair_empty(x, new, centers, K)
        if np.array_equal(new, labels):
            break
        labels = new
        for k in range(K):
            centers[k] = x[labels == k].mean(axis=0)
        trace.append(float(((x - centers[labels]) ** 2).sum()))
    return Clustering(labels, centers, inertia_trace=trace)


def hierarchical_cluster(vectors, distance_threshold: float) -> Clustering:
    """Average-linkage agglomeration; merging stops once the closest pair is farther than the threshold."""
    if not distance_threshold > 0:
        raise ValueError("distance threshold must be positive")
    x = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    n = x.shape[0]
    dist = np.sqrt(_sq_dists(x, x))
    np.fill_diagonal(dist, np.inf)
    dist[np.tril_indices(n, -1)] = np.inf  # only i < j is live
    sizes = np.ones(n)
    owner = np.arange(n)
    alive = np.ones(n, dtype=bool)
    while alive.sum() > 1:
        flat = int(np.argmin(dist))  # row-major: lowest (i, j) on ties
        i, j = divmod(flat, n)
        if dist[i, j] > distance_threshold:
            break
        # Lance-Williams update for average linkage, merged cluster kept at i
        full = np.minimum(dist, dist.T)
        merged = (sizes[i] * full[i] + sizes[j] * full[j]) / (sizes[i] + sizes[j])
        merged[~alive] = np.inf
        merged[i] = merged[j] = np.inf
        lo = np.arange(n) < i
        dist[lo, i] = merged[lo]
        dist[i, ~lo] = merged[~lo]
        dist[i, i] = np.inf
        dist[j, :] = np.inf
        dist[:, j] = np.inf
        sizes[i] += sizes[j]
        alive[j] = False
        owner[owner == j] = i
    _, labels = np.unique(owner, return_inverse=True)
    # relabel by first appearance so cluster ids follow input order
    order = {}
    labels = np.array([order.setdefault(l, len(order)) for l in labels])
    centers = np.array([x[labels == k].mean(axis=0) for k in range(len(order))])
    return Clustering(labels, centers)


def layer_threshold(c: float, variant: int, vectors) -> float:
    """Per-layer distance threshold: ``c sqrt(dim)`` (variant 1) or ``c mean ||v||`` (variant 2)."""
    if not c > 0:
        raise ValueError("threshold constant must be positive")
    v = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if v.size == 0:
        raise ValueError("no clustering vectors")
    if variant == 1:
        return float(c * math.sqrt(v.shape[1]))
    if variant == 2:
        return float(c * np.linalg.norm(v, axis=1).mean())
    raise ValueError(f"unknown threshold variant {variant}")

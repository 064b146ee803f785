"""Layer-level compression of ``v = C relu(A [x; 1])`` by clustering hidden neurons.

``A`` holds one row ``(a_i, b_i)`` per hidden neuron and ``C`` one column of
output weights per neuron.  Every routine returns the compressed pair plus
the clustering it used, with row/column ``k`` of the result belonging to
cluster ``k``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from tropnnc.compression.clustering import Clustering, kmeans

DEGENERATE_TOL = 1e-12
DEFAULT_ITERS = 10


class Compressed(NamedTuple):
    A: np.ndarray
    C: np.ndarray
    clustering: Clustering
    trace: list  # criterion after every half-step (iterative methods only)


def _as_layer(A, C) -> tuple[np.ndarray, np.ndarray]:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    C = np.asarray(C, dtype=np.float64)
    if C.ndim == 1:
        C = C[None, :]
    if C.shape[1] != A.shape[0]:
        raise ValueError(f"C has {C.shape[1]} columns but A has {A.shape[0]} rows")
    return A, C


def _check_k(K: int, n: int) -> None:
    if not 1 <= K <= n:
        raise ValueError(f"K={K} must lie in [1, {n}]")


def split_k(K: int, n_pos: int, n_neg: int) -> tuple[int, int]:
    """Share ``K`` between sign classes in proportion to their sizes (each nonempty class gets >= 1)."""
    classes = (n_pos > 0) + (n_neg > 0)
    if K < classes:
        raise ValueError(f"K={K} cannot cover {classes} sign classes")
    if n_neg == 0:
        return min(K, n_pos), 0
    if n_pos == 0:
        return 0, min(K, n_neg)
    k_pos = int(round(K * n_pos / (n_pos + n_neg)))
    k_pos = min(n_pos, max(1, min(K - 1, k_pos)))
    k_neg = min(n_neg, K - k_pos)
    k_pos = min(n_pos, K - k_neg)
    return k_pos, k_neg


def single_output_clusters(A, c_row, K, seed, split):
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    c = np.asarray(c_row, dtype=np.float64).reshape(-1)
    if c.size != A.shape[0]:
        raise ValueError("c_row length differs from the number of neurons")
    gens = np.abs(c)[:, None] * A
    pos, neg = np.flatnonzero(c > 0), np.flatnonzero(c < 0)
    k_pos, k_neg = split if split is not None else split_k(K, pos.size, neg.size)
    if (k_pos > 0) != (pos.size > 0) or (k_neg > 0) != (neg.size > 0):
        raise ValueError("each nonempty sign class needs at least one cluster")
    labels = np.full(c.size, -1)
    signs = []
    offset = 0
    for idx, k, s in ((pos, k_pos, 1), (neg, k_neg, -1)):
        if idx.size == 0:
            continue
        _check_k(k, idx.size)
        sub = kmeans(gens[idx], k, seed)
        labels[idx] = sub.labels + offset
        signs += [s] * k
        offset += k
    clustering = Clustering(labels, sign_class=np.array(signs, dtype=int))
    return gens, clustering


def _single_output(A, c_row, K, seed, split, reduce) -> Compressed:
    gens, clustering = single_output_clusters(A, c_row, K, seed, split)
    reps = [reduce(gens[idx]) for idx in clustering.clusters()]
    A_new = np.array(reps).reshape(len(reps), gens.shape[1])
    clustering.centers = np.array([gens[idx].mean(axis=0) for idx in clustering.clusters()])
    return Compressed(A_new, clustering.sign_class[None, :].astype(np.float64), clustering, [])


def compress_single_output(A, c_row, K: int, seed: int = 0, split=None) -> Compressed:
    """Sign-split clustering of ``|c_i| (a_i, b_i)``; each new neuron is its cluster's generator sum.

    Output weights are +1 for positive clusters and -1 for negative ones.
    Neurons with ``c_i = 0`` are left out (label -1).
    """
    return _single_output(A, c_row, K, seed, split, lambda g: g.sum(axis=0))


def baseline_zonotope_kmeans(A, c_row, K: int, seed: int = 0, split=None) -> Compressed:
    """Same clusters as ``compress_single_output`` but each neuron is the cluster mean."""
    return _single_output(A, c_row, K, seed, split, lambda g: g.mean(axis=0))


def multi_output_clusters(A, C, K: int, seed: int = 0) -> Clustering:
    A, C = _as_layer(A, C)
    _check_k(K, A.shape[0])
    return kmeans(np.hstack([A, C.T]), K, seed)


def _representatives(A, C, clustering, out_reduce) -> tuple[np.ndarray, np.ndarray]:
    groups = clustering.clusters()
    A_new = np.array([A[idx].mean(axis=0) for idx in groups])
    C_new = np.stack([out_reduce(C[:, idx]) for idx in groups], axis=1)
    return A_new, C_new


def compress_multi_output(A, C, K: int, seed: int = 0, clustering: Clustering | None = None) -> Compressed:
    """k-means on ``(a_i, b_i, C[:, i])``; input rows averaged, output columns summed."""
    A, C = _as_layer(A, C)
    if clustering is None:
        clustering = multi_output_clusters(A, C, K, seed)
    A_new, C_new = _representatives(A, C, clustering, lambda c: c.sum(axis=1))
    return Compressed(A_new, C_new, clustering, [])


def baseline_neural_path_kmeans(A, C, K: int, seed: int = 0, clustering: Clustering | None = None) -> Compressed:
    """Same clusters as ``compress_multi_output``; both parts replaced by the cluster mean."""
    A, C = _as_layer(A, C)
    if clustering is None:
        clustering = multi_output_clusters(A, C, K, seed)
    A_new, C_new = _representatives(A, C, clustering, lambda c: c.mean(axis=1))
    return Compressed(A_new, C_new, clustering, [])


def _targets(A, C, clustering, signs=None) -> list[np.ndarray]:
    # S[k][j] = sum over members i (optionally non-null only) of C[j, i] (a_i, b_i)
    out = []
    for k, idx in enumerate(clustering.clusters()):
        weights = C[:, idx]
        if signs is not None:
            weights = np.where(signs[:, k, None] * weights > 0, weights, 0.0)
        out.append(weights @ A[idx])
    return out


def criterion_value(A, C, clustering, A_new, C_new, a6: bool = False) -> tuple[np.ndarray, float]:
    """Per-cluster ``l_k^2 = sum_j ||C~_jk (a~_k, b~_k) - S_jk||^2`` and its total.

    With ``a6`` the sums ``S_jk`` run over the non-null members only, i.e. those
    whose output weight has the sign of ``C~_jk``.
    """
    A, C = _as_layer(A, C)
    A_new, C_new = _as_layer(A_new, C_new)
    signs = np.sign(C_new) if a6 else None
    S = _targets(A, C, clustering, signs)
    per = np.array([((np.outer(C_new[:, k], A_new[k]) - S[k]) ** 2).sum() for k in range(len(S))])
    return per, float(per.sum())


def compress_multi_output_iterative(
    A,
    C,
    K: int,
    num_iter: int = DEFAULT_ITERS,
    a6_variant: bool = False,
    seed: int = 0,
    clustering: Clustering | None = None,
) -> Compressed:
    """Alternating least squares on each cluster's representative, started from ``compress_multi_output``.

    With ``a6_variant`` the signs of the output weights are frozen at their
    initial values, only non-null members enter the fitted sums, and output
    magnitudes are clamped at zero.  That variant finishes with one more output
    update so the returned weights are the optimal magnitudes for the final rows.
    """
    if num_iter < 0:
        raise ValueError("num_iter must be >= 0")
    A, C = _as_layer(A, C)
    init = compress_multi_output(A, C, K, seed, clustering)
    clustering = init.clustering
    A_new, C_new = init.A.copy(), init.C.copy()
    if num_iter == 0:
        return init
    signs = np.sign(C_new) if a6_variant else None
    S = _targets(A, C, clustering, signs)

    def total() -> float:
        return float(sum(((np.outer(C_new[:, k], A_new[k]) - S[k]) ** 2).sum() for k in range(len(S))))

    def output_step() -> None:
        for k, s in enumerate(S):
            row = A_new[k]
            nrm = float(row @ row)
            if nrm < DEGENERATE_TOL:
                # restart from the largest target row
                row = s[int(np.argmax(np.linalg.norm(s, axis=1)))].copy()
                if a6_variant:
                    j = int(np.argmax(np.linalg.norm(s, axis=1)))
                    row *= signs[j, k]
                if float(row @ row) < DEGENERATE_TOL:
                    # nothing to fit: the targets vanish, so zero weights are optimal
                    C_new[:, k] = 0.0
                    continue
                A_new[k] = row
                nrm = float(row @ row)
            proj = s @ row / nrm
            if a6_variant:
                C_new[:, k] = signs[:, k] * np.maximum(signs[:, k] * proj, 0.0)
            else:
                C_new[:, k] = proj

    def input_step() -> None:
        for k, s in enumerate(S):
            weight = float(C_new[:, k] @ C_new[:, k])
            if weight < DEGENERATE_TOL:
                continue
            A_new[k] = C_new[:, k] @ s / weight

    trace = [total()]
    for _ in range(num_iter):
        output_step()
        trace.append(total())
        input_step()
        trace.append(total())
    if a6_variant:
        output_step()
        trace.append(total())
    return Compressed(A_new, C_new, clustering, trace)

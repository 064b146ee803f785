"""Projection onto convex hulls and (discrete) Hausdorff distances between polytopes."""

from __future__ import annotations

import math

import numpy as np

from tropnnc._convex import project
from tropnnc.tropical.polytope import (
    DEFAULT_POINT_CAP,
    PointPolytope,
    Zonotope,
    defining_points,
    hull_vertex_indices,
)


def project_onto_hull(u, P) -> tuple[np.ndarray, float]:
    """Nearest point of the hull of ``P`` to ``u`` and its distance."""
    body = _as_body(P)
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (body.dim,):
        raise ValueError(f"expected a point of dimension {body.dim}, got shape {u.shape}")
    res = project(u, body.oracle())
    return res.point, res.distance


def _as_body(P):
    if isinstance(P, (PointPolytope, Zonotope)):
        return P
    return PointPolytope(P)


def _is_empty(P) -> bool:
    if isinstance(P, (PointPolytope, Zonotope)):
        return False
    return np.asarray(P).size == 0


def _empty_rule(P, Q) -> float | None:
    ep, eq = _is_empty(P), _is_empty(Q)
    if ep and eq:
        return 0.0
    if ep or eq:
        return math.inf
    return None


def directed_hausdorff(P, Q, cap: int = DEFAULT_POINT_CAP) -> float:
    """``max_{u in P} dist(u, hull Q)``; the max is attained at a defining point of ``P``."""
    src = defining_points(_as_body(P), cap)
    oracle = _as_body(Q).oracle()
    if src.shape[1] != oracle.dim:
        raise ValueError(f"dimension mismatch: {src.shape[1]} vs {oracle.dim}")
    return max(project(u, oracle).distance for u in src)


def hausdorff(P, Q, cap: int = DEFAULT_POINT_CAP) -> float:
    special = _empty_rule(P, Q)
    if special is not None:
        return special
    return max(directed_hausdorff(P, Q, cap), directed_hausdorff(Q, P, cap))


def vertices(P, cap: int = DEFAULT_POINT_CAP) -> np.ndarray:
    pts = defining_points(_as_body(P), cap)
    return pts[hull_vertex_indices(pts)]


def _finite_directed(a: np.ndarray, b: np.ndarray) -> float:
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return float(d.min(axis=1).max())


def discrete_hausdorff(P, Q, cap: int = DEFAULT_POINT_CAP) -> float:
    """Hausdorff distance between the two vertex sets (not their hulls)."""
    special = _empty_rule(P, Q)
    if special is not None:
        return special
    vp, vq = vertices(P, cap), vertices(Q, cap)
    if vp.shape[1] != vq.shape[1]:
        raise ValueError(f"dimension mismatch: {vp.shape[1]} vs {vq.shape[1]}")
    return max(_finite_directed(vp, vq), _finite_directed(vq, vp))

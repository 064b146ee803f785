"""Point-set polytopes, zonotopes and upper-envelope classification.

Polytopes are always carried by a defining point set (their convex hull);
facet descriptions are never built.  All geometric predicates reduce to
projections computed by :mod:`tropnnc._convex`.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from tropnnc._convex import PointOracle, ZonotopeOracle, project

ENVELOPE_TOL = 1e-9
BISECTION_STEPS = 60
DEFAULT_POINT_CAP = 20
MEMBERSHIP_FACTOR = 1e-3


@dataclass(frozen=True)
class PointPolytope:
    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if pts.shape[0] == 0:
            raise ValueError("polytope needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite polytope coordinates")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def oracle(self) -> PointOracle:
        return PointOracle(self.points)

    def support(self, direction) -> float:
        return float(np.max(self.points @ np.asarray(direction, dtype=np.float64)))


@dataclass(frozen=True)
class Zonotope:
    """``{start + sum_i lam_i v_i : 0 <= lam_i <= 1}``; zero generators are allowed."""

    start: np.ndarray
    generators: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.start, dtype=np.float64).reshape(-1)
        g = np.asarray(self.generators, dtype=np.float64).reshape(-1, s.shape[0])
        object.__setattr__(self, "start", s)
        object.__setattr__(self, "generators", g)

    @classmethod
    def from_generators(cls, generators, dim: int | None = None) -> "Zonotope":
        g = np.asarray(generators, dtype=np.float64)
        if g.size == 0:
            if dim is None:
                raise ValueError("dimension required for a zonotope without generators")
            return cls(np.zeros(dim), np.zeros((0, dim)))
        g = np.atleast_2d(g)
        return cls(np.zeros(g.shape[1]), g)

    @property
    def dim(self) -> int:
        return self.start.shape[0]

    @property
    def n_generators(self) -> int:
        return self.generators.shape[0]

    def oracle(self) -> ZonotopeOracle:
        return ZonotopeOracle(self.start, self.generators)

    def support(self, direction) -> float:
        w = np.asarray(direction, dtype=np.float64)
        proj = self.generators @ w
        return float(self.start @ w + proj[proj > 0].sum())


def as_polytope(body) -> PointPolytope | Zonotope:
    if isinstance(body, (PointPolytope, Zonotope)):
        return body
    return PointPolytope(body)


def minkowski_sum(p: PointPolytope, q: PointPolytope) -> PointPolytope:
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    sums = p.points[:, None, :] + q.points[None, :, :]
    return PointPolytope(sums.reshape(-1, p.dim))


def zonotope_points(z: Zonotope, cap: int = DEFAULT_POINT_CAP) -> np.ndarray:
    """All ``2**n`` points ``s + sum_{i in I} v_i``; a superset of the vertex set."""
    n = z.n_generators
    if n > cap:
        raise ValueError(f"{n} generators exceed the enumeration cap of {cap}")
    if n == 0:
        return z.start[None, :].copy()
    masks = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
    return z.start + masks @ z.generators


def defining_points(body, cap: int = DEFAULT_POINT_CAP) -> np.ndarray:
    body = as_polytope(body)
    if isinstance(body, Zonotope):
        return zonotope_points(body, cap)
    return body.points


def zonotope_vertex_count(n: int, d: int) -> int:
    """Vertex count of a zonotope with ``n`` generators in general position in R^d."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    return 2 * sum(comb(n - 1, j) for j in range(d))


def distance_to(u, body) -> float:
    return project(u, as_polytope(body).oracle())[1]


def contains(body, u, tol: float = ENVELOPE_TOL) -> bool:
    return distance_to(u, body) <= tol


def unique_points(points: np.ndarray, tol: float = ENVELOPE_TOL) -> np.ndarray:
    """Indices of the first occurrence of each point (per-coordinate tolerance)."""
    keep: list[int] = []
    for i, p in enumerate(points):
        if not any(np.all(np.abs(points[k] - p) <= tol) for k in keep):
            keep.append(i)
    return np.array(keep, dtype=int)


def hull_vertex_indices(points, tol: float = ENVELOPE_TOL) -> np.ndarray:
    """Indices of points that are vertices of their convex hull (duplicates collapsed)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    cand = unique_points(pts, tol)
    if cand.size <= 1:
        return cand
    out = []
    for idx in cand:
        others = pts[cand[cand != idx]]
        if distance_to(pts[idx], PointPolytope(others)) > tol:
            out.append(idx)
    return np.array(out, dtype=int)


class EnvelopePosition(enum.Enum):
    STRICTLY_BELOW = "strictly_below"
    ON_ENVELOPE = "on_envelope"
    ABOVE = "above"


class _ShadowOracle:
    # oracle for the image of a body under dropping the last coordinate
    def __init__(self, inner):
        self.inner = inner
        self.heights: dict[bytes, float] = {}

    def center(self) -> np.ndarray:
        return self.inner.center()[:-1]

    def __call__(self, direction: np.ndarray) -> np.ndarray:
        full = self.inner(np.append(direction, 0.0))
        foot = full[:-1].copy()
        self.heights[foot.tobytes()] = float(full[-1])
        return foot


def lift_height(point, body, tol: float = ENVELOPE_TOL) -> float | None:
    """Largest ``t`` with ``point + t e_last`` in the body.

    ``None`` when the vertical line through ``point`` misses the body.  The
    value is negative when the point sits above the body.
    """
    body = as_polytope(body)
    point = np.asarray(point, dtype=np.float64)
    if point.shape[0] != body.dim:
        raise ValueError(f"dimension mismatch: {point.shape[0]} vs {body.dim}")
    last = defining_points(body)[:, -1]
    top = float(last.max())
    # membership is tested much tighter than the reported tolerance: on a
    # steep face a point lifted by t sits only ~t*cos(angle) from the body
    inner = tol * MEMBERSHIP_FACTOR
    if contains(body, point, inner):
        lo = 0.0
    elif body.dim == 1:
        if point[0] > top:
            return top - point[0]
        lo = float(last.min()) - point[0]
    else:
        shadow = _ShadowOracle(body.oracle())
        res = project(point[:-1], shadow)
        if res.distance > inner:
            return None
        height = sum(w * shadow.heights[v.tobytes()] for v, w in zip(res.active, res.weights))
        lo = height - point[-1]
    hi = top - point[-1] + 1.0
    lifted = point.copy()
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        lifted[-1] = point[-1] + mid
        if contains(body, lifted, inner):
            lo = mid
        else:
            hi = mid
    return lo


def is_on_or_below_upper(point, body, tol: float = ENVELOPE_TOL) -> EnvelopePosition:
    t = lift_height(point, body, tol)
    if t is None or t < -tol:
        return EnvelopePosition.ABOVE
    if t > tol:
        return EnvelopePosition.STRICTLY_BELOW
    return EnvelopePosition.ON_ENVELOPE

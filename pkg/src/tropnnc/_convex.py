"""Euclidean projection onto convex bodies described by a linear minimization oracle.

The solver is a fully corrective conditional-gradient method (Wolfe's
minimum-norm-point scheme): each outer step asks the oracle for the vertex
minimizing a linear functional, adds it to the active set, and then solves
the affine least-squares problem over the active set exactly, dropping
vertices whose weights would turn negative (away steps).  It terminates in
finitely many steps on polytopes, which gives projections accurate to
machine precision instead of the slow tail of plain Frank-Wolfe.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

GAP_TOL = 1e-12
MAX_ITER = 10_000
_WEIGHT_EPS = 1e-13


class PointOracle:
    """Linear oracle over the convex hull of an explicit point set."""

    def __init__(self, points):
        self.points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.points.shape[0] == 0:
            raise ValueError("empty point set")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def center(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def __call__(self, direction: np.ndarray) -> np.ndarray:
        return self.points[int(np.argmin(self.points @ direction))]


class ZonotopeOracle:
    """Linear oracle over ``{s + G^T lam : 0 <= lam <= 1}``.

    The minimizer of a linear functional over a zonotope switches on exactly
    the generators with negative inner product, so the oracle is O(n d).
    """

    def __init__(self, start, generators):
        self.start = np.asarray(start, dtype=np.float64)
        g = np.asarray(generators, dtype=np.float64)
        self.generators = g.reshape(-1, self.start.shape[0])

    @property
    def dim(self) -> int:
        return self.start.shape[0]

    def center(self) -> np.ndarray:
        return self.start + 0.5 * self.generators.sum(axis=0)

    def __call__(self, direction: np.ndarray) -> np.ndarray:
        mask = self.generators @ direction < 0
        return self.start + self.generators[mask].sum(axis=0)


def _affine_minimizer(corral: np.ndarray) -> np.ndarray:
    # barycentric weights of the min-norm point of aff(corral)
    if corral.shape[0] == 1:
        return np.ones(1)
    base = corral[0]
    diffs = (corral[1:] - base).T
    beta, *_ = np.linalg.lstsq(diffs, -base, rcond=None)
    return np.concatenate(([1.0 - beta.sum()], beta))


class Projection(NamedTuple):
    point: np.ndarray
    distance: float
    gap: float
    iterations: int
    active: np.ndarray  # active vertices, one per row
    weights: np.ndarray  # convex weights of ``active`` reproducing ``point``


def project(u, oracle, tol: float = GAP_TOL, max_iter: int = MAX_ITER) -> Projection:
    """Project ``u`` onto the body behind ``oracle``."""
    u = np.asarray(u, dtype=np.float64)
    raw = oracle(oracle.center() - u)
    first = raw - u
    corral = first[None, :]
    verts = raw[None, :]
    lam = np.ones(1)
    x = first.copy()
    gap = np.inf
    it = 0
    while it < max_iter:
        it += 1
        v = oracle(x)
        p = v - u
        xx = float(x @ x)
        gap = xx - float(x @ p)
        scale = max(1.0, float(p @ p), xx)
        if gap <= tol * scale or xx <= 1e-30 * scale:
            break
        if np.any(np.all(corral == p, axis=1)):
            break
        corral = np.vstack([corral, p])
        verts = np.vstack([verts, v])
        lam = np.append(lam, 0.0)
        while it < max_iter:
            alpha = _affine_minimizer(corral)
            if np.all(alpha > _WEIGHT_EPS):
                lam = alpha
                break
            it += 1
            neg = alpha <= _WEIGHT_EPS
            ratios = np.full(lam.shape, np.inf)
            ratios[neg] = lam[neg] / (lam[neg] - alpha[neg])
            j = int(np.argmin(ratios))
            theta = min(max(ratios[j], 0.0), 1.0)
            lam = (1.0 - theta) * lam + theta * alpha
            lam[j] = 0.0
            keep = lam > _WEIGHT_EPS
            corral = corral[keep]
            verts = verts[keep]
            lam = lam[keep] / lam[keep].sum()
        x = lam @ corral
    return Projection(
        x + u, float(np.sqrt(max(float(x @ x), 0.0))), max(gap, 0.0), it, verts, lam
    )

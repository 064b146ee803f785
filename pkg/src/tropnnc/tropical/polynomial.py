"""Max-plus polynomials ``max_i (a_i . x + b_i)`` and their extended Newton polytopes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tropnnc.tropical.polytope import (
    ENVELOPE_TOL,
    EnvelopePosition,
    PointPolytope,
    distance_to,
    is_on_or_below_upper,
    unique_points,
)


@dataclass(frozen=True)
class TropPolynomial:
    slopes: np.ndarray  # (n, d)
    biases: np.ndarray  # (n,)

    def __post_init__(self):
        biases = np.asarray(self.biases, dtype=np.float64).reshape(-1)
        slopes = np.asarray(self.slopes, dtype=np.float64)
        if biases.size == 0:
            raise ValueError("a tropical polynomial needs at least one term")
        slopes = slopes.reshape(biases.size, -1)
        if not (np.all(np.isfinite(slopes)) and np.all(np.isfinite(biases))):
            raise ValueError("non-finite coefficients")
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "biases", biases)

    @classmethod
    def from_terms(cls, terms, dim: int | None = None) -> "TropPolynomial":
        """Build from ``[(slope, bias), ...]``."""
        terms = list(terms)
        if not terms:
            raise ValueError("a tropical polynomial needs at least one term")
        slopes = [np.asarray(a, dtype=np.float64).reshape(-1) for a, _ in terms]
        if dim is None:
            dim = slopes[0].size
        if any(a.size != dim for a in slopes):
            raise ValueError("all slopes must share one dimension")
        return cls(np.array(slopes).reshape(len(terms), dim), [b for _, b in terms])

    @classmethod
    def constant(cls, value: float, dim: int) -> "TropPolynomial":
        return cls(np.zeros((1, dim)), [value])

    @classmethod
    def relu(cls, a, b: float, scale: float = 1.0) -> "TropPolynomial":
        """``scale * max(a.x + b, 0)`` for ``scale >= 0``."""
        a = np.asarray(a, dtype=np.float64).reshape(-1)
        return cls(np.vstack([scale * a, np.zeros_like(a)]), [scale * b, 0.0])

    @property
    def dim(self) -> int:
        return self.slopes.shape[1]

    @property
    def rank(self) -> int:
        return self.biases.size

    def __len__(self) -> int:
        return self.rank

    def terms(self) -> list[tuple[np.ndarray, float]]:
        return [(self.slopes[i].copy(), float(self.biases[i])) for i in range(self.rank)]

    def lifted(self) -> np.ndarray:
        """Rows ``(a_i, b_i)`` in dimension ``d + 1``."""
        return np.hstack([self.slopes, self.biases[:, None]])

    def subset(self, indices) -> "TropPolynomial":
        idx = np.asarray(indices, dtype=int)
        return TropPolynomial(self.slopes[idx], self.biases[idx])

    def __call__(self, x) -> np.ndarray | float:
        return eval_trop(self, x)


def _check_dims(f: TropPolynomial, g: TropPolynomial) -> None:
    if f.dim != g.dim:
        raise ValueError(f"dimension mismatch: {f.dim} vs {g.dim}")


def eval_trop(p: TropPolynomial, x) -> np.ndarray | float:
    """Evaluate at one point ``(d,)`` or a batch ``(N, d)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.dim:
        raise ValueError(f"expected points of dimension {p.dim}, got {x.shape[-1]}")
    vals = (x @ p.slopes.T + p.biases).max(axis=-1)
    return float(vals) if x.ndim == 1 else vals


def trop_max(f: TropPolynomial, g: TropPolynomial) -> TropPolynomial:
    """Tropical sum: term union."""
    _check_dims(f, g)
    return TropPolynomial(np.vstack([f.slopes, g.slopes]), np.concatenate([f.biases, g.biases]))


def trop_add(f: TropPolynomial, g: TropPolynomial) -> TropPolynomial:
    """Tropical product: all pairwise term sums, ``f``-major order."""
    _check_dims(f, g)
    slopes = (f.slopes[:, None, :] + g.slopes[None, :, :]).reshape(-1, f.dim)
    biases = (f.biases[:, None] + g.biases[None, :]).reshape(-1)
    return TropPolynomial(slopes, biases)


def enewt(p: TropPolynomial) -> PointPolytope:
    return PointPolytope(p.lifted())


def upper_envelope_terms(p: TropPolynomial, tol: float = ENVELOPE_TOL) -> list[int]:
    """Indices of terms lifting to vertices of the upper envelope.

    Exact duplicates keep their lowest index.  Restricting ``p`` to these terms
    leaves its values unchanged.
    """
    pts = p.lifted()
    cand = unique_points(pts, tol)
    if cand.size == 1:
        return [int(cand[0])]
    hull = PointPolytope(pts[cand])
    kept = []
    for idx in cand:
        if is_on_or_below_upper(pts[idx], hull, tol) is EnvelopePosition.STRICTLY_BELOW:
            continue
        others = PointPolytope(pts[cand[cand != idx]])
        if distance_to(pts[idx], others) > tol:
            kept.append(int(idx))
    return kept


def reduce_poly(p: TropPolynomial, tol: float = ENVELOPE_TOL) -> TropPolynomial:
    return p.subset(upper_envelope_terms(p, tol))


def _same_point_sets(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    if a.shape != b.shape:
        return False
    return all(np.any(np.all(np.abs(b - row) <= tol, axis=1)) for row in a) and all(
        np.any(np.all(np.abs(a - row) <= tol, axis=1)) for row in b
    )


def trop_poly_equal(p: TropPolynomial, q: TropPolynomial, tol: float = ENVELOPE_TOL) -> bool:
    """Functional equality via coincidence of the upper-envelope vertex sets."""
    _check_dims(p, q)
    vp = p.lifted()[upper_envelope_terms(p, tol)]
    vq = q.lifted()[upper_envelope_terms(q, tol)]
    return _same_point_sets(vp, vq, tol)

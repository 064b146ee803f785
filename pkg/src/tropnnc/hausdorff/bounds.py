"""Sampled checks of the Hausdorff approximation bounds and closed-form bound evaluators.

Every ``lhs_estimate`` is a maximum over finitely many points of the ball, so it
under-estimates the true supremum; ``holds`` is therefore one-sided evidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from tropnnc.hausdorff.distance import hausdorff
from tropnnc.tropical.network import check_shapes, network_forward, network_polys
from tropnnc.tropical.polynomial import TropPolynomial, enewt, eval_trop

BOUND_TOL = 1e-8
ACUTE_TOL = 1e-9
CSV_HEADER = "name,r,rho,lhs_estimate,rhs,holds,samples_used,seed,components"


@dataclass
class BoundReport:
    name: str
    r: float
    lhs_estimate: float
    rhs: float
    components: dict = field(default_factory=dict)
    samples_used: int = 0
    seed: int | None = None
    tol: float = BOUND_TOL

    @property
    def rho(self) -> float:
        return math.sqrt(self.r * self.r + 1.0)

    @property
    def holds(self) -> bool:
        return bool(self.lhs_estimate <= self.rhs + self.tol)

    def to_csv_row(self) -> str:
        comps = ";".join(f"{k}={_fmt(v)}" for k, v in self.components.items())
        fields = [
            self.name,
            _fmt(self.r),
            _fmt(self.rho),
            _fmt(self.lhs_estimate),
            _fmt(self.rhs),
            str(int(self.holds)),
            str(self.samples_used),
            "" if self.seed is None else str(self.seed),
            f'"{comps}"',
        ]
        return ",".join(fields)


def _fmt(v) -> str:
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + " ".join(_fmt(x) for x in np.ravel(v)) + "]"
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def sample_ball(n: int, dim: int, r: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform in the closed Euclidean ball of radius ``r``."""
    g = rng.standard_normal((n, dim))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radii = r * rng.random((n, 1)) ** (1.0 / dim)
    return g / norms * radii


def _check_radius(r: float) -> None:
    if not r > 0:
        raise ValueError(f"ball radius must be positive, got {r}")


def check_poly_bound(
    p: TropPolynomial, pt: TropPolynomial, r: float = 1.0, n_samples: int = 10_000, seed: int = 0
) -> BoundReport:
    _check_radius(r)
    if p.dim != pt.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {pt.dim}")
    x = sample_ball(n_samples, p.dim, r, np.random.default_rng(seed))
    rho = math.sqrt(r * r + 1.0)
    lhs = float(np.max(np.abs(eval_trop(p, x) - eval_trop(pt, x)))) / rho
    H = hausdorff(enewt(p), enewt(pt))
    return BoundReport("prop4", r, lhs, H, {"H": H}, n_samples, seed)


def _check_pair(A, C, At, Ct):
    A, C = check_shapes(A, C)
    At, Ct = check_shapes(At, Ct)
    if A.shape[1] != At.shape[1]:
        raise ValueError("input dimensions differ")
    if C.shape[0] != Ct.shape[0]:
        raise ValueError("output dimensions differ")
    return A, C, At, Ct


def sampled_network_gap(A, C, At, Ct, r: float, n_samples: int, seed: int) -> float:
    """Sampled ``max ||v - v~||_1 / rho`` over the ball."""
    x = sample_ball(n_samples, A.shape[1] - 1, r, np.random.default_rng(seed))
    diff = network_forward(A, C, x) - network_forward(At, Ct, x)
    return float(np.abs(diff).sum(axis=1).max()) / math.sqrt(r * r + 1.0)


def check_network_bound(
    A, C, At, Ct, r: float = 1.0, n_samples: int = 10_000, seed: int = 0
) -> BoundReport:
    _check_radius(r)
    A, C, At, Ct = _check_pair(A, C, At, Ct)
    lhs = sampled_network_gap(A, C, At, Ct, r, n_samples, seed)
    comps = {}
    rhs = 0.0
    for j, (o, ot) in enumerate(zip(network_polys(A, C), network_polys(At, Ct))):
        hp, hq = hausdorff(o.P, ot.P), hausdorff(o.Q, ot.Q)
        comps[f"H_P{j}"] = hp
        comps[f"H_Q{j}"] = hq
        rhs += hp + hq
    return BoundReport("thm6", r, lhs, rhs, comps, n_samples, seed)


def _labels(clustering) -> np.ndarray:
    return np.asarray(getattr(clustering, "labels", clustering), dtype=int)


def _clusters(labels: np.ndarray) -> list[np.ndarray]:
    ids = np.unique(labels[labels >= 0])
    return [np.flatnonzero(labels == k) for k in ids]


def acute_angle_ok(vectors, clustering, tol: float = ACUTE_TOL) -> bool:
    """No two vectors of one cluster form an obtuse angle."""
    v = np.asarray(vectors, dtype=np.float64)
    for idx in _clusters(_labels(clustering)):
        g = v[idx]
        if np.any(g @ g.T < -tol):
            return False
    return True


def _single_output_parts(A, c_row, clustering):
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    c = np.asarray(c_row, dtype=np.float64).reshape(-1)
    labels = _labels(clustering)
    if not (A.shape[0] == c.size == labels.size):
        raise ValueError("A, c_row and the clustering disagree on the neuron count")
    clusters = _clusters(labels)
    if len(clusters) == 0:
        raise ValueError("clustering has no clusters")
    for idx in clusters:
        signs = np.sign(c[idx])
        if np.any(signs > 0) and np.any(signs < 0):
            raise ValueError("cluster mixes positive and negative output weights")
    gens = np.abs(c)[:, None] * A
    delta = 0.0
    for idx in clusters:
        centre = gens[idx].mean(axis=0)
        delta = max(delta, float(np.linalg.norm(gens[idx] - centre, axis=1).max()))
    return gens, labels, clusters, delta


def prop5_rhs(A, c_row, clustering) -> float:
    """``sum_i min(||c_i (a_i, b_i)||, delta_max)`` over clustered neurons."""
    gens, labels, _, delta = _single_output_parts(A, c_row, clustering)
    norms = np.linalg.norm(gens[labels >= 0], axis=1)
    return float(np.minimum(norms, delta).sum())


def misiakos_rhs(A, c_row, clustering) -> float:
    """``K delta_max + (1 - 1/N_max) sum_i |c_i| ||(a_i, b_i)||``."""
    gens, labels, clusters, delta = _single_output_parts(A, c_row, clustering)
    n_max = max(idx.size for idx in clusters)
    norms = np.linalg.norm(gens[labels >= 0], axis=1)
    return float(len(clusters) * delta + (1.0 - 1.0 / n_max) * norms.sum())


def prop8_rhs(
    A, C, clustering, At, Ct, r: float = 1.0, n_samples: int = 10_000, seed: int = 0
) -> BoundReport:
    """Bound for the sign-frozen iterative scheme, with a sampled left-hand side.

    Row ``k`` of ``At`` and column ``k`` of ``Ct`` belong to cluster ``k``.  A
    neuron ``i`` of cluster ``k`` is null for output ``j`` when
    ``Ct[j, k] * C[j, i] <= 0``.
    """
    _check_radius(r)
    A, C, At, Ct = _check_pair(A, C, At, Ct)
    labels = _labels(clustering)
    if labels.size != A.shape[0]:
        raise ValueError("clustering size differs from the neuron count")
    clusters = _clusters(labels)
    if len(clusters) != At.shape[0] or Ct.shape[1] != At.shape[0]:
        raise ValueError("compressed layer width differs from the cluster count")
    m, n = C.shape
    gnorm = np.linalg.norm(A, axis=1)

    eps = np.zeros((m, n, A.shape[1]))
    l_sq = np.zeros(len(clusters))
    null_sum = np.zeros(m)
    n_min = math.inf
    for k, idx in enumerate(clusters):
        for j in range(m):
            ctk = Ct[j, k]
            live = idx[ctk * C[j, idx] > 0]
            dead = np.setdiff1d(idx, live)
            null_sum[j] += float(np.sum(np.abs(C[j, dead]) * gnorm[dead]))
            terms = C[j, live, None] * A[live]
            resid = ctk * At[k] - terms.sum(axis=0)
            l_sq[k] += float(resid @ resid)
            if ctk != 0:
                n_min = min(n_min, live.size)
            if live.size:
                eps[j, live] = terms - terms.mean(axis=0)
    l_k = np.sqrt(l_sq)
    vacuous = n_min == 0 or math.isinf(n_min)

    eps_norm = np.sqrt((eps**2).sum(axis=(0, 2)))
    trivial = np.linalg.norm(C, axis=0) * gnorm
    if vacuous:
        fitted = np.full(n, math.inf)
    else:
        k_of = np.full(n, -1)
        for k, idx in enumerate(clusters):
            k_of[idx] = k
        fitted = np.where(k_of >= 0, l_k[np.maximum(k_of, 0)] / n_min + eps_norm, math.inf)
    rhs = math.sqrt(m) * float(np.minimum(trivial, fitted).sum()) + float(null_sum.sum())

    lhs = sampled_network_gap(A, C, At, Ct, r, n_samples, seed)
    comps = {
        "N_min": 0 if math.isinf(n_min) else int(n_min),
        "vacuous": vacuous,
        "l_k": l_k,
        "eps_norm": eps_norm,
        "null_sum": null_sum,
    }
    return BoundReport("prop8", r, lhs, rhs, comps, n_samples, seed)

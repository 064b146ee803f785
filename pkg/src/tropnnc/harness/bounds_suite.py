"""Randomized and pinned checks that aggregate the hausdorff-module evaluators."""

from __future__ import annotations

import itertools
import math

import numpy as np

from tropnnc.compression.algorithms import (
    compress_multi_output,
    compress_multi_output_iterative,
    compress_single_output,
)
from tropnnc.hausdorff.bounds import (
    BoundReport,
    acute_angle_ok,
    check_network_bound,
    check_poly_bound,
    misiakos_rhs,
    prop5_rhs,
    prop8_rhs,
    sampled_network_gap,
)
from tropnnc.hausdorff.distance import discrete_hausdorff, hausdorff
from tropnnc.tropical.polynomial import TropPolynomial, trop_max, upper_envelope_terms
from tropnnc.tropical.polytope import (
    Zonotope,
    hull_vertex_indices,
    zonotope_points,
    zonotope_vertex_count,
)

KINDS = ("prop4", "thm6", "prop5", "cor7", "prop8", "vertexcount", "examples")
EXACT_TOL = 1e-9
GENERAL_POSITION_TOL = 1e-8
SAMPLES = 10_000


def _acute_layer(rng, n: int, d: int) -> np.ndarray:
    # nonnegative rows never form an obtuse angle
    return np.abs(rng.standard_normal((n, d + 1)))


def _prop4(rng, trial_seed: int) -> BoundReport:
    d = int(rng.integers(1, 4))
    n1, n2 = int(rng.integers(1, 9)), int(rng.integers(1, 9))
    p = TropPolynomial(rng.standard_normal((n1, d)), rng.standard_normal(n1))
    q = TropPolynomial(rng.standard_normal((n2, d)), rng.standard_normal(n2))
    return check_poly_bound(p, q, 1.0, SAMPLES, trial_seed)


def _thm6(rng, trial_seed: int) -> BoundReport:
    d, n, m = int(rng.integers(1, 5)), int(rng.integers(1, 11)), int(rng.integers(1, 4))
    A = rng.standard_normal((n, d + 1))
    C = rng.standard_normal((m, n))
    out = compress_multi_output(A, C, int(rng.integers(1, n + 1)), seed=trial_seed)
    return check_network_bound(A, C, out.A, out.C, 1.0, SAMPLES, trial_seed)


def _single_instance(rng, trial_seed: int):
    d, n = int(rng.integers(1, 4)), int(rng.integers(2, 11))
    A = _acute_layer(rng, n, d)
    c = rng.standard_normal(n)
    K = int(rng.integers(2 if (c > 0).any() and (c < 0).any() else 1, n + 1))
    return A, c, K


def _prop5(rng, trial_seed: int) -> BoundReport:
    A, c, K = _single_instance(rng, trial_seed)
    out = compress_single_output(A, c, K, seed=trial_seed)
    lhs = sampled_network_gap(A, c[None, :], out.A, out.C, 1.0, SAMPLES, trial_seed)
    rhs = prop5_rhs(A, c, out.clustering)
    comps = {"K": out.A.shape[0], "acute": acute_angle_ok(np.abs(c)[:, None] * A, out.clustering)}
    return BoundReport("prop5", 1.0, lhs, rhs, comps, SAMPLES, trial_seed)


def _cor7(rng, trial_seed: int) -> BoundReport:
    A, c, K = _single_instance(rng, trial_seed)
    clustering = compress_single_output(A, c, K, seed=trial_seed).clustering
    tight, loose = prop5_rhs(A, c, clustering), misiakos_rhs(A, c, clustering)
    comps = {"acute": acute_angle_ok(np.abs(c)[:, None] * A, clustering)}
    return BoundReport("cor7", 1.0, tight, loose, comps, 0, trial_seed, tol=EXACT_TOL)


def _prop8(rng, trial_seed: int) -> BoundReport:
    d, n, m = int(rng.integers(1, 4)), int(rng.integers(2, 11)), int(rng.integers(1, 4))
    A = _acute_layer(rng, n, d)
    C = rng.standard_normal((m, n))
    out = compress_multi_output_iterative(A, C, int(rng.integers(1, n + 1)), 10, a6_variant=True, seed=trial_seed)
    rep = prop8_rhs(A, C, out.clustering, out.A, out.C, 1.0, SAMPLES, trial_seed)
    rep.components["acute"] = acute_angle_ok(A, out.clustering)
    return rep


def general_position(gens: np.ndarray, tol: float = GENERAL_POSITION_TOL) -> bool:
    """Every ``min(n, d)`` generators are linearly independent (all square minors clear ``tol``)."""
    n, d = gens.shape
    k = min(n, d)
    for rows in itertools.combinations(range(n), k):
        for cols in itertools.combinations(range(d), k):
            if abs(np.linalg.det(gens[np.ix_(rows, cols)])) > tol:
                break
        else:
            return False
    return True


def random_general_position(rng, n: int, d: int) -> np.ndarray:
    while True:
        g = rng.standard_normal((n, d))
        if general_position(g):
            return g


def _vertexcount(rng, trial_seed: int) -> BoundReport:
    n, d = int(rng.integers(1, 9)), int(rng.integers(1, 5))
    gens = random_general_position(rng, n, d)
    found = hull_vertex_indices(zonotope_points(Zonotope.from_generators(gens))).size
    expected = zonotope_vertex_count(n, d)
    comps = {"n": n, "d": d, "vertices": found, "formula": expected}
    return BoundReport("vertexcount", 1.0, abs(found - expected), 0.0, comps, 0, trial_seed, tol=0.0)


def _exact(name: str, value, expected, tol: float = EXACT_TOL) -> BoundReport:
    gap = float(np.max(np.abs(np.asarray(value, dtype=np.float64) - np.asarray(expected, dtype=np.float64))))
    comps = {"value": value, "expected": expected}
    return BoundReport(name, 1.0, gap, 0.0, comps, 0, None, tol=tol)


def pinned_examples() -> list[BoundReport]:
    f = TropPolynomial.from_terms([((0, 0), 0), ((0, -1), 1), ((0, 1), 1)])
    g = TropPolynomial.from_terms([((1, 0), 1), ((-1, 0), 1)])
    fg = trop_max(f, g)
    kept = sorted(map(tuple, fg.lifted()[upper_envelope_terms(fg)]))
    want = sorted([(1, 0, 1), (0, 1, 1), (0, -1, 1), (-1, 0, 1)])
    reduction = _exact("pyramid_reduction", float(kept != want), 0.0)

    g1, g2 = np.array([1.0, 0.0]), np.array([0.5, math.sqrt(3) / 2])
    P = Zonotope.from_generators([g1, g2])
    mean = Zonotope.from_generators([(g1 + g2) / 2])
    total = Zonotope.from_generators([g1 + g2])
    root3 = math.sqrt(3) / 2
    reports = [
        reduction,
        _exact("mean_generator_H", hausdorff(P, mean), root3),
        _exact("mean_generator_DH", discrete_hausdorff(P, mean), root3),
        _exact("sum_generator_H", hausdorff(P, total), 0.5),
        _exact("sum_generator_DH", discrete_hausdorff(P, total), 1.0),
    ]
    out = compress_multi_output([[1.0, 0.0], [0.0, 1.0]], [[3.0, 5.0], [4.0, 2.0]], 1)
    rep = np.concatenate([out.A.ravel(), out.C.ravel()])
    reports.append(_exact("two_neuron_representative", rep, [0.5, 0.5, 8.0, 6.0], 0.0))
    return reports


_RUNNERS = {
    "prop4": _prop4,
    "thm6": _thm6,
    "prop5": _prop5,
    "cor7": _cor7,
    "prop8": _prop8,
    "vertexcount": _vertexcount,
}


def run_bounds_suite(kind: str, trials: int = 1, seed: int = 0) -> list[BoundReport]:
    if kind not in KINDS:
        raise ValueError(f"unknown check {kind!r}; choose from {', '.join(KINDS)}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if kind == "examples":
        return pinned_examples()
    rng = np.random.default_rng(seed)
    runner = _RUNNERS[kind]
    return [runner(rng, seed * 100_003 + t) for t in range(trials)]

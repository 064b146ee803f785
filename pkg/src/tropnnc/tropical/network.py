"""Single-hidden-layer ReLU nets ``v = C relu(A [x; 1])`` split into positive and negative parts."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from tropnnc.tropical.polynomial import TropPolynomial, trop_add
from tropnnc.tropical.polytope import DEFAULT_POINT_CAP, Zonotope


def check_shapes(A, C) -> tuple[np.ndarray, np.ndarray]:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    if A.shape[1] < 1:
        raise ValueError("A needs at least the bias column")
    if C.shape[1] != A.shape[0]:
        raise ValueError(f"C has {C.shape[1]} columns but A has {A.shape[0]} rows")
    return A, C


def _relu_sum(rows: np.ndarray, dim: int, cap: int) -> TropPolynomial:
    # sum of max(r . (x, 1), 0) over rows, expanded into 2**len(rows) terms
    if rows.shape[0] > cap:
        raise ValueError(f"{rows.shape[0]} units exceed the expansion cap of {cap}")
    polys = [TropPolynomial.relu(r[:-1], r[-1]) for r in rows]
    return reduce(trop_add, polys, TropPolynomial.constant(0.0, dim))


@dataclass(frozen=True)
class OutputPolys:
    """Positive and negative parts of one output: ``v_j = p_j - q_j``."""

    pos_generators: np.ndarray  # |c_ji| (a_i, b_i) for c_ji > 0
    neg_generators: np.ndarray

    @property
    def dim(self) -> int:
        return self.pos_generators.shape[1] - 1

    @property
    def P(self) -> Zonotope:
        return Zonotope.from_generators(self.pos_generators, self.dim + 1)

    @property
    def Q(self) -> Zonotope:
        return Zonotope.from_generators(self.neg_generators, self.dim + 1)

    def p(self, cap: int = DEFAULT_POINT_CAP) -> TropPolynomial:
        return _relu_sum(self.pos_generators, self.dim, cap)

    def q(self, cap: int = DEFAULT_POINT_CAP) -> TropPolynomial:
        return _relu_sum(self.neg_generators, self.dim, cap)

    def eval_p(self, x) -> np.ndarray:
        return _eval_relu_sum(self.pos_generators, x)

    def eval_q(self, x) -> np.ndarray:
        return _eval_relu_sum(self.neg_generators, x)

    def __call__(self, x) -> np.ndarray:
        return self.eval_p(x) - self.eval_q(x)


def _eval_relu_sum(gens: np.ndarray, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    pre = x @ gens[:, :-1].T + gens[:, -1]
    return np.maximum(pre, 0.0).sum(axis=-1)


def network_polys(A, C) -> list[OutputPolys]:
    A, C = check_shapes(A, C)
    out = []
    for row in C:
        scaled = np.abs(row)[:, None] * A
        out.append(OutputPolys(scaled[row > 0], scaled[row < 0]))
    return out


def network_forward(A, C, x) -> np.ndarray:
    """Direct evaluation of ``C relu(A [x; 1])`` for one point or a batch."""
    A, C = check_shapes(A, C)
    x = np.asarray(x, dtype=np.float64)
    hidden = np.maximum(x @ A[:, :-1].T + A[:, -1], 0.0)
    return hidden @ C.T

"""Seeded random problem generators and small fixtures."""
from __future__ import annotations

import numpy as np

from .core_model import AHSProblem, Box, HeavisideExpression, HeavisideTerm, OuterKind, PAFunction


def random_pa(rng, n: int, K: int = 1, L: int = 1, scale: float = 1.0) -> PAFunction:
    """PA function with unit-norm gradients so every piece is well scaled."""

    def pieces(m):
        out = []
        for _ in range(m):
            a = rng.standard_normal(n)
            a /= np.linalg.norm(a) or 1.0
            out.append((a * scale, float(rng.uniform(-0.5, 0.5))))
        return out

    return PAFunction.from_pieces(pieces(K), pieces(L))


def random_ahs(seed: int, n: int = 2, n_terms: int = 4, n_cons: int = 1, max_pieces: int = 2,
               open_prob: float = 0.3, box: float = 1.0) -> AHSProblem:
    """Mixed-sign problem with ``n_terms`` terms spread over objective and constraints.

    Constraint rows are built so that the box center region tends to be
    feasible, which keeps most instances nontrivial.
    """
    rng = np.random.default_rng(seed)
    blocks = 1 + n_cons
    owner = rng.integers(0, blocks, size=n_terms)
    owner[0] = 0
    term_lists = [[] for _ in range(blocks)]
    for b in owner:
        K = int(rng.integers(1, max_pieces + 1))
        L = int(rng.integers(1, max_pieces + 1))
        f = random_pa(rng, n, K, L)
        psi = float(rng.choice([-1, 1]) * rng.uniform(0.5, 2.0))
        kind = OuterKind.OPEN if rng.random() < open_prob else OuterKind.CLOSED
        term_lists[b].append(HeavisideTerm(psi, f, kind))
    obj = HeavisideExpression(rng.uniform(-0.3, 0.3, n), 0.0, term_lists[0])
    cons = []
    for b in range(1, blocks):
        neg = sum(min(t.coeff, 0.0) for t in term_lists[b])
        cons.append(HeavisideExpression(rng.uniform(-0.5, 0.5, n), -neg * rng.uniform(0.3, 1.0) + 0.1, term_lists[b]))
    dom = Box(-box * np.ones(n), box * np.ones(n))
    return AHSProblem(obj, cons, dom)


def two_term_1d() -> AHSProblem:
    """maximize 1[x >= 0] - 1[x - 0.5 >= 0] on [-1, 1]."""
    f1 = PAFunction.affine([1.0], 0.0)
    f2 = PAFunction.affine([1.0], -0.5)
    obj = HeavisideExpression([0.0], 0.0, [HeavisideTerm(1.0, f1), HeavisideTerm(-1.0, f2)])
    return AHSProblem(obj, [], Box([-1.0], [1.0]))

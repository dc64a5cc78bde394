"""Random instance generators shared by the test modules."""
import itertools

import numpy as np

from hscop.lp import EQ, GE, LE, LinearProgram
from hscop.milp import ModelBuilder


def random_lp(rng, n=None, m=None, eq=False) -> LinearProgram:
    n = n or int(rng.integers(1, 5))
    m = m if m is not None else int(rng.integers(0, 5))
    A = np.round(rng.uniform(-3, 3, (m, n)), 1)
    sense = rng.choice([LE, GE, EQ] if eq else [LE, GE], m)
    sense[np.flatnonzero(sense == EQ)[n - 1:]] = LE  # keep a free direction
    x0 = rng.uniform(-1, 1, n)
    # most rows pass through a neighborhood of x0; some instances end up infeasible
    rhs = A @ x0 + np.where(sense == LE, 1.0, -1.0) * rng.uniform(-0.3, 1.5, m)
    rhs[sense == EQ] = (A @ x0)[sense == EQ]
    lb = -rng.uniform(0.5, 2, n)
    ub = rng.uniform(0.5, 2, n)
    return LinearProgram(np.round(rng.uniform(-2, 2, n), 1), A, sense, rhs, lb, ub, float(rng.uniform(-1, 1)))


def random_milp(rng, n_bin=None, n_cont=None, m=None):
    n_bin = n_bin if n_bin is not None else int(rng.integers(1, 5))
    n_cont = n_cont if n_cont is not None else int(rng.integers(0, 3))
    m = m if m is not None else int(rng.integers(1, 5))
    b = ModelBuilder()
    z = b.add_vars("z", n_bin, 0.0, 1.0, binary=True)
    x = b.add_vars("x", n_cont, -1.0, 1.0)
    idx = np.concatenate([z, x]).astype(int)
    b.add_obj(idx, np.round(rng.uniform(-2, 2, len(idx)), 2))
    for _ in range(m):
        coef = np.round(rng.uniform(-2, 2, len(idx)), 2)
        b.add_row(idx, coef, str(rng.choice(["<=", ">="])), float(np.round(rng.uniform(-1, 2), 2)))
    return b.build(), n_bin


def milp_by_enumeration(model, n_bin):
    """Fix every binary pattern and solve the remaining LP by vertex enumeration."""
    from hscop.oracle import lp_vertex_optimum

    best = -np.inf
    lp = model.lp
    b, c = model.binary, ~model.binary
    for bits in itertools.product((0.0, 1.0), repeat=n_bin):
        bits = np.array(bits)
        const = lp.const + float(lp.c[b] @ bits)
        rhs = lp.rhs - lp.A[:, b] @ bits
        if not c.any():
            if (LinearProgram([0.0], np.zeros((len(rhs), 1)), lp.sense, rhs, [0.0], [0.0]).row_violation([0.0]) <= 1e-9).all():
                best = max(best, const)
            continue
        fixed = LinearProgram(lp.c[c], lp.A[:, c], lp.sense, rhs, lp.lb[c], lp.ub[c], const)
        status, val, _ = lp_vertex_optimum(fixed)
        if status == "Optimal":
            best = max(best, val)
    return best

"""Problem representation for Heaviside composite optimization.

A problem maximizes an objective expression subject to constraint
expressions that must evaluate to something nonnegative.  Every
expression is an affine function of ``x`` plus a signed sum of Heaviside
indicators composed with difference-of-convex piecewise affine (PA)
inner functions.  The feasible region ``P`` is a bounded box with
optional extra linear rows.

Block index convention used throughout the package: block 0 is the
objective, block ``i >= 1`` is constraint ``i - 1``.  A term is addressed
by ``(block, position)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

TAU_FEAS = 1e-9
ZERO_TOL = 1e-8


class ModelError(ValueError):
    """Raised for malformed or dimensionally inconsistent models."""


class OuterKind(str, Enum):
    CLOSED = "closed"  # 1[t >= 0]
    OPEN = "open"  # 1[t > 0]


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def piece_values(coef: np.ndarray, const: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Values of the affine pieces ``coef[k] @ x + const[k]``.

    Each value is an exactly rounded sum, so the same piece evaluates to
    the same float no matter which function it is stored in.
    """
    prods = coef * x
    return np.array([math.fsum((*row, c)) for row, c in zip(prods.tolist(), const.tolist())])


@dataclass(frozen=True, eq=False)
class PAFunction:
    """max_k (a_k x + alpha_k) + min_l (b_l x + beta_l)."""

    cvx_a: np.ndarray
    cvx_alpha: np.ndarray
    cve_b: np.ndarray
    cve_beta: np.ndarray

    def __post_init__(self):
        for name in ("cvx_a", "cvx_alpha", "cve_b", "cve_beta"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.cvx_a.ndim != 2 or self.cve_b.ndim != 2:
            raise ModelError("piece coefficient arrays must be 2-D")
        if len(self.cvx_a) == 0 or len(self.cve_b) == 0:
            raise ModelError("PA function needs at least one convex and one concave piece")
        if self.cvx_a.shape[1] != self.cve_b.shape[1]:
            raise ModelError("convex and concave pieces disagree on dimension")
        if len(self.cvx_alpha) != len(self.cvx_a) or len(self.cve_beta) != len(self.cve_b):
            raise ModelError("piece constants do not match piece count")

    @classmethod
    def from_pieces(cls, cvx: Sequence, cve: Sequence) -> "PAFunction":
        """Build from lists of ``(vector, constant)`` pairs."""
        if not cvx or not cve:
            raise ModelError("PA function needs at least one convex and one concave piece")
        return cls(
            np.array([np.asarray(a, float) for a, _ in cvx]),
            np.array([float(c) for _, c in cvx]),
            np.array([np.asarray(b, float) for b, _ in cve]),
            np.array([float(c) for _, c in cve]),
        )

    @classmethod
    def affine(cls, a, alpha: float = 0.0) -> "PAFunction":
        a = np.asarray(a, float)
        return cls.from_pieces([(a, alpha)], [(np.zeros_like(a), 0.0)])

    @classmethod
    def pure_min(cls, pieces: Sequence) -> "PAFunction":
        n = len(pieces[0][0])
        return cls.from_pieces([(np.zeros(n), 0.0)], pieces)

    @classmethod
    def pure_max(cls, pieces: Sequence) -> "PAFunction":
        n = len(pieces[0][0])
        return cls.from_pieces(pieces, [(np.zeros(n), 0.0)])

    @property
    def n(self) -> int:
        return self.cvx_a.shape[1]

    @property
    def K(self) -> int:
        return len(self.cvx_a)

    @property
    def L(self) -> int:
        return len(self.cve_b)

    def cvx_values(self, x) -> np.ndarray:
        return piece_values(self.cvx_a, self.cvx_alpha, _check_x(x, self.n))

    def cve_values(self, x) -> np.ndarray:
        return piece_values(self.cve_b, self.cve_beta, _check_x(x, self.n))

    def __call__(self, x) -> float:
        return eval_pa(self, x)

    def shifted(self, c: float) -> "PAFunction":
        """The function ``f + c`` (constant folded into the convex part)."""
        return PAFunction(self.cvx_a, self.cvx_alpha + c, self.cve_b, self.cve_beta)

    def pair_pieces(self) -> tuple[np.ndarray, np.ndarray]:
        """All K*L affine functions a_k + b_l, row index k*L + l."""
        A = (self.cvx_a[:, None, :] + self.cve_b[None, :, :]).reshape(-1, self.n)
        c = (self.cvx_alpha[:, None] + self.cve_beta[None, :]).reshape(-1)
        return A, c

    def to_json(self) -> dict:
        return {
            "cvx": [[*a, c] for a, c in zip(self.cvx_a.tolist(), self.cvx_alpha.tolist())],
            "cve": [[*b, c] for b, c in zip(self.cve_b.tolist(), self.cve_beta.tolist())],
        }

    @classmethod
    def from_json(cls, d: dict) -> "PAFunction":
        return cls.from_pieces([(r[:-1], r[-1]) for r in d["cvx"]], [(r[:-1], r[-1]) for r in d["cve"]])


def _check_x(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ModelError(f"expected a vector of length {n}, got shape {x.shape}")
    return x


def eval_pa(f: PAFunction, x) -> float:
    cvx = f.cvx_values(x).max()
    cve = f.cve_values(x).min()
    return float(cvx + cve)


def eval_heaviside(kind: OuterKind, t: float) -> int:
    if OuterKind(kind) is OuterKind.CLOSED:
        return int(t >= 0)
    return int(t > 0)


def indicator(t: float, threshold: float, strict: bool) -> int:
    """1[t > threshold] when strict, else 1[t >= threshold]."""
    return int(t > threshold) if strict else int(t >= threshold)


@dataclass(frozen=True, eq=False)
class HeavisideTerm:
    coeff: float
    inner: PAFunction
    kind: OuterKind = OuterKind.CLOSED

    def __post_init__(self):
        if self.coeff == 0:
            raise ModelError("zero-coefficient Heaviside terms are not allowed")
        object.__setattr__(self, "coeff", float(self.coeff))
        object.__setattr__(self, "kind", OuterKind(self.kind))

    @property
    def n(self) -> int:
        return self.inner.n

    def value(self, x) -> float:
        return self.coeff * eval_heaviside(self.kind, eval_pa(self.inner, x))


@dataclass(frozen=True, eq=False)
class MHSTerm:
    """coeff * 1[phi(x) >= 0] * 1[varphi(x) > 0].

    Either factor may be ``None``, meaning that factor is identically one.
    """

    coeff: float
    closed_inner: PAFunction | None
    open_inner: PAFunction | None

    def __post_init__(self):
        if self.coeff == 0:
            raise ModelError("zero-coefficient Heaviside terms are not allowed")
        if self.closed_inner is None and self.open_inner is None:
            raise ModelError("product term needs at least one factor")
        if self.closed_inner is not None and self.open_inner is not None:
            if self.closed_inner.n != self.open_inner.n:
                raise ModelError("product factors disagree on dimension")
        object.__setattr__(self, "coeff", float(self.coeff))

    @property
    def n(self) -> int:
        f = self.closed_inner if self.closed_inner is not None else self.open_inner
        return f.n

    def indicator(self, x) -> int:
        if self.closed_inner is not None and eval_pa(self.closed_inner, x) < 0:
            return 0
        if self.open_inner is not None and not eval_pa(self.open_inner, x) > 0:
            return 0
        return 1

    def value(self, x) -> float:
        return self.coeff * self.indicator(x)


@dataclass(frozen=True, eq=False)
class HeavisideExpression:
    """linear @ x + offset + sum of terms."""

    linear: np.ndarray
    offset: float = 0.0
    terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "linear", _frozen(self.linear))
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if t.n != len(self.linear):
                raise ModelError("term dimension differs from the linear part")

    @property
    def n(self) -> int:
        return len(self.linear)

    def affine_value(self, x) -> float:
        return math.fsum((*(self.linear * x).tolist(), self.offset))

    def value(self, x) -> float:
        return eval_expression(self, x)


@dataclass(frozen=True, eq=False)
class Box:
    """lower <= x <= upper plus optional rows ``(row, sense, rhs)``.

    ``sense`` is one of ``"<="``, ``">="``, ``"=="``.
    """

    lower: np.ndarray
    upper: np.ndarray
    rows: tuple = ()

    def __post_init__(self):
        lo, up = _frozen(self.lower), _frozen(self.upper)
        if lo.shape != up.shape or lo.ndim != 1:
            raise ModelError("box bounds must be vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(up))):
            raise ModelError("box must be bounded")
        if np.any(lo > up):
            raise ModelError("box lower bound exceeds upper bound")
        rows = []
        for row, sense, rhs in self.rows:
            if sense not in ("<=", ">=", "=="):
                raise ModelError(f"unknown row sense {sense!r}")
            r = _frozen(row)
            if r.shape != lo.shape:
                raise ModelError("box row has the wrong dimension")
            rows.append((r, sense, float(rhs)))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        object.__setattr__(self, "rows", tuple(rows))

    @property
    def n(self) -> int:
        return len(self.lower)

    @property
    def center(self) -> np.ndarray:
        return (self.lower + self.upper) / 2

    def contains(self, x, tol: float = TAU_FEAS) -> bool:
        x = np.asarray(x, float)
        if np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            return False
        for row, sense, rhs in self.rows:
            v = math.fsum((row * x).tolist())
            if sense == "<=" and v > rhs + tol:
                return False
            if sense == ">=" and v < rhs - tol:
                return False
            if sense == "==" and abs(v - rhs) > tol:
                return False
        return True


@dataclass(frozen=True, eq=False)
class AHSProblem:
    objective: HeavisideExpression
    constraints: tuple
    domain: Box

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        n = self.domain.n
        for e in (self.objective, *self.constraints):
            if e.n != n:
                raise ModelError("expression dimension differs from the domain")

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def blocks(self) -> tuple:
        return (self.objective, *self.constraints)

    def n_terms(self) -> int:
        return sum(len(e.terms) for e in self.blocks)


# An MHS problem reuses the expression and problem containers; its terms
# are MHSTerm instances.  The aliases keep call sites readable.
MHSExpression = HeavisideExpression
MHSProblem = AHSProblem


def eval_expression(e: HeavisideExpression, x) -> float:
    x = _check_x(x, e.n)
    return e.affine_value(x) + math.fsum(t.value(x) for t in e.terms)


def evaluate_objective(p: AHSProblem, x) -> float:
    return eval_expression(p.objective, x)


def check_feasible(p: AHSProblem, x, tol: float = TAU_FEAS) -> bool:
    x = _check_x(x, p.n)
    if not p.domain.contains(x, tol):
        return False
    return all(eval_expression(c, x) >= -tol for c in p.constraints)


@dataclass(frozen=True)
class ZeroIndexSets:
    zero: frozenset
    positive: frozenset
    negative: frozenset
    zero_negcoeff: frozenset


def _plain_terms(p: AHSProblem):
    for i, e in enumerate(p.blocks):
        for j, t in enumerate(e.terms):
            if not isinstance(t, HeavisideTerm):
                raise ModelError("index sets are defined for additive problems only")
            yield (i, j), t


def zero_index_sets(p: AHSProblem, x, tol: float = ZERO_TOL) -> ZeroIndexSets:
    if tol < 0:
        raise ModelError("tol must be nonnegative")
    zero, pos, neg, zneg = set(), set(), set(), set()
    for key, t in _plain_terms(p):
        v = eval_pa(t.inner, x)
        if abs(v) <= tol:
            zero.add(key)
            if t.coeff < 0:
                zneg.add(key)
        elif v > tol:
            pos.add(key)
        else:
            neg.add(key)
    return ZeroIndexSets(frozenset(zero), frozenset(pos), frozenset(neg), frozenset(zneg))


@dataclass
class LSIReport:
    """Sampling probe of local sign invariance.

    ``witnesses`` maps each probed term to a point where its inner
    function went negative, or ``None`` when no such point was found.
    """

    witnesses: dict = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return all(w is None for w in self.witnesses.values())

    def violated(self) -> list:
        return sorted(k for k, w in self.witnesses.items() if w is not None)


def sample_ball_box(center, radius: float, box: Box, samples: int, rng) -> np.ndarray:
    """Uniform points in the radius ball around ``center`` clipped to the box by rejection."""
    n = len(center)
    out = []
    tries = 0
    while len(out) < samples and tries < 50 * samples:
        tries += 1
        d = rng.standard_normal(n)
        d /= np.linalg.norm(d) or 1.0
        pt = center + radius * rng.random() ** (1.0 / n) * d
        if np.all(pt >= box.lower) and np.all(pt <= box.upper):
            out.append(pt)
    return np.array(out).reshape(-1, n)


def probe_lsi(p: AHSProblem, x, radius: float, samples: int, seed: int = 0,
              tol: float = ZERO_TOL) -> LSIReport:
    if radius <= 0 or samples < 1:
        raise ModelError("radius must be positive and samples at least one")
    x = _check_x(x, p.n)
    rng = np.random.default_rng(seed)
    pts = sample_ball_box(x, radius, p.domain, samples, rng)
    terms = dict(_plain_terms(p))
    report = LSIReport()
    for key in sorted(zero_index_sets(p, x, tol).zero_negcoeff):
        f = terms[key].inner
        report.witnesses[key] = next((pt for pt in pts if eval_pa(f, pt) < 0), None)
    return report


# ---------------------------------------------------------------- JSON


def _expr_to_json(e: HeavisideExpression) -> dict:
    terms = []
    for t in e.terms:
        if isinstance(t, HeavisideTerm):
            terms.append({"psi": t.coeff, "kind": t.kind.value, **t.inner.to_json()})
        else:
            d = {"psi": t.coeff}
            if t.closed_inner is not None:
                d["closed"] = t.closed_inner.to_json()
            if t.open_inner is not None:
                d["open"] = t.open_inner.to_json()
            terms.append(d)
    return {"linear": e.linear.tolist(), "offset": e.offset, "terms": terms}


def _expr_from_json(d: dict, n: int) -> HeavisideExpression:
    terms = []
    for t in d.get("terms", []):
        if "closed" in t or "open" in t:
            terms.append(MHSTerm(
                t["psi"],
                PAFunction.from_json(t["closed"]) if "closed" in t else None,
                PAFunction.from_json(t["open"]) if "open" in t else None,
            ))
        else:
            terms.append(HeavisideTerm(t["psi"], PAFunction.from_json(t), OuterKind(t.get("kind", "closed"))))
    linear = d.get("linear", [0.0] * n)
    return HeavisideExpression(linear, d.get("offset", 0.0), terms)


def problem_to_json(p: AHSProblem) -> dict:
    box = p.domain
    return {
        "n": p.n,
        "box": {
            "lower": box.lower.tolist(),
            "upper": box.upper.tolist(),
            "rows": [[r.tolist(), s, rhs] for r, s, rhs in box.rows],
        },
        "objective": _expr_to_json(p.objective),
        "constraints": [_expr_to_json(c) for c in p.constraints],
    }


def problem_from_json(d: dict) -> AHSProblem:
    try:
        n = int(d["n"])
        b = d["box"]
        box = Box(b["lower"], b["upper"], [tuple(r) for r in b.get("rows", [])])
        obj = _expr_from_json(d["objective"], n)
        cons = [_expr_from_json(c, n) for c in d.get("constraints", [])]
    except (KeyError, TypeError, IndexError) as exc:
        raise ModelError(f"malformed problem document: {exc!r}") from exc
    return AHSProblem(obj, cons, box)


def load_problem(path) -> AHSProblem:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    return problem_from_json(doc)


def save_problem(p: AHSProblem, path) -> None:
    Path(path).write_text(json.dumps(problem_to_json(p), indent=1))


def is_additive(p: AHSProblem) -> bool:
    return all(isinstance(t, HeavisideTerm) for e in p.blocks for t in e.terms)


def iter_terms(p: AHSProblem) -> Iterable:
    for i, e in enumerate(p.blocks):
        for j, t in enumerate(e.terms):
            yield (i, j), t

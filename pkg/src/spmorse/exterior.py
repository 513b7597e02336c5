"""Third exterior powers of orthogonal complements, and the four-summand
decompositions that drive the vector-field construction.

Elements of the big space are held in *ambient* form: dense integer (or
rational) rows over the lexicographically sorted index triples of the full
coordinate space.  Restricting to a subspace is then just a linear solve.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Sequence

import flint
import numpy as np

from .linalg import clear_denominators, echelon_coordinates, solve_exact, NoSolution
from .symplectic import ConstructionError, LatticeVector, PreconditionError, first_non_isotropic_pair, form, form_row, gcd_tuple, orthogonal_lattice

Triple = tuple[int, int, int]


class ContainmentError(ValueError):
    """A vector or wedge does not lie in the requested subspace."""


@lru_cache(maxsize=None)
def triples(m: int) -> tuple[Triple, ...]:
    return tuple(itertools.combinations(range(m), 3))


@lru_cache(maxsize=None)
def triple_index(m: int) -> dict[Triple, int]:
    return {t: n for n, t in enumerate(triples(m))}


def exterior3(rows) -> np.ndarray:
    """Third exterior power of a matrix: entry [(i,j,k),(p,q,r)] is the minor on those rows/columns.

    Row ``T`` of the result is the ambient form of the wedge of rows ``T``.
    """
    a = np.array([[x for x in r] for r in rows], dtype=object)
    if a.ndim != 2 or a.shape[0] < 3 or a.shape[1] < 3:
        r = a.shape[0] if a.ndim == 2 else 0
        c = a.shape[1] if a.ndim == 2 else 0
        return np.zeros((comb(r, 3), comb(c, 3)), dtype=object)
    R = np.array(triples(a.shape[0]), dtype=np.intp)
    C = np.array(triples(a.shape[1]), dtype=np.intp)

    def g(i, j):
        return a[np.ix_(R[:, i], C[:, j])]

    return (g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1))
            - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
            + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0)))


def wedge_ambient(u: Sequence, v: Sequence, w: Sequence) -> np.ndarray:
    """Ambient coordinates of u ^ v ^ w."""
    return exterior3([list(u), list(v), list(w)])[0]


def _to_fmpq(rows) -> flint.fmpq_mat:
    rows = [list(r) for r in rows]
    if not rows:
        return flint.fmpq_mat(0, 0)
    return flint.fmpq_mat(len(rows), len(rows[0]), [flint.fmpq(int(Fraction(x).numerator), int(Fraction(x).denominator)) for r in rows for x in r])


def _to_fmpz(rows) -> flint.fmpz_mat:
    rows = [list(r) for r in rows]
    if not rows:
        return flint.fmpz_mat(0, 0)
    return flint.fmpz_mat(len(rows), len(rows[0]), [int(x) for r in rows for x in r])


def _is_integral(rows) -> bool:
    return all(not isinstance(x, Fraction) or x.denominator == 1 for r in rows for x in r)


def rank_of(rows) -> int:
    """Exact rank of a family of ambient rows."""
    rows = [list(r) for r in rows]
    if not rows:
        return 0
    if _is_integral(rows):
        return _to_fmpz(rows).rank()
    return _to_fmpq(rows).rank()


def _frac(x) -> Fraction | int:
    p, q = int(x.p), int(x.q)
    return p if q == 1 else Fraction(p, q)


def express(basis_rows, targets) -> list[list]:
    """Coordinates of each target row in terms of ``basis_rows`` (independent rows).

    Raises ContainmentError if a target is outside their span.
    """
    basis_rows = [list(r) for r in basis_rows]
    targets = [list(t) for t in targets]
    if not targets:
        return []
    if not basis_rows:
        if any(any(t) for t in targets):
            raise ContainmentError("nonzero target but empty basis")
        return [[] for _ in targets]
    b = _to_fmpq(basis_rows).transpose()  # n x k
    t = _to_fmpq(targets).transpose()  # n x r
    k = b.ncols()
    piv_rows, rank = _pivot_rows(basis_rows)
    if rank != k:
        raise ValueError("basis rows are dependent")
    sq = _to_fmpq([[basis_rows[j][p] for j in range(k)] for p in piv_rows])
    rhs = _to_fmpq([[tg[p] for tg in targets] for p in piv_rows])
    sol = sq.solve(rhs)
    if b * sol != t:
        raise ContainmentError("target lies outside the span")
    return [[_frac(sol[i, c]) for i in range(k)] for c in range(len(targets))]


def _pivot_rows(basis_rows) -> tuple[list[int], int]:
    """Coordinate indices on which the given independent rows are independent."""
    m = _to_fmpq(basis_rows)  # k x n
    red, rank = m.rref()
    piv = []
    for i in range(rank):
        piv.append(next(j for j in range(m.ncols()) if red[i, j] != 0))
    return piv, rank


# ---------------------------------------------------------------------------
# Subspaces and wedge elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubspaceBasis:
    """Integral basis (HNF rows of the saturated lattice) of a rational subspace of Q^n."""

    ambient: int
    basis: tuple[tuple[int, ...], ...]
    constraints: tuple[tuple[int, ...], ...] = field(default=(), compare=False)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def coordinates(self, v: Sequence) -> list:
        coords = echelon_coordinates(self.basis, v)
        if coords is None:
            raise ContainmentError(f"vector {tuple(v)} is outside the subspace")
        return [c.numerator if c.denominator == 1 else c for c in coords]

    def contains(self, v: Sequence) -> bool:
        return echelon_coordinates(self.basis, v) is not None

    def contains_subspace(self, other: "SubspaceBasis") -> bool:
        return all(self.contains(b) for b in other.basis)

    def wedge_rows(self) -> np.ndarray:
        """Ambient forms of the wedges of basis triples, in triple order."""
        return _wedge_rows(self)

    def digest(self) -> str:
        body = json.dumps({"n": self.ambient, "basis": [list(map(str, b)) for b in self.basis]})
        return hashlib.sha256(body.encode()).hexdigest()[:16]

    def to_json(self) -> dict:
        return {"ambient": self.ambient, "basis": [[str(x) for x in b] for b in self.basis], "digest": self.digest()}


@lru_cache(maxsize=4096)
def _wedge_rows(s: SubspaceBasis) -> np.ndarray:
    return exterior3(s.basis)


@lru_cache(maxsize=8192)
def _orth(vs: tuple[tuple[int, ...], ...], n: int) -> SubspaceBasis:
    basis = orthogonal_lattice([LatticeVector(v) for v in vs], dim=n) if vs else [
        tuple(int(i == j) for j in range(n)) for i in range(n)]
    return SubspaceBasis(n, tuple(tuple(b) for b in basis), vs)


def orth_complement(vs: Sequence[Sequence[int]], g: int | None = None) -> SubspaceBasis:
    """{h : <h, v> = 0 for all v in vs}, as an integral echelon basis."""
    vs = [tuple(int(x) for x in v) for v in vs]
    n = 2 * g if g is not None else len(vs[0])
    if vs and len(vs[0]) != n:
        raise ValueError("genus does not match the vectors")
    key = tuple(sorted(set(vs)))
    return _orth(key, n)


def wedge3_basis(s: SubspaceBasis) -> tuple[Triple, ...]:
    return triples(s.dim)


@dataclass(frozen=True)
class Wedge3Element:
    """Coordinates over the sorted basis triples of Λ³ of ``carrier`` (sparse map)."""

    carrier: SubspaceBasis
    coords: tuple[tuple[Triple, object], ...]

    @classmethod
    def from_map(cls, carrier: SubspaceBasis, coords: dict) -> "Wedge3Element":
        items = tuple(sorted((tuple(t), v) for t, v in coords.items() if v))
        return cls(carrier, items)

    @classmethod
    def from_dense(cls, carrier: SubspaceBasis, dense: Sequence) -> "Wedge3Element":
        ts = triples(carrier.dim)
        return cls.from_map(carrier, {ts[n]: _norm(x) for n, x in enumerate(dense) if x})

    def as_map(self) -> dict:
        return dict(self.coords)

    def dense(self) -> list:
        out = [0] * comb(self.carrier.dim, 3)
        idx = triple_index(self.carrier.dim)
        for t, v in self.coords:
            out[idx[t]] = v
        return out

    def is_zero(self) -> bool:
        return not self.coords

    def __add__(self, other: "Wedge3Element") -> "Wedge3Element":
        if other.carrier != self.carrier:
            other = other.rewrite(self.carrier)
        m = self.as_map()
        for t, v in other.coords:
            m[t] = m.get(t, 0) + v
        return Wedge3Element.from_map(self.carrier, m)

    def __neg__(self) -> "Wedge3Element":
        return Wedge3Element.from_map(self.carrier, {t: -v for t, v in self.coords})

    def __sub__(self, other: "Wedge3Element") -> "Wedge3Element":
        return self + (-other)

    def scale(self, c) -> "Wedge3Element":
        return Wedge3Element.from_map(self.carrier, {t: _norm(c * v) for t, v in self.coords})

    def to_ambient(self) -> np.ndarray:
        rows = self.carrier.wedge_rows()
        out = np.zeros(rows.shape[1], dtype=object)
        idx = triple_index(self.carrier.dim)
        for t, v in self.coords:
            out = out + v * rows[idx[t]]
        return out

    @classmethod
    def from_ambient(cls, carrier: SubspaceBasis, amb: Sequence) -> "Wedge3Element":
        rows = carrier.wedge_rows()
        if rows.shape[0] == 0:
            if any(amb):
                raise ContainmentError("nonzero element in a zero space")
            return cls(carrier, ())
        (coords,) = express(rows.tolist(), [list(amb)])
        return cls.from_dense(carrier, coords)

    def rewrite(self, target: SubspaceBasis) -> "Wedge3Element":
        """The same element of Λ³(Q^n), expressed over ``target`` (which must contain the carrier)."""
        if target == self.carrier:
            return self
        P = rewrite_matrix(self.carrier, target)
        idx = triple_index(self.carrier.dim)
        out = np.zeros(P.shape[1], dtype=object)
        for t, v in self.coords:
            out = out + v * P[idx[t]]
        return Wedge3Element.from_dense(target, out.tolist())

    def to_json(self) -> dict:
        return {"carrier": self.carrier.digest(),
                "coords": [[list(t), str(v)] for t, v in self.coords]}


def _norm(x):
    if isinstance(x, Fraction) and x.denominator == 1:
        return x.numerator
    return x


def wedge(u: Sequence, v: Sequence, w: Sequence, carrier: SubspaceBasis | None = None) -> Wedge3Element:
    """u ^ v ^ w as an element over ``carrier`` (default: the whole space)."""
    if carrier is None:
        carrier = orth_complement([], len(u) // 2)
    U = [carrier.coordinates(x) for x in (u, v, w)]
    dense = exterior3(U)[0] if carrier.dim >= 3 else []
    return Wedge3Element.from_dense(carrier, list(dense))


@lru_cache(maxsize=8192)
def rewrite_matrix(src: SubspaceBasis, dst: SubspaceBasis) -> np.ndarray:
    """Λ³ of the inclusion src -> dst in the two triple bases (rows: source triples)."""
    P = []
    for b in src.basis:
        if not dst.contains(b):
            raise ContainmentError("source subspace is not contained in the target")
        P.append(dst.coordinates(b))
    return exterior3(P) if src.dim >= 3 else np.zeros((0, comb(dst.dim, 3)), dtype=object)


def contract(amb: Sequence, functional: Sequence, n: int) -> dict:
    """Interior product of an ambient 3-vector with a linear functional (as a map on pairs)."""
    out: dict = {}
    for (p, q, r), c in zip(triples(n), amb):
        if not c:
            continue
        for sign, a, pair in ((1, p, (q, r)), (-1, q, (p, r)), (1, r, (p, q))):
            f = functional[a]
            if f:
                out[pair] = out.get(pair, 0) + sign * f * c
    return {k: v for k, v in out.items() if v}


def lies_in(amb: Sequence, constraints: Sequence[Sequence[int]]) -> bool:
    """Whether an ambient 3-vector lies in Λ³ of the orthogonal complement of ``constraints``."""
    n = len(constraints[0]) if constraints else 0
    return all(not contract(amb, form_row(c), n) for c in constraints)


# ---------------------------------------------------------------------------
# Decompositions
# ---------------------------------------------------------------------------

def solve_duals(w: Sequence[Sequence[int]], ws: Sequence[Sequence[int]], b: Sequence[Sequence[int]] = ()) -> list[tuple]:
    """Rational u_j with <w_l, u_j> = delta_lj and u_j orthogonal to w and b (free variables zero)."""
    rows = [form_row(x) for x in ws] + [form_row(v) for v in w] + [form_row(v) for v in b]
    # form_row(x) . h = <h, x>, so negate to get <x, h>
    rows = [[-c for c in r] for r in rows]
    out = []
    for j in range(len(ws)):
        rhs = [int(l == j) for l in range(len(ws))] + [0] * (len(w) + len(b))
        try:
            out.append(tuple(solve_exact(rows, rhs)))
        except NoSolution:
            raise PreconditionError(f"no dual vector for w_{j + 1}") from None
    return out


def _integral(v: Sequence) -> tuple[int, ...]:
    """Positive rescaling to a primitive integer vector (same line)."""
    return clear_denominators(v)


def _complement_in(space: SubspaceBasis, prefix: list[tuple]) -> list[tuple]:
    chosen: list[tuple] = []
    rank = rank_of(prefix) if prefix else 0
    for bvec in space.basis:
        if rank_of(prefix + chosen + [bvec]) > rank:
            chosen.append(bvec)
            rank += 1
    return chosen


def wedge_summand(prefix: Sequence[Sequence], space: SubspaceBasis) -> np.ndarray:
    """Basis (ambient rows) of prefix_1 ^ ... ^ prefix_r ^ Λ^{3-r}(space), with the prefix inside space."""
    pre = [_integral(u) for u in prefix]
    for u in pre:
        if not space.contains(u):
            raise ContainmentError("dual vector is not in the summand's space")
    comp = _complement_in(space, pre)
    r = len(pre)
    full = exterior3(pre + comp)
    keep = [n for n, t in enumerate(triples(r + len(comp))) if sum(1 for x in t if x < r) == r]
    return full[keep] if keep else np.zeros((0, full.shape[1] if full.ndim == 2 else comb(space.ambient, 3)), dtype=object)


@dataclass
class Decomposition:
    """Four summands of Λ³<w, b>^⊥ with respect to w_1..w_4 and duals u_1..u_4 (ambient rows)."""

    w: tuple
    ws: tuple
    duals: tuple
    b: tuple
    big: SubspaceBasis
    summands: list[np.ndarray]
    rest: dict = field(default_factory=dict)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.shape[0] for s in self.summands)

    def verify(self) -> None:
        m = self.big.dim
        rows = [r for s in self.summands for r in s.tolist()]
        if len(rows) != comb(m, 3) or rank_of(rows) != comb(m, 3):
            raise ConstructionError("decompose", f"summands span rank {rank_of(rows)} of {comb(m, 3)}")
        for j, s in enumerate(self.summands):
            cons = list(self.w) + [self.ws[j]] + list(self.b)
            for r in s.tolist():
                if not lies_in(r, cons):
                    raise ConstructionError("decompose", f"summand {j + 1} leaves its complement")

    def elements(self, j: int) -> list[Wedge3Element]:
        return [Wedge3Element.from_ambient(self.big, r) for r in self.summands[j].tolist()]


def _check_inputs(w, ws, duals, b):
    allv = list(w) + list(ws)
    pair = first_non_isotropic_pair(allv)
    if pair is not None:
        raise PreconditionError(f"join is not isotropic at pair ({pair[0]},{pair[1]})")
    if gcd_tuple(allv) != 1:
        raise PreconditionError(f"join has gcd {gcd_tuple(allv)}")
    for j, u in enumerate(duals):
        for l, x in enumerate(ws):
            if form(x, u) != int(l == j):
                raise PreconditionError(f"<w_{l + 1}, u_{j + 1}> = {form(x, u)}, expected {int(l == j)}")
        for v in list(w):
            if form(v, u):
                raise PreconditionError(f"u_{j + 1} is not orthogonal to the simplex")
        for v in b:
            if form(v, u):
                raise PreconditionError(f"u_{j + 1} is not orthogonal to b")


def decompose(w: Sequence[Sequence[int]], ws: Sequence[Sequence[int]], duals: Sequence[Sequence] | None = None,
              b: Sequence[Sequence[int]] = (), check: bool = True) -> Decomposition:
    """Λ³<w,b>^⊥ = Λ³<w,w1,b>^⊥ + u1^Λ²<w,w2,b>^⊥ + u1^u2^<w,w3,b>^⊥ + <u1^u2^u3>."""
    w = [tuple(v) for v in w]
    ws = [tuple(v) for v in ws]
    b = [tuple(v) for v in b]
    if len(ws) != 4:
        raise PreconditionError("need exactly four vectors w_1..w_4")
    duals = [tuple(u) for u in duals] if duals is not None else solve_duals(w, ws, b)
    if check:
        _check_inputs(w, ws, duals, b)
    n = len(ws[0])
    big = orth_complement(w + b, n // 2)
    summands = []
    for j in range(4):
        space = orth_complement(w + [ws[j]] + b, n // 2)
        summands.append(wedge_summand(duals[:j], space) if j < 3 else exterior3([_integral(u) for u in duals[:3]]))
    out = Decomposition(tuple(w), tuple(ws), tuple(duals), tuple(b), big, summands)
    if check:
        out.verify()
    return out


def decompose_rest(w, ws, duals=None, b=(), check: bool = True) -> dict[int, list[tuple[int, np.ndarray]]]:
    """R(w_j) = sum over m < j of u_1^..^u_{m-1} ^ Λ^{4-m}<w, w_m, w_j, b>^⊥, keyed by j (1-based)."""
    dec = decompose(w, ws, duals, b, check=check)
    w = list(dec.w)
    out: dict[int, list[tuple[int, np.ndarray]]] = {1: []}
    n = len(dec.ws[0])
    for j in range(2, 5):
        parts = []
        for m in range(1, j):
            space = orth_complement(w + [dec.ws[m - 1], dec.ws[j - 1]] + list(dec.b), n // 2)
            parts.append((m, wedge_summand(dec.duals[: m - 1], space)))
        out[j] = parts
    if check:
        for j in range(1, 5):
            block = orth_complement(w + [dec.ws[j - 1]] + list(dec.b), n // 2)
            rows = dec.summands[j - 1].tolist() + [r for _, arr in out[j] for r in arr.tolist()]
            if len(rows) != comb(block.dim, 3) or rank_of(rows) != comb(block.dim, 3):
                raise ConstructionError("decompose-rest", f"C + R for w_{j} has rank {rank_of(rows)}, expected {comb(block.dim, 3)}")
            cons = w + [dec.ws[j - 1]] + list(dec.b)
            if not all(lies_in(r, cons) for r in rows):
                raise ConstructionError("decompose-rest", f"rest summand for w_{j} leaves its complement")
    dec.rest = out
    return out

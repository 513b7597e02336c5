"""The symplectic lattice H(g) and the gcd / dual-summand calculus on it.

Coordinates are ordered (a1, b1, a2, b2, ..., ag, bg) and the form is
<a_i, b_i> = 1 = -<b_i, a_i>, all other basis pairings zero.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

from .linalg import (
    IntMatrix,
    NoSolution,
    bareiss_det,
    echelon_coordinates,
    hnf_basis,
    integer_kernel,
    rational_rank,
    saturate_rows,
    solve_exact,
    xgcd,
)


class SpaceMismatch(ValueError):
    """Vectors from symplectic lattices of different genus were combined."""


class PreconditionError(ValueError):
    """Inputs violate the hypotheses of a construction."""


class ConstructionError(RuntimeError):
    """A construction step could not produce an object with the promised properties."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class SymplecticSpace:
    genus: int

    def __post_init__(self):
        if self.genus < 1:
            raise ValueError("genus must be positive")

    @property
    def dim(self) -> int:
        return 2 * self.genus

    def zero(self) -> "LatticeVector":
        return LatticeVector([0] * self.dim)

    def a(self, j: int) -> "LatticeVector":
        return basis_vector(self.genus, "a", j)

    def b(self, j: int) -> "LatticeVector":
        return basis_vector(self.genus, "b", j)

    def basis(self) -> list["LatticeVector"]:
        out = []
        for j in range(1, self.genus + 1):
            out += [self.a(j), self.b(j)]
        return out

    def form_matrix(self) -> IntMatrix:
        entries = {}
        for j in range(self.genus):
            entries[(2 * j, 2 * j + 1)] = 1
            entries[(2 * j + 1, 2 * j)] = -1
        return IntMatrix(self.dim, self.dim, entries=entries)


class LatticeVector(tuple):
    """Integer coordinate vector in H(g); ``+``, ``-`` and ``*`` act as vector operations."""

    def __new__(cls, coords: Iterable[int]):
        coords = tuple(coords)
        if len(coords) % 2 or not coords:
            raise ValueError("a lattice vector needs an even, positive number of coordinates")
        for c in coords:
            if isinstance(c, bool) or not isinstance(c, int):
                if isinstance(c, Fraction) and c.denominator == 1:
                    continue
                raise TypeError(f"coordinate {c!r} is not an integer")
        return super().__new__(cls, (int(c) for c in coords))

    @property
    def genus(self) -> int:
        return len(self) // 2

    @property
    def space(self) -> SymplecticSpace:
        return SymplecticSpace(self.genus)

    def _check(self, other) -> None:
        if len(other) != len(self):
            raise SpaceMismatch(f"genus {self.genus} vs genus {len(other) // 2}")

    def __add__(self, other):
        self._check(other)
        return LatticeVector(x + y for x, y in zip(self, other))

    __radd__ = __add__

    def __sub__(self, other):
        self._check(other)
        return LatticeVector(x - y for x, y in zip(self, other))

    def __rsub__(self, other):
        self._check(other)
        return LatticeVector(y - x for x, y in zip(self, other))

    def __neg__(self):
        return LatticeVector(-x for x in self)

    def __mul__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        return LatticeVector(k * x for x in self)

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not any(self)

    def __repr__(self) -> str:
        return f"LatticeVector({format_vector(self)})"

    def to_json(self) -> dict:
        return {"g": self.genus, "coords": [str(c) for c in self]}

    @classmethod
    def from_json(cls, payload: dict) -> "LatticeVector":
        coords = [int(c) for c in payload["coords"]]
        if len(coords) != 2 * int(payload["g"]):
            raise ValueError("coordinate count does not match the genus")
        return cls(coords)


Simplex = tuple  # ordered tuple of LatticeVector


def basis_vector(g: int, kind: str, j: int) -> LatticeVector:
    if not 1 <= j <= g:
        raise IndexError(f"index {j} outside 1..{g}")
    coords = [0] * (2 * g)
    coords[2 * (j - 1) + (0 if kind == "a" else 1)] = 1
    return LatticeVector(coords)


_TERM = re.compile(r"\s*([+-]?)\s*(\d*)\s*\*?\s*([ab])(\d+)\s*")


def parse_vector(text: str, g: int) -> LatticeVector:
    """Parse expressions such as ``"a1+2b3-a2"`` (the zero vector is ``"0"``)."""
    text = text.strip()
    coords = [0] * (2 * g)
    if text == "0":
        return LatticeVector(coords)
    pos = 0
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse vector at position {pos}: {text!r}")
        sign = -1 if m.group(1) == "-" else 1
        coef = int(m.group(2)) if m.group(2) else 1
        j = int(m.group(4))
        if not 1 <= j <= g:
            raise ValueError(f"index {j} outside 1..{g}")
        coords[2 * (j - 1) + (0 if m.group(3) == "a" else 1)] += sign * coef
        pos = m.end()
    return LatticeVector(coords)


def format_vector(v: Sequence[int]) -> str:
    terms = []
    for idx, c in enumerate(v):
        if not c:
            continue
        name = f"{'ab'[idx % 2]}{idx // 2 + 1}"
        coef = "" if abs(c) == 1 else str(abs(c))
        terms.append(("-" if c < 0 else "+") + coef + name)
    if not terms:
        return "0"
    s = "".join(terms)
    return s[1:] if s[0] == "+" else s


# ---------------------------------------------------------------------------
# Form, ranks, projections
# ---------------------------------------------------------------------------

def form(u: Sequence[int], v: Sequence[int]) -> int:
    if len(u) != len(v):
        raise SpaceMismatch(f"genus {len(u) // 2} vs genus {len(v) // 2}")
    return sum(u[k] * v[k + 1] - u[k + 1] * v[k] for k in range(0, len(u), 2))


def form_row(u: Sequence[int]) -> list[int]:
    """Coefficient row ``r`` with ``r . h = <h, u>``."""
    r = [0] * len(u)
    for k in range(0, len(u), 2):
        r[k] = u[k + 1]
        r[k + 1] = -u[k]
    return r


def rank_a(x: Sequence[int], j: int) -> int:
    if not 1 <= j <= len(x) // 2:
        raise IndexError(f"index {j} outside 1..{len(x) // 2}")
    return x[2 * (j - 1)]


def rank_b(x: Sequence[int], j: int) -> int:
    if not 1 <= j <= len(x) // 2:
        raise IndexError(f"index {j} outside 1..{len(x) // 2}")
    return x[2 * (j - 1) + 1]


def pr2(v: Sequence[int]) -> LatticeVector:
    return LatticeVector((0, 0) + tuple(v[2:]))


def is_isotropic(vs: Sequence[Sequence[int]]) -> bool:
    return all(form(u, v) == 0 for u, v in itertools.combinations(vs, 2))


def first_non_isotropic_pair(vs: Sequence[Sequence[int]]) -> tuple[int, int] | None:
    for i, j in itertools.combinations(range(len(vs)), 2):
        if form(vs[i], vs[j]):
            return i, j
    return None


def combine(coeffs: Sequence[int], vectors: Sequence[Sequence[int]]) -> LatticeVector:
    n = len(vectors[0])
    out = [0] * n
    for c, v in zip(coeffs, vectors):
        if c:
            for k in range(n):
                out[k] += c * v[k]
    return LatticeVector(out)


def project_onto(h: Sequence[int], pairs: Sequence[tuple[Sequence[int], Sequence[int]]]) -> LatticeVector:
    """Orthogonal projection onto the symplectic sublattice with symplectic basis ``pairs``."""
    out = [0] * len(h)
    for p, q in pairs:
        cp, cq = form(h, q), -form(h, p)
        for k in range(len(h)):
            out[k] += cp * p[k] + cq * q[k]
    return LatticeVector(out)


def project_away(h: Sequence[int], pairs) -> LatticeVector:
    """Projection onto the orthogonal complement of a symplectic sublattice."""
    return LatticeVector(h) - project_onto(h, pairs)


def projection_move(h: Sequence[int], x: Sequence[int], y: Sequence[int]) -> LatticeVector:
    """``h - <h,y> x`` for ``h`` orthogonal to ``x``; the result is orthogonal to both."""
    if form(x, y) != 1:
        raise PreconditionError(f"<x,y> = {form(x, y)}, expected 1")
    if form(h, x) != 0:
        raise PreconditionError(f"h is not orthogonal to x (<h,x> = {form(h, x)})")
    return LatticeVector(h) - form(h, y) * LatticeVector(x)


def divide_reduce(v: Sequence[int], pivot: Sequence[int], y: Sequence[int]) -> tuple[int, LatticeVector]:
    """Subtract the multiple of ``pivot`` that minimizes ``|<., y>|`` of the remainder.

    Ties between two candidates go to the smaller quotient.
    """
    r_piv = form(pivot, y)
    if r_piv == 0:
        raise PreconditionError("pivot has rank zero")
    r_v = form(v, y)
    q0 = r_v // r_piv
    q = min((q0 - 1, q0, q0 + 1), key=lambda q: (abs(r_v - q * r_piv), q))
    return q, LatticeVector(v) - q * LatticeVector(pivot)


# ---------------------------------------------------------------------------
# gcd of tuples
# ---------------------------------------------------------------------------

def gcd_tuple(vs: Sequence[Sequence[int]]) -> int:
    """|det| of the coordinates of ``vs`` in a basis of the smallest summand they span."""
    vs = [list(v) for v in vs]
    n = len(vs)
    if n == 0:
        return 1
    if rational_rank(vs) < n:
        return 0
    basis = saturate_rows(vs, len(vs[0]))
    cols = [echelon_coordinates(basis, v) for v in vs]
    matrix = [[int(cols[j][i]) for j in range(n)] for i in range(n)]
    return abs(bareiss_det(matrix))


def gcd2(vs: Sequence[Sequence[int]]) -> int:
    return gcd_tuple([pr2(v) for v in vs])


def contains_lattice(big: Sequence[Sequence[int]], small: Sequence[Sequence[int]]) -> bool:
    """Whether every vector of ``small`` is an integer combination of ``big``."""
    if not small:
        return True
    if not big:
        return not any(any(v) for v in small)
    basis = hnf_basis(big)
    for v in small:
        c = echelon_coordinates(basis, v)
        if c is None or any(x.denominator != 1 for x in c):
            return False
    return True


def same_lattice(a: Sequence[Sequence[int]], b: Sequence[Sequence[int]]) -> bool:
    return hnf_basis(a) == hnf_basis(b)


# ---------------------------------------------------------------------------
# Sublattices, complements, symplectic bases
# ---------------------------------------------------------------------------

def standard_lattice(g: int) -> list[LatticeVector]:
    return SymplecticSpace(g).basis()


def h2_lattice(g: int) -> list[LatticeVector]:
    """Basis of pr2(H): the span of a2, b2, ..., ag, bg."""
    return standard_lattice(g)[2:]


def h_k_lattice(g: int, k: int, offset: int = 0) -> list[LatticeVector]:
    """Basis of the span of a_j, b_j for ``offset < j <= offset + k``, truncated at g."""
    out = []
    for j in range(offset + 1, min(offset + k, g) + 1):
        out += [basis_vector(g, "a", j), basis_vector(g, "b", j)]
    return out


def orthogonal_lattice(vectors: Sequence[Sequence[int]], within: Sequence[Sequence[int]] | None = None,
                       dim: int | None = None) -> list[LatticeVector]:
    """HNF basis of the vectors of ``within`` (default: all of H) orthogonal to ``vectors``."""
    if within is None:
        n = len(vectors[0]) if vectors else dim
        within = [tuple(int(i == j) for j in range(n)) for i in range(n)]
    within = [list(w) for w in within]
    if not within:
        return []
    if not vectors:
        return [LatticeVector(v) for v in hnf_basis(within)]
    rows = [[form(w, u) for w in within] for u in vectors]
    kernel = integer_kernel(rows, len(within))
    images = [combine(x, within) for x in kernel]
    return [LatticeVector(v) for v in hnf_basis(images)]


def _functional_solutions(c: Sequence[int]) -> list[list[int]]:
    """Sparse integer vectors ``x`` with ``c . x = 1`` (requires gcd(c) = 1)."""
    n = len(c)
    sols = []
    for k, ck in enumerate(c):
        if ck in (1, -1):
            x = [0] * n
            x[k] = ck
            sols.append(x)
    if sols:
        return sols
    for k, l in itertools.combinations(range(n), 2):
        g, s, t = xgcd(c[k], c[l])
        if g == 1:
            x = [0] * n
            x[k], x[l] = s, t
            sols.append(x)
    if sols:
        return sols
    # chain the extended gcd across all entries
    x = [0] * n
    g = 0
    for k, ck in enumerate(c):
        if ck == 0:
            continue
        if g == 0:
            g, x[k] = abs(ck), (1 if ck > 0 else -1)
            continue
        g2, s, t = xgcd(g, ck)
        x = [s * v for v in x]
        x[k] = t
        g = g2
    if g != 1:
        raise PreconditionError(f"functional is not primitive (gcd {g})")
    return [x]


def _vec_key(u: Sequence[int]) -> tuple:
    return (sum(x * x for x in u), tuple(u))


def pairing_partner(v: Sequence[int], lattice: Sequence[Sequence[int]],
                    avoid: Sequence[Sequence[int]] = ()) -> LatticeVector:
    """Deterministic ``u`` in ``lattice`` with ``<v,u> = 1`` and ``gcd(u, v, *avoid) = 1``.

    Sparse solutions of the pairing equation are ranked by (squared norm,
    coordinates); if none of them keeps the gcd at 1, small perturbations
    along the kernel of the pairing are tried.
    """
    c = [form(v, l) for l in lattice]
    sols = _functional_solutions(c)
    cands = sorted({tuple(combine(x, lattice)) for x in sols}, key=_vec_key)
    base = [list(v)] + [list(w) for w in avoid if any(w)]
    need_check = len(base) > 1
    for u in cands:
        if not need_check or gcd_tuple([u] + base) == 1:
            return LatticeVector(u)
    kernel = [combine(x, lattice) for x in integer_kernel([c], len(c))]
    u0 = LatticeVector(cands[0])
    for bound in (1, 2, 3):
        trials = []
        for coeffs in itertools.product(range(-bound, bound + 1), repeat=min(len(kernel), 6)):
            if max(map(abs, coeffs), default=0) != bound:
                continue
            u = u0 + combine(coeffs, kernel[:len(coeffs)])
            trials.append(tuple(u))
        for u in sorted(trials, key=_vec_key):
            if gcd_tuple([u] + base) == 1:
                return LatticeVector(u)
    raise ConstructionError("pairing-partner", f"no partner for {format_vector(v)} keeps the gcd at 1")


def symplectic_basis(lattice: Sequence[Sequence[int]]) -> list[tuple[LatticeVector, LatticeVector]]:
    """Symplectic basis ``[(p1,q1), ...]`` of a unimodular sublattice given by a Z-basis."""
    current = [LatticeVector(v) for v in hnf_basis(lattice)] if lattice else []
    pairs = []
    while current:
        e = current[0]
        f = pairing_partner(e, current)
        pairs.append((e, f))
        rest = [project_away(h, [(e, f)]) for h in current]
        current = [LatticeVector(v) for v in hnf_basis(rest)] if any(any(h) for h in rest) else []
    return pairs


def flatten_pairs(pairs) -> list[LatticeVector]:
    return [v for pq in pairs for v in pq]


# ---------------------------------------------------------------------------
# Dual summands
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplittingData:
    """H = (S + D) + T with <s_i, d_j> = delta_ij; ``t_basis`` is stored as a symplectic basis."""

    s_basis: tuple[LatticeVector, ...]
    d_basis: tuple[LatticeVector, ...]
    t_basis: tuple[LatticeVector, ...]
    ambient: tuple[LatticeVector, ...] | None = field(default=None, compare=False)

    @property
    def t_pairs(self) -> list[tuple[LatticeVector, LatticeVector]]:
        t = self.t_basis
        return [(t[k], t[k + 1]) for k in range(0, len(t), 2)]

    def sd_pairs(self) -> list[tuple[LatticeVector, LatticeVector]]:
        return symplectic_basis(list(self.s_basis) + list(self.d_basis))

    def project_to_t(self, h: Sequence[int]) -> LatticeVector:
        return project_onto(h, self.t_pairs)

    def violations(self) -> list[str]:
        problems = []
        s, d, t = self.s_basis, self.d_basis, self.t_basis
        for i, v in enumerate(s):
            for j, u in enumerate(d):
                if form(v, u) != int(i == j):
                    problems.append(f"<s{i},d{j}> = {form(v, u)}")
        if not is_isotropic(d):
            problems.append("D is not isotropic")
        for x in t:
            if any(form(x, y) for y in list(s) + list(d)):
                problems.append("T is not orthogonal to S+D")
                break
        for k in range(0, len(t), 2):
            for l in range(0, len(t), 2):
                want = int(k == l)
                if form(t[k], t[l + 1]) != want or form(t[k], t[l]) or form(t[k + 1], t[l + 1]):
                    problems.append("T basis is not symplectic")
                    break
            else:
                continue
            break
        total = [list(x) for x in list(s) + list(d) + list(t)]
        ambient = self.ambient
        if ambient is None:
            dim = len(total[0]) if total else 0
            if total and (len(total) != dim or abs(bareiss_det(total)) != 1):
                problems.append("S+D+T is not a unimodular basis of H")
        elif not same_lattice(total, ambient) or len(total) != len(ambient):
            problems.append("S+D+T is not a basis of the ambient sublattice")
        return problems

    def verify(self) -> None:
        problems = self.violations()
        if problems:
            raise ConstructionError("splitting", "; ".join(problems))

    def to_json(self) -> dict:
        body = {
            "s_basis": [v.to_json() for v in self.s_basis],
            "d_basis": [v.to_json() for v in self.d_basis],
            "t_basis": [v.to_json() for v in self.t_basis],
        }
        body["digest"] = hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()
        return body


def _dual_in(vs: list[LatticeVector], lattice: list[LatticeVector]) -> list[LatticeVector]:
    """Inductive dual-basis construction inside a unimodular sublattice."""
    if not vs:
        return []
    v1 = vs[0]
    u1 = pairing_partner(v1, lattice, avoid=vs[1:])
    pair = [(v1, u1)]
    rest = [project_away(h, pair) for h in lattice]
    sub = [LatticeVector(x) for x in hnf_basis(rest)] if any(any(h) for h in rest) else []
    tails = [project_away(v, pair) for v in vs[1:]]
    us = _dual_in(tails, sub)
    u1 = u1 - combine([form(v, u1) for v in vs[1:]], us) if us else u1
    return [u1] + us


def dual_summand(vs: Sequence[Sequence[int]], lattice: Sequence[Sequence[int]] | None = None) -> SplittingData:
    """Dual summand of the span of ``vs`` (inside ``lattice`` if given, else all of H)."""
    vs = [LatticeVector(v) for v in vs]
    if not vs:
        if lattice is None:
            raise PreconditionError("empty tuple needs an explicit ambient lattice")
        lat = [LatticeVector(x) for x in lattice]
        return SplittingData((), (), tuple(flatten_pairs(symplectic_basis(lat))), tuple(lat))
    g = vs[0].genus
    lat = [LatticeVector(x) for x in lattice] if lattice is not None else standard_lattice(g)
    if not lat and vs:
        raise PreconditionError("ambient lattice is zero")
    rank = len(hnf_basis(lat))
    if 2 * len(vs) > rank:
        raise PreconditionError(f"{len(vs)} vectors exceed half the rank {rank}")
    d = gcd_tuple(vs)
    if d != 1:
        raise PreconditionError(f"gcd of the tuple is {d}, expected 1")
    if lattice is not None and not contains_lattice(lat, vs):
        raise PreconditionError("vectors do not lie in the ambient lattice")
    us = _dual_in(vs, lat)
    t_lat = orthogonal_lattice(vs + us, within=lat)
    t = flatten_pairs(symplectic_basis(t_lat))
    out = SplittingData(tuple(vs), tuple(us), tuple(t), tuple(lat) if lattice is not None else None)
    out.verify()
    return out


def complement_splitting(s: Sequence[Sequence[int]], d: Sequence[Sequence[int]],
                         lattice: Sequence[Sequence[int]] | None = None) -> SplittingData:
    s = [LatticeVector(x) for x in s]
    d = [LatticeVector(x) for x in d]
    t_lat = orthogonal_lattice(s + d, within=lattice, dim=len(s[0]) if s else None)
    t = flatten_pairs(symplectic_basis(t_lat))
    return SplittingData(tuple(s), tuple(d), tuple(t),
                         tuple(LatticeVector(x) for x in lattice) if lattice is not None else None)


def _extend_ii(base: SplittingData, ws: list[LatticeVector], lattice) -> SplittingData:
    vs = list(base.s_basis)
    t_pairs = base.t_pairs
    k = len(ws)
    tw = [project_onto(w, t_pairs) for w in ws]
    t_lat = flatten_pairs(t_pairs)
    w_basis: list[LatticeVector] = []
    if any(any(x) for x in tw):
        sw = [LatticeVector(x) for x in saturate_rows(tw, len(ws[0]))]
        inner = dual_summand(sw, lattice=t_lat)
        w_basis = list(inner.s_basis) + list(inner.d_basis)
        missing = k - len(sw)
        if 2 * missing > len(inner.t_basis):
            raise ConstructionError("dual-ii", "complement too small to pad W to rank 2k")
        w_basis += list(inner.t_basis[:2 * missing])
    else:
        if 2 * k > len(t_lat):
            raise ConstructionError("dual-ii", "complement too small to pad W to rank 2k")
        w_basis = list(t_lat[:2 * k])
    box = vs + list(base.d_basis) + w_basis
    inner = dual_summand(vs + ws, lattice=box)
    out = complement_splitting(vs + ws, inner.d_basis, lattice)
    out.verify()
    if not contains_lattice(list(out.s_basis) + list(out.d_basis), vs + list(base.d_basis)):
        raise ConstructionError("dual-ii", "S+D is not contained in S2+D2")
    return out


def extend_dual(base: SplittingData, ws: Sequence[Sequence[int]], mode: str = "ii",
                inner: SplittingData | None = None) -> SplittingData:
    """Enlarge or nest dual summands.

    ``mode="ii"``: dual summand of (S, ws) whose S+D contains the base S+D.
    ``mode="iii"``: dual summand of ``ws`` lying inside the base complement T.
    ``mode="iv"``: ``inner`` is a splitting for a tuple S2 with D2 inside the
    base T; returns a dual summand D3 of (S2, ws) inside T with
    S2 + D2 contained in S1 + D1 + S3 + D3.
    """
    ws = [LatticeVector(w) for w in ws]
    if not ws:
        return base
    lattice = list(base.ambient) if base.ambient is not None else None
    if mode == "ii":
        d = gcd_tuple(ws + list(base.s_basis))
        if d != 1:
            raise PreconditionError(f"gcd(ws, S) = {d}, expected 1")
        return _extend_ii(base, ws, lattice)
    if mode == "iii":
        d = gcd_tuple(ws + list(base.s_basis) + list(base.d_basis))
        if d != 1:
            raise PreconditionError(f"gcd(ws, S, D) = {d}, expected 1")
        t_pairs = base.t_pairs
        tw = [project_onto(w, t_pairs) for w in ws]
        sub = dual_summand(tw, lattice=flatten_pairs(t_pairs))
        out = complement_splitting(ws, sub.d_basis, lattice)
        out.verify()
        if any(form(u, x) for u in out.d_basis for x in list(base.s_basis) + list(base.d_basis)):
            raise ConstructionError("dual-iii", "D(ws) is not contained in T")
        return out
    if mode == "iv":
        if inner is None:
            raise PreconditionError("mode iv needs the inner splitting (S2, D2)")
        s1d1 = list(base.s_basis) + list(base.d_basis)
        vs = list(inner.s_basis)
        d = gcd_tuple(ws + s1d1 + vs)
        if d != 1:
            raise PreconditionError(f"gcd(ws, S1, D1, S2) = {d}, expected 1")
        if any(form(u, x) for u in inner.d_basis for x in s1d1):
            raise PreconditionError("D2 does not lie in T1")
        t1 = flatten_pairs(base.t_pairs)
        t_pairs = base.t_pairs
        tv = [project_onto(v, t_pairs) for v in vs]
        tw = [project_onto(w, t_pairs) for w in ws]
        base2 = complement_splitting(tv, inner.d_basis, t1)
        mid = _extend_ii(base2, tw, t1)
        out = complement_splitting(vs + ws, mid.d_basis, lattice)
        out.verify()
        if not contains_lattice(s1d1 + list(out.s_basis) + list(out.d_basis), vs + list(inner.d_basis)):
            raise ConstructionError("dual-iv", "S2+D2 not contained in S1+D1+S3+D3")
        if any(form(u, x) for u in out.d_basis for x in s1d1):
            raise ConstructionError("dual-iv", "D3 is not contained in T1")
        return out
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# Compensation vector
# ---------------------------------------------------------------------------

def default_t(delta: Sequence[Sequence[int]]) -> int:
    """0 when gcd2 = 1, otherwise the b1-rank of the first vertex."""
    return 0 if gcd2(delta) == 1 else rank_b(delta[0], 1)


def projected_splitting(delta: Sequence[Sequence[int]]) -> SplittingData:
    """(S, D, T) for the saturation of pr2(delta) inside pr2(H)."""
    g = len(delta[0]) // 2
    sat = [LatticeVector(x) for x in saturate_rows([pr2(v) for v in delta], 2 * g)]
    return dual_summand(sat, lattice=h2_lattice(g)) if sat else complement_splitting([], [], h2_lattice(g))


def compensate(delta: Sequence[Sequence[int]], t: int | None = None,
               splitting: SplittingData | None = None) -> LatticeVector:
    """``u`` in D(delta) with ``a1 + t b1 + u`` orthogonal to every vertex of ``delta``."""
    delta = [LatticeVector(v) for v in delta]
    if not delta:
        raise PreconditionError("empty simplex")
    g = delta[0].genus
    if gcd2(delta) == 0:
        raise PreconditionError("gcd2 of the simplex is 0")
    if t is None:
        t = default_t(delta)
    sd = splitting if splitting is not None else projected_splitting(delta)
    base = basis_vector(g, "a", 1) + t * basis_vector(g, "b", 1)
    rows = [[form(d, v) for d in sd.d_basis] for v in delta]
    rhs = [-form(base, v) for v in delta]
    try:
        y = solve_exact(rows, rhs)
    except NoSolution:
        raise ConstructionError("compensate", "no vector in D(delta) compensates the simplex") from None
    if any(isinstance(c, Fraction) and c.denominator != 1 for c in y):
        raise ConstructionError("compensate", f"compensating coefficients are not integral: {y}")
    u = combine([int(c) for c in y], sd.d_basis) if sd.d_basis else LatticeVector([0] * (2 * g))
    w = base + u
    if any(form(w, v) for v in delta):
        raise ConstructionError("compensate", "postcondition failed")
    return u


# ---------------------------------------------------------------------------
# Random symplectic matrices
# ---------------------------------------------------------------------------

def transvection_matrix(v: Sequence[int], sign: int = 1) -> IntMatrix:
    """Matrix of ``x -> x + sign <x,v> v``."""
    r = form_row(v)
    n = len(v)
    data = [[int(i == j) + sign * v[i] * r[j] for j in range(n)] for i in range(n)]
    return IntMatrix(n, n, data=data)


def transvection_generators(g: int, fix_b1: bool = False) -> list[LatticeVector]:
    """Vectors whose transvections generate Sp(2g, Z) (or the stabilizer of b1)."""
    basis = standard_lattice(g)
    gens = list(basis)
    for x, y in itertools.combinations(basis, 2):
        gens.append(x + y)
    if fix_b1:
        gens = [v for v in gens if v[0] == 0]
    return gens


def random_symplectic(g: int, seed: int, word_length: int, fix_b1: bool = False) -> IntMatrix:
    """Seeded product of ``word_length`` random transvections."""
    rng = random.Random(seed)
    gens = transvection_generators(g, fix_b1)
    n = 2 * g
    m = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(word_length):
        v = rng.choice(gens)
        sign = rng.choice((1, -1))
        r = form_row(v)
        # left-multiply: M <- (I + sign v r^T) M
        rm = [sum(r[k] * m[k][j] for k in range(n)) for j in range(n)]
        for i in range(n):
            if v[i]:
                c = sign * v[i]
                m[i] = [m[i][j] + c * rm[j] for j in range(n)]
    return IntMatrix(n, n, data=m)


def is_symplectic(m: IntMatrix) -> bool:
    n = m.rows
    if n != m.cols or n % 2:
        return False
    j = SymplecticSpace(n // 2).form_matrix()
    return m.T @ j @ m == j


def apply(m: IntMatrix, v: Sequence[int]) -> LatticeVector:
    rows = m.tolist()
    return LatticeVector(sum(r[k] * v[k] for k in range(len(v))) for r in rows)


def coordinate_gcd(v: Sequence[int]) -> int:
    g = 0
    for x in v:
        g = gcd(g, x)
    return g

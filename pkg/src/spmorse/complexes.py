"""Complexes of isotropic bases, their subcomplexes and filtrations, and the
constructive simplex/path operations used by the vector-field construction."""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .linalg import hnf, integer_kernel, saturate_rows, xgcd
from .symplectic import (
    ConstructionError,
    LatticeVector,
    PreconditionError,
    SplittingData,
    basis_vector,
    combine,
    complement_splitting,
    coordinate_gcd,
    dual_summand,
    first_non_isotropic_pair,
    flatten_pairs,
    form,
    format_vector,
    gcd2,
    gcd_tuple,
    h2_lattice,
    pr2,
    project_onto,
    rank_a,
    rank_b,
)

INF = math.inf
LEVELS = (INF, 5, 4, 3, 2, 1, 0)


def level_str(level) -> str:
    return "inf" if level == INF else str(level)


# ---------------------------------------------------------------------------
# Distinguished vertices and projections onto H_k
# ---------------------------------------------------------------------------

def ambient_genus(g: int, i: int) -> int:
    """Genus of the lattice the i-th complex lives in: g for i=1, g+1 for i=2."""
    if i not in (1, 2):
        raise ValueError("component index must be 1 or 2")
    return g + i - 1


def distinguished(i: int, G: int, size: int = 4) -> list[LatticeVector]:
    """A_1 = a1 and A_j = a_j (i=1) or a1 + a_j (i=2)."""
    out = [basis_vector(G, "a", 1)]
    for j in range(2, size + 1):
        aj = basis_vector(G, "a", j)
        out.append(aj if i == 1 else out[0] + aj)
    return out


def seed_duals(i: int, G: int) -> list[LatticeVector]:
    """B_1..B_4 paired with A_1..A_4; B_1 = b1 - b2 - b3 - b4 for i=2."""
    bs = [basis_vector(G, "b", j) for j in range(1, 5)]
    if i == 2:
        bs[0] = bs[0] - bs[1] - bs[2] - bs[3]
    return bs


def b_vector(i: int, G: int) -> list[LatticeVector]:
    """The extra orthogonality constraint: nothing for i=1, b1 for i=2."""
    return [] if i == 1 else [basis_vector(G, "b", 1)]


def in_h(v: Sequence[int], k: int) -> bool:
    """Whether ``v`` lies in H_k = span(a_k, b_k, ..., a_g, b_g)."""
    return not any(v[: 2 * (k - 1)])


def pr_h(v: Sequence[int], k: int) -> LatticeVector:
    n = 2 * (k - 1)
    return LatticeVector([0] * n + list(v[n:]))


def h_k_basis(G: int, k: int) -> list[LatticeVector]:
    out = []
    for j in range(k, G + 1):
        out += [basis_vector(G, "a", j), basis_vector(G, "b", j)]
    return out


# ---------------------------------------------------------------------------
# Filtration levels
# ---------------------------------------------------------------------------

def vertex_level(v: Sequence[int], i: int) -> float:
    G = len(v) // 2
    v = LatticeVector(v)
    if v in distinguished(i, G):
        return INF
    if i == 1:
        return max(k for k in range(1, 6) if in_h(v, k))
    a1 = basis_vector(G, "a", 1)
    h = v - a1
    for k in (5, 4, 3, 2):
        if in_h(h, k) and k <= G and not h.is_zero() and coordinate_gcd(h) == 1:
            return k
    return 1 if gcd2([v]) == 1 else 0


def filtration_level(s, i: int) -> float:
    """Largest k in (inf, 5, ..., 1 or 0) such that the vertex or simplex lies in F^i_k."""
    if isinstance(s, LatticeVector) or (s and isinstance(s[0], int)):
        return vertex_level(s, i)
    s = [LatticeVector(v) for v in s]
    if not s:
        return INF
    if i == 1:
        return min(vertex_level(v, 1) for v in s)
    G = s[0].genus
    A = distinguished(2, G)
    if all(v in A for v in s):
        return INF
    a1 = A[0]
    rest = [pr2(v) for v in s if v != a1]
    star_ok = gcd_tuple(rest) == 1 if rest else True
    for k in (5, 4, 3, 2):
        if star_ok and all(v in A or (in_h(v - a1, k) and not (v - a1).is_zero()) for v in s):
            return k
    return 1 if gcd2(s) == 1 else 0


# ---------------------------------------------------------------------------
# Complex specifications and membership
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        return "ok" if self.ok else str(self.reason)


TAGS = ("L", "L_a1", "L_ordered", "F", "good_gcd", "b1_rank", "M", "N", "conn")


@dataclass
class ComplexSpec:
    """A named complex together with the parameters its definition depends on.

    Parameters by tag:
      ``L_ordered``: ``i``.  ``F``: ``i``, ``k``.  ``good_gcd``: ``delta``.
      ``b1_rank``: ``delta``, ``t``.  ``M``: ``delta1``, ``delta2``,
      ``delta3``, ``d1``, ``d2``, ``t``.  ``N``: ``delta``, ``d``, ``t``.
      ``conn``: ``i``, ``x``, ``z``, ``k``.
    """

    tag: str
    g: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown complex tag {self.tag!r}")
        required = {
            "L_ordered": ("i",), "F": ("i", "k"), "good_gcd": ("delta",),
            "b1_rank": ("delta", "t"), "M": ("delta1", "delta2", "delta3", "d1", "d2", "t"),
            "N": ("delta", "d", "t"), "conn": ("i", "x", "z", "k"),
        }.get(self.tag, ())
        missing = [p for p in required if p not in self.params]
        if missing:
            raise ValueError(f"complex {self.tag} needs parameters {missing}")

    def to_json(self) -> dict:
        def enc(v):
            if isinstance(v, LatticeVector):
                return v.to_json()
            if isinstance(v, (list, tuple)):
                return [enc(x) for x in v]
            if v == INF:
                return "inf"
            return v
        return {"tag": self.tag, "g": self.g, "params": {k: enc(v) for k, v in sorted(self.params.items())}}

    @classmethod
    def from_json(cls, payload: dict) -> "ComplexSpec":
        def dec(v):
            if isinstance(v, dict) and "coords" in v:
                return LatticeVector.from_json(v)
            if isinstance(v, list):
                return [dec(x) for x in v]
            if v == "inf":
                return INF
            return v
        return cls(payload["tag"], int(payload["g"]), {k: dec(v) for k, v in payload.get("params", {}).items()})


def _lattice_reason(s: Sequence[LatticeVector], G: int) -> str | None:
    for idx, v in enumerate(s):
        if len(v) != 2 * G:
            return f"vertex {idx} lives in genus {len(v) // 2}, expected {G}"
        if not any(v):
            return f"vertex {idx} is zero"
    pair = first_non_isotropic_pair(s)
    if pair is not None:
        return f"not isotropic at pair ({pair[0]},{pair[1]})"
    d = gcd_tuple(s)
    if d != 1:
        return f"gcd = {d}"
    return None


def _a1_reason(s) -> str | None:
    for idx, v in enumerate(s):
        r = rank_a(v, 1)
        if r != 1:
            return f"a1-rank of vertex {idx} is {r}"
    return None


def _order_reason(s) -> str | None:
    for idx in range(len(s) - 1):
        if not tuple(s[idx]) < tuple(s[idx + 1]):
            return f"vertices not in ascending order at position {idx}"
    return None


def _saturated(vectors, G) -> list:
    vectors = [v for v in vectors if any(v)]
    return saturate_rows(vectors, 2 * G) if vectors else []


def is_simplex(spec: ComplexSpec, s: Sequence[Sequence[int]]) -> Verdict:
    s = [LatticeVector(v) for v in s]
    G = spec.g
    tag, p = spec.tag, spec.params
    if tag == "conn":
        return _conn_simplex(spec, s)
    reason = _lattice_reason(s, G)
    if reason:
        return Verdict(False, reason)
    if tag == "L":
        return Verdict(True)
    i = p.get("i", 2 if tag != "L_ordered" and tag != "F" else None)
    if tag in ("L_ordered", "F"):
        i = p["i"]
    if i == 2:
        reason = _a1_reason(s)
        if reason:
            return Verdict(False, reason)
    if tag == "L_a1":
        return Verdict(True)
    if tag in ("L_ordered", "F"):
        if p.get("ordered", True):
            reason = _order_reason(s)
            if reason:
                return Verdict(False, reason)
        if tag == "F":
            lvl = filtration_level(s, i)
            if lvl < p["k"]:
                return Verdict(False, f"filtration level {level_str(lvl)} below {level_str(p['k'])}")
        return Verdict(True)
    # link-type complexes inside the i=2 complex
    if tag in ("good_gcd", "b1_rank", "N", "M"):
        if tag == "M":
            delta = list(p["delta1"]) + list(p["delta2"]) + list(p["delta3"])
        else:
            delta = list(p["delta"])
        delta = [LatticeVector(v) for v in delta]
        overlap = [idx for idx, v in enumerate(s) if v in delta]
        if overlap:
            return Verdict(False, f"vertex {overlap[0]} already belongs to the base simplex")
        joined = _lattice_reason(delta + s, G) or _a1_reason(delta + s)
        if joined:
            return Verdict(False, f"join with the base simplex fails: {joined}")
        sat = _saturated([pr2(v) for v in delta], G)
        d = gcd_tuple([pr2(v) for v in s] + sat)
        if d != 1:
            return Verdict(False, f"gcd2 with S(delta) is {d}")
        if tag == "good_gcd":
            return Verdict(True)
        t = p["t"]
        for idx, v in enumerate(s):
            if rank_b(v, 1) != t:
                return Verdict(False, f"b1-rank of vertex {idx} is {rank_b(v, 1)}, expected {t}")
        if tag == "b1_rank":
            return Verdict(True)
        if tag == "N":
            extra = list(p["d"])
            orth = list(p["d"])
        else:
            extra = list(p["d1"]) + list(p["d2"])
            orth = list(p["d1"])
        sat = _saturated([pr2(v) for v in delta] + [pr2(v) for v in extra], G)
        d = gcd_tuple([pr2(v) for v in s] + sat)
        if d != 1:
            return Verdict(False, f"condition (a): gcd2 with S(delta, D) is {d}")
        for idx, v in enumerate(s):
            for u in orth:
                if form(v, u):
                    return Verdict(False, f"condition (b): vertex {idx} is not orthogonal to D(delta1)")
        return Verdict(True)
    raise ValueError(f"unsupported tag {tag}")


def _conn_simplex(spec: ComplexSpec, s: list[LatticeVector]) -> Verdict:
    """Simplices v in F_{k+1} with vertices orthogonal to the z's and {x} * v in F_k."""
    p = spec.params
    i, x, k = p["i"], LatticeVector(p["x"]), p["k"]
    zs = [LatticeVector(z) for z in p["z"]]
    for idx, v in enumerate(s):
        for z in zs:
            if form(v, z):
                return Verdict(False, f"vertex {idx} is not orthogonal to the constraint {format_vector(z)}")
    if x in s:
        return Verdict(False, "contains x")
    reason = _lattice_reason(s, spec.g) or (_a1_reason(s) if i == 2 else None)
    if reason:
        return Verdict(False, reason)
    upper = INF if k == 5 else k + 1
    lvl = filtration_level(s, i) if s else INF
    if lvl < upper:
        return Verdict(False, f"filtration level {level_str(lvl)} below {level_str(upper)}")
    joined = [x] + s
    reason = _lattice_reason(joined, spec.g) or (_a1_reason(joined) if i == 2 else None)
    if reason:
        return Verdict(False, f"join with x fails: {reason}")
    lvl = filtration_level(joined, i)
    if lvl < k:
        return Verdict(False, f"join with x has level {level_str(lvl)} below {level_str(k)}")
    if i == 2 and k == 0 and p.get("same_b1", True):
        for idx, v in enumerate(s):
            if rank_b(v, 1) != rank_b(x, 1):
                return Verdict(False, f"b1-rank of vertex {idx} differs from x")
    return Verdict(True)


def join(v: Sequence, w: Sequence) -> tuple:
    """Join: vertices of ``v`` followed by those of ``w`` not already present."""
    v = [LatticeVector(x) for x in v]
    out = list(v)
    for x in w:
        x = LatticeVector(x)
        if x not in out:
            out.append(x)
    return tuple(out)


# ---------------------------------------------------------------------------
# Finite complexes and enumeration
# ---------------------------------------------------------------------------

@dataclass
class FiniteComplex:
    """Face-closed family of ascending index tuples over an ordered vertex list."""

    g: int
    i: int
    box: int
    vertices: list[LatticeVector]
    simplices: list[tuple[int, ...]]
    partial: bool = False
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.simplices = sorted(set(tuple(s) for s in self.simplices), key=lambda s: (len(s), s))
        self._index = {tuple(v): n for n, v in enumerate(self.vertices)}
        self._set = set(self.simplices)

    @property
    def ambient_genus(self) -> int:
        return ambient_genus(self.g, self.i)

    def index(self, v: Sequence[int]) -> int:
        return self._index[tuple(v)]

    def has_vertex(self, v: Sequence[int]) -> bool:
        return tuple(v) in self._index

    def has_simplex(self, idx: Sequence[int]) -> bool:
        return tuple(sorted(idx)) in self._set or len(idx) == 0

    def contains(self, vectors: Sequence[Sequence[int]]) -> bool:
        try:
            idx = tuple(sorted(self.index(v) for v in vectors))
        except KeyError:
            return False
        return self.has_simplex(idx)

    def of_dim(self, d: int) -> list[tuple[int, ...]]:
        if d == -1:
            return [()]
        return [s for s in self.simplices if len(s) == d + 1]

    def realize(self, idx: Sequence[int]) -> tuple[LatticeVector, ...]:
        return tuple(self.vertices[n] for n in idx)

    def missing_faces(self) -> list[tuple[int, ...]]:
        out = []
        for s in self.simplices:
            for r in range(1, len(s)):
                for f in itertools.combinations(s, r):
                    if f not in self._set:
                        out.append(f)
        return sorted(set(out))

    def is_closed(self) -> bool:
        return not self.missing_faces()

    def to_json(self) -> dict:
        return {
            "g": self.g, "i": self.i, "box": self.box, "partial": self.partial,
            "vertices": [[str(c) for c in v] for v in self.vertices],
            "simplices": [list(s) for s in self.simplices],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "FiniteComplex":
        return cls(int(payload["g"]), int(payload["i"]), int(payload.get("box", 0)),
                   [LatticeVector(int(c) for c in v) for v in payload["vertices"]],
                   [tuple(int(x) for x in s) for s in payload["simplices"]],
                   bool(payload.get("partial", False)))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()


def _shell(n: int, total: int, bound: int) -> Iterable[tuple[int, ...]]:
    """Integer vectors of length n with L1 norm ``total`` and entries in [-bound, bound], lex order."""
    if n == 0:
        if total == 0:
            yield ()
        return
    for x in range(-min(bound, total), min(bound, total) + 1):
        for rest in _shell(n - 1, total - abs(x), bound):
            yield (x,) + rest


def box_vertices(g: int, i: int, box: int, max_vertices: int | None = None) -> tuple[list[LatticeVector], bool]:
    """Vertices of the i-th complex in the coordinate box, chosen by (L1 norm, lex), returned lex-sorted."""
    G = ambient_genus(g, i)
    free = 2 * G - (1 if i == 2 else 0)
    chosen: list[LatticeVector] = []
    truncated = False
    if box < 1:
        return [], False
    for total in range(0, free * box + 1):
        for tail in _shell(free, total, box):
            if i == 1:
                if total == 0 or coordinate_gcd(tail) != 1:
                    continue
                v = LatticeVector(tail)
            else:
                v = LatticeVector((1,) + tail)
            chosen.append(v)
            if max_vertices is not None and len(chosen) >= max_vertices:
                truncated = True
                break
        if truncated:
            break
    return sorted(chosen), truncated


def _complement_transform(rows: list[list[int]]) -> list[list[int]]:
    """Unimodular U with rows @ U = [I | 0] (rows must be a primitive system)."""
    n = len(rows[0])
    at = [[rows[r][c] for r in range(len(rows))] for c in range(n)]
    _, u = hnf(at)
    ut = u.T.tolist()
    return ut


def extends_primitively(U: list[list[int]], n: int, v: Sequence[int]) -> bool:
    coords = [sum(v[r] * U[r][c] for r in range(len(v))) for c in range(len(v))]
    return coordinate_gcd(coords[n:]) == 1


def enumerate_truncation(g: int, i: int, box: int, max_dim: int, max_vertices: int | None = None,
                         max_simplices: int | None = None, vertices: Sequence[Sequence[int]] | None = None) -> FiniteComplex:
    """All simplices of the ordered i-th complex on the box vertices, up to ``max_dim``.

    With ``vertices`` given, the full subcomplex on exactly those vertices is built instead.
    Hitting a cap yields a complex flagged ``partial`` (still face-closed).
    """
    notes = []
    if vertices is None:
        verts, truncated = box_vertices(g, i, box, max_vertices)
        if truncated:
            notes.append(f"vertex cap {max_vertices} reached")
    else:
        verts, truncated = sorted(LatticeVector(v) for v in set(tuple(v) for v in vertices)), False
    n = len(verts)
    adj = [set() for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            if form(verts[a], verts[b]) == 0 and gcd_tuple([verts[a], verts[b]]) == 1:
                adj[a].add(b)
    simplices: list[tuple[int, ...]] = [(a,) for a in range(n)]
    partial = truncated
    count = n
    if max_simplices is not None and count > max_simplices:
        simplices = simplices[:max_simplices]
        partial = True
        notes.append(f"simplex cap {max_simplices} reached")
        return FiniteComplex(g, i, box, verts, simplices, partial, notes)

    def grow(sigma: tuple[int, ...], cands: list[int], U):
        nonlocal count, partial
        if len(sigma) - 1 >= max_dim:
            return True
        for c in cands:
            if not extends_primitively(U, len(sigma), verts[c]):
                continue
            tau = sigma + (c,)
            if max_simplices is not None and count >= max_simplices:
                partial = True
                return False
            simplices.append(tau)
            count += 1
            nxt = [d for d in cands if d > c and d in adj[c]]
            if len(tau) - 1 < max_dim and nxt:
                U2 = _complement_transform([list(verts[x]) for x in tau])
                if not grow(tau, nxt, U2):
                    return False
        return True

    if max_dim >= 1:
        for a in range(n):
            U = _complement_transform([list(verts[a])])
            if not grow((a,), sorted(adj[a]), U):
                notes.append(f"simplex cap {max_simplices} reached")
                break
    return FiniteComplex(g, i, box, verts, simplices, partial, notes)


def link_of(spec: ComplexSpec, v: Sequence[Sequence[int]], pool: FiniteComplex) -> list[tuple[LatticeVector, ...]]:
    """Simplices of ``pool`` whose join with ``v`` is a simplex of ``spec``."""
    v = [LatticeVector(x) for x in v]
    verdict = is_simplex(spec, v) if v else Verdict(True)
    if not verdict:
        raise PreconditionError(f"base simplex is not valid: {verdict.reason}")
    out = []
    for s in pool.simplices:
        w = pool.realize(s)
        if any(x in v for x in w):
            continue
        if not v or is_simplex(spec, list(v) + list(w)):
            out.append(w)
    return out


# ---------------------------------------------------------------------------
# Degenerate relation, regular-bad predicates
# ---------------------------------------------------------------------------

def degenerate_relation(delta: Sequence[Sequence[int]]) -> tuple[list[int], int, int]:
    """Integer coefficients c with sum c_i v_i = s a1 + t b1, normalized to s = 1."""
    delta = [LatticeVector(v) for v in delta]
    if not delta:
        raise PreconditionError("empty simplex")
    if gcd2(delta) != 0:
        raise PreconditionError(f"gcd2 is {gcd2(delta)}, expected 0")
    rows = [[pr2(v)[r] for v in delta] for r in range(len(delta[0]))]
    kernel = integer_kernel(rows, len(delta))
    sums = [sum(c * rank_a(v, 1) for c, v in zip(vec, delta)) for vec in kernel]
    coeffs = [0] * len(delta)
    total = 0
    for vec, s in zip(kernel, sums):
        if s == 0:
            continue
        if total == 0:
            coeffs, total = list(vec), s
            continue
        g, x, y = xgcd(total, s)
        coeffs = [x * a + y * b for a, b in zip(coeffs, vec)]
        total = g
    if total < 0:
        coeffs, total = [-c for c in coeffs], -total
    if total != 1:
        raise ConstructionError("degenerate-relation", f"relation only reaches s = {total}")
    rel = combine(coeffs, delta)
    t = rank_b(rel, 1)
    if rel != basis_vector(rel.genus, "a", 1) + t * basis_vector(rel.genus, "b", 1):
        raise ConstructionError("degenerate-relation", "relation does not land in span(a1, b1)")
    return coeffs, 1, t


def regular_bad(images: Sequence[Sequence[int]], mode: str, **params) -> bool:
    """Evaluate the mode-specific "regular bad" condition on the image vertices of a simplex."""
    imgs = [LatticeVector(v) for v in images]
    G = imgs[0].genus if imgs else None

    def need(*names):
        missing = [n for n in names if n not in params]
        if missing:
            raise ValueError(f"mode {mode!r} needs parameters {missing}")

    if mode == "rank":
        need("y", "R")
        return all(abs(form(v, params["y"])) == params["R"] for v in imgs)
    if mode == "b1":
        need("t")
        return all(rank_b(v, 1) != params["t"] for v in imgs)
    if mode == "gcd2_rel":
        return all(gcd_tuple([pr2(v)] + _saturated([pr2(w) for w in imgs if w != v], G)) > 1 for v in imgs)
    if mode == "gcd2_zero":
        if gcd2(imgs) != 0:
            return False
        return all(gcd2(list(f)) != 0 for r in range(1, len(imgs)) for f in itertools.combinations(imgs, r))
    if mode == "regbad":
        need("extra")
        extra = [LatticeVector(e) for e in params["extra"]]
        return all(
            gcd_tuple([pr2(v)] + _saturated([pr2(w) for w in imgs if w != v] + [pr2(e) for e in extra], G)) != 1
            for v in imgs)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# Assigning w*
# ---------------------------------------------------------------------------

def wstar_size(g: int, i: int, s: int) -> int:
    return g - 3 + i - s


def _compensating(delta: list[LatticeVector], t: int, sd: SplittingData) -> LatticeVector:
    G = delta[0].genus
    base = basis_vector(G, "a", 1) + t * basis_vector(G, "b", 1)
    if not sd.d_basis:
        if any(form(base, v) for v in delta):
            raise ConstructionError("wstar-compensate", "a1 + t b1 is not orthogonal and D is zero")
        return LatticeVector([0] * (2 * G))
    from .linalg import NoSolution, solve_exact
    rows = [[form(d, v) for d in sd.d_basis] for v in delta]
    rhs = [-form(base, v) for v in delta]
    try:
        y = solve_exact(rows, rhs)
    except NoSolution:
        raise ConstructionError("wstar-compensate", "no compensating vector in D") from None
    if any(getattr(c, "denominator", 1) != 1 for c in y):
        raise ConstructionError("wstar-compensate", f"non-integral compensation {y}")
    return combine([int(c) for c in y], sd.d_basis)


def assign_wstar(w: Sequence[Sequence[int]], i: int, k, g: int, size: int | None = None) -> tuple[LatticeVector, ...]:
    """Deterministic w* for a simplex ``w`` of level exactly ``k`` (genus ``g`` of the complex)."""
    w = [LatticeVector(v) for v in w]
    G = ambient_genus(g, i)
    lvl = filtration_level(w, i) if w else INF
    if w and lvl != k:
        raise PreconditionError(f"simplex has filtration level {level_str(lvl)}, not {level_str(k)}")
    if k == INF:
        raise PreconditionError("w* is not defined on the top filtration stage")
    if w and w[0].genus != G:
        raise PreconditionError(f"vertices must live in genus {G}")
    s = len(w) - 1
    n = wstar_size(g, i, s) if size is None else size
    A = distinguished(i, G)
    fixed = [A[j] for j in range(max(k - 1, 0))][:n]
    if len(fixed) == n:
        return tuple(fixed)
    m = max(k + 1, 2)
    if m > G:
        raise PreconditionError(f"H_{m} is zero in genus {G}")
    hm = h_k_basis(G, m)
    proj = [pr_h(v, m) for v in w]
    sat = [LatticeVector(x) for x in _saturated(proj, G)]
    if 2 * len(sat) > len(hm):
        raise ConstructionError("wstar-dimension", f"S(pr_{m} w) has rank {len(sat)} in H_{m} of rank {len(hm)}")
    if sat:
        sd = dual_summand(sat, lattice=hm)
    else:
        sd = complement_splitting([], [], hm)
    tvecs = [p for p, _ in sd.t_pairs]
    need = n - len(fixed)
    if need > len(tvecs):
        raise ConstructionError("wstar-dimension", f"T has only {len(tvecs)} isotropic directions, need {need}")
    tvecs = tvecs[:need]
    if i == 1:
        extra = tvecs
    elif k >= 2:
        extra = [A[0] + t for t in tvecs]
    else:
        if w and gcd2(w) == 1:
            t = 0
        else:
            t = rank_b(w[0], 1) if w else 0
        if m != 2:
            raise ConstructionError("wstar-compensate", "compensation expects m = 2")
        u = _compensating(w, t, sd) if w else LatticeVector([0] * (2 * G))
        base = A[0] + t * basis_vector(G, "b", 1) + u
        extra = [base + tv for tv in tvecs]
    return tuple(fixed + extra)


def wstar_violations(w: Sequence[Sequence[int]], wstar: Sequence[Sequence[int]], i: int, k, g: int) -> list[str]:
    """Check conditions (i)-(iv) for an assigned w*; an empty list means all hold."""
    w = [LatticeVector(v) for v in w]
    ws = [LatticeVector(v) for v in wstar]
    G = ambient_genus(g, i)
    problems = []
    if len(ws) != wstar_size(g, i, len(w) - 1):
        problems.append(f"w* has {len(ws)} vertices, expected {wstar_size(g, i, len(w) - 1)}")
    joined = list(join(w, ws))
    reason = _lattice_reason(joined, G) or (_a1_reason(joined) if i == 2 else None)
    if reason:
        problems.append(f"(i) join is not a simplex: {reason}")
    elif filtration_level(joined, i) < k:
        problems.append(f"(i) join has level {level_str(filtration_level(joined, i))} < {level_str(k)}")
    upper = INF if k == 5 else k + 1
    # at the top stage the extra vertices come from H_6 and only reach level 5
    lvl_star = filtration_level(ws, i)
    if k == 5:
        A = distinguished(i, G)
        extras = [v for v in ws if v not in A]
        if any(vertex_level(v, i) < 5 for v in extras) or (extras and filtration_level(extras, i) < 5):
            problems.append("(w*) extra vertices leave F_5")
    elif lvl_star < upper:
        problems.append(f"(w*) w* has level {level_str(lvl_star)} < {level_str(upper)}")
    A = distinguished(i, G)
    for j in range(1, min(k, 5)):
        if j - 1 < len(ws) and ws[j - 1] != A[j - 1]:
            problems.append(f"(ii) w_{j} is not A_{j}")
    if not reason:
        for r in range(0, len(w) + 1):
            for face in itertools.combinations(w, r):
                if filtration_level(list(face), i) >= upper:
                    jn = list(join(face, ws))
                    lvl = filtration_level(jn, i) if not _lattice_reason(jn, G) else -1
                    target = upper if k != 5 else 5
                    if lvl < target:
                        problems.append(f"(iii) face {[format_vector(v) for v in face]} joined with w* leaves F_{level_str(upper)}")
    if i == 2 and k == 0 and w:
        r0 = rank_b(w[0], 1)
        for j, v in enumerate(ws):
            if rank_b(v, 1) != r0:
                problems.append(f"(iv) b1-rank of w_{j + 1} is {rank_b(v, 1)}, expected {r0}")
    return problems


# ---------------------------------------------------------------------------
# Connecting paths
# ---------------------------------------------------------------------------

def conn_spec(i: int, G: int, x, zs, k, same_b1: bool = True) -> ComplexSpec:
    return ComplexSpec("conn", G, {"i": i, "x": LatticeVector(x), "z": [LatticeVector(z) for z in zs],
                                   "k": k, "same_b1": same_b1})


def _path_ok(spec: ComplexSpec, path: list[LatticeVector]) -> str | None:
    for v in path:
        verdict = is_simplex(spec, [v])
        if not verdict:
            return f"vertex {format_vector(v)}: {verdict.reason}"
    for a, b in zip(path, path[1:]):
        if a == b:
            continue
        verdict = is_simplex(spec, sorted([a, b]))
        if not verdict:
            return f"edge {format_vector(a)} -> {format_vector(b)}: {verdict.reason}"
    return None


def _simple_candidates(vectors: Sequence[LatticeVector]) -> list[LatticeVector]:
    out = []
    for v in vectors:
        if any(v) and coordinate_gcd(v) == 1 and v not in out:
            out.append(v)
    for a, b in itertools.combinations(vectors, 2):
        for c in (a + b, a - b):
            if any(c) and coordinate_gcd(c) == 1 and c not in out:
                out.append(c)
    return out


def _dual_middle(x, zs, k, v1, v2, G) -> list[LatticeVector]:
    """Candidate middle vertices from the successive dual-summand construction in H_{k+1}."""
    m = k + 1
    hm = h_k_basis(G, m)
    if not hm:
        return []
    s1 = _saturated([pr_h(v, m) for v in (v1, v2, x)], G)
    sd1 = dual_summand(s1, lattice=hm) if s1 else complement_splitting([], [], hm)
    t1 = flatten_pairs(sd1.t_pairs)
    proj = [project_onto(pr_h(z, m), sd1.t_pairs) for z in zs]
    s21 = _saturated(proj, G)
    cands: list[LatticeVector] = []
    if not s21:
        cands += [p for p, _ in sd1.t_pairs]
    else:
        sd2 = dual_summand(s21, lattice=t1)
        cands += [p for p, _ in sd2.t_pairs]
        # modify vectors of S21 + D2 to be orthogonal to the constraints
        span = list(sd2.s_basis) + list(sd2.d_basis)
        rows = [[form(b, z) for b in span] for z in zs]
        for vec in integer_kernel(rows, len(span)) if rows else [[int(a == b) for b in range(len(span))] for a in range(len(span))]:
            cands.append(combine(vec, span))
    return _simple_candidates(cands)


def connect_path(x, zs: Sequence, k, v1, v2, i: int = 1, variant: str | None = None,
                 g: int | None = None) -> list[LatticeVector]:
    """A path from v1 to v2 in the constrained link complex of x (vertices orthogonal to ``zs``).

    ``variant`` is ``"plain"`` for i=1 and ``"a1"`` for i=2 (chosen from ``i`` by default).
    Every returned vertex and edge is revalidated; failures raise ConstructionError
    naming the stage.
    """
    x, v1, v2 = LatticeVector(x), LatticeVector(v1), LatticeVector(v2)
    zs = [LatticeVector(z) for z in zs]
    G = x.genus
    variant = variant or ("plain" if i == 1 else "a1")
    spec = conn_spec(i, G, x, zs, k)
    for v in (v1, v2):
        verdict = is_simplex(spec, [v])
        if not verdict:
            raise PreconditionError(f"endpoint {format_vector(v)} is not in the complex: {verdict.reason}")
    if v1 == v2:
        return [v1]
    if is_simplex(spec, sorted([v1, v2])):
        return [v1, v2]
    stages = []

    def attempt(stage: str, mids: Iterable[LatticeVector]):
        for w in mids:
            if w in (v1, v2):
                continue
            path = [v1, w, v2]
            if _path_ok(spec, path) is None:
                if variant == "a1" and k == 1 and gcd2([x, v1, v2, w]) <= 0:
                    continue
                return path
        stages.append(stage)
        return None

    if variant == "plain":
        A = distinguished(1, G)
        path = attempt("a_j", [A[j - 1] for j in range(1, min(k, 5)) if all(form(A[j - 1], z) == 0 for z in zs)])
        if path:
            return path
        path = attempt("duals", _dual_middle(x, zs, k, v1, v2, G))
        if path:
            return path
        path = _search_path(spec, x, v1, v2, k, 1, G)
        if path:
            return path
        raise ConstructionError("connect-" + "/".join(stages + ["search"]), "no connecting path found")
    if variant == "a1":
        a1 = basis_vector(G, "a", 1)
        b1 = basis_vector(G, "b", 1)
        if k >= 2:
            path = attempt("a1", [a1])
            if path:
                return path
            # work in pr2(H) identified with H(G-1)
            red = lambda v: LatticeVector(tuple(v)[2:])
            lift = lambda v: a1 + LatticeVector((0, 0) + tuple(v))
            try:
                sub = connect_path(red(x - a1), [red(z) for z in zs], k - 1, red(v1 - a1), red(v2 - a1), 1, "plain")
            except (ConstructionError, PreconditionError) as exc:
                raise ConstructionError("connect-reduced", f"reduced path failed: {exc}") from None
            path = [lift(v) for v in sub]
            bad = _path_ok(spec, path)
            if bad:
                raise ConstructionError("connect-reduced", bad)
            return path
        if k == 1:
            if gcd2([x, v1, v2]) <= 0:
                raise PreconditionError("gcd2(x, v1, v2) must be positive")
            s_rest = _saturated([pr2(v) for v in (v1, v2)] + [pr2(z) for z in zs], G)
            if gcd_tuple([pr2(x)] + s_rest) != 1:
                raise PreconditionError("gcd2(x, S(v1, v2, z)) must be 1")
            sd0 = dual_summand([pr2(x)] + [LatticeVector(r) for r in s_rest], lattice=h2_lattice(G))
            u = sd0.d_basis[0]
            mids = []
            t0 = sd0.t_pairs
            for w2 in _simple_candidates([p for p, _ in t0] + [q for _, q in t0]):
                c = rank_b(x, 1)
                mids.append(a1 + c * u + w2)
            path = attempt("level1-duals", mids)
            if path:
                return path
            raise ConstructionError("connect-level1", "no middle vertex from the dual chain")
        if k == 0:
            r = rank_b(x, 1)
            for v in (v1, v2):
                if rank_b(v, 1) != r:
                    raise PreconditionError("endpoint b1-rank differs from x")
            mids = []
            for w2 in _dual_middle(x, zs, 1, pr2(v1), pr2(v2), G):
                mids.append(a1 + r * b1 + w2)
            path = attempt("level0-duals", mids)
            if path:
                return path
            path = _search_path(spec, x, v1, v2, k, 2, G)
            if path:
                return path
            raise ConstructionError("connect-level0", "no middle vertex")
    raise ValueError(f"unknown variant {variant!r}")


def _search_path(spec: ComplexSpec, x, v1, v2, k, i, G, box: int = 1, limit: int = 4000) -> list[LatticeVector] | None:
    """Breadth-first search over small-coordinate vertices; last-resort path finder."""
    from collections import deque
    g = G - i + 1
    pool, _ = box_vertices(g, i, box, max_vertices=limit)
    pool = [v for v in pool if is_simplex(spec, [v])]
    for v in (v1, v2):
        if v not in pool:
            pool.append(v)
    prev = {v1: None}
    queue = deque([v1])
    while queue:
        a = queue.popleft()
        if a == v2:
            break
        for b in pool:
            if b not in prev and is_simplex(spec, sorted([a, b])):
                prev[b] = a
                queue.append(b)
    if v2 not in prev:
        return None
    path = [v2]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


# ---------------------------------------------------------------------------
# Simplicial maps and link moves
# ---------------------------------------------------------------------------

class LinkMoveError(ValueError):
    pass


def close_faces(facets: Iterable[Iterable]) -> set[frozenset]:
    out: set[frozenset] = set()
    for f in facets:
        f = tuple(f)
        for r in range(1, len(f) + 1):
            for c in itertools.combinations(f, r):
                out.add(frozenset(c))
    return out


def boundary_of(simplices: set[frozenset]) -> set[frozenset]:
    """Boundary of a pure pseudomanifold with boundary: codim-1 faces in exactly one facet."""
    if not simplices:
        return set()
    top = max(len(s) for s in simplices)
    facets = [s for s in simplices if len(s) == top]
    count: dict[frozenset, int] = {}
    for f in facets:
        for v in f:
            face = f - {v}
            if face:
                count[face] = count.get(face, 0) + 1
    return close_faces(face for face, c in count.items() if c == 1)


def link_in(simplices: set[frozenset], sigma: frozenset) -> set[frozenset]:
    return {t - sigma for t in simplices if sigma <= t and t != sigma}


@dataclass
class SimplicialMapRecord:
    source: set[frozenset]
    target: ComplexSpec
    assignment: dict
    order: list

    def image(self, simplex: Iterable) -> tuple[LatticeVector, ...]:
        labels = sorted(simplex, key=self.order.index)
        out = []
        for l in labels:
            v = LatticeVector(self.assignment[l])
            if v not in out:
                out.append(v)
        return tuple(out)

    def invalid_images(self) -> list[tuple[frozenset, str]]:
        bad = []
        for s in sorted(self.source, key=lambda s: (len(s), sorted(map(str, s)))):
            verdict = is_simplex(self.target, list(self.image(s)))
            if not verdict:
                bad.append((s, verdict.reason))
        return bad


def _is_closed_pseudomanifold(simplices: set[frozenset]) -> bool:
    if not simplices:
        return True
    top = max(len(s) for s in simplices)
    count: dict[frozenset, int] = {}
    for f in simplices:
        if len(f) == top:
            for v in f:
                face = f - {v}
                if face:
                    count[face] = count.get(face, 0) + 1
    ridges = [s for s in simplices if len(s) == top - 1]
    if top == 1:
        return True
    return all(count.get(r, 0) == 2 for r in ridges)


def link_move(fmap: SimplicialMapRecord, sigma: Iterable, ball: set[frozenset], phi: dict) -> SimplicialMapRecord:
    """Replace the star of ``sigma`` by ``ball * boundary(sigma)`` and remap the ball by ``phi``."""
    sigma = frozenset(sigma)
    S = fmap.source
    if sigma not in S:
        raise LinkMoveError("sigma is not a simplex of the source")
    lk = link_in(S, sigma)
    ball = close_faces(ball)
    bd = boundary_of(ball)
    if bd != lk:
        raise LinkMoveError("boundary of the ball does not match the link of sigma")
    bd_vertices = {v for s in bd for v in s}
    for v in bd_vertices:
        if v not in phi or LatticeVector(phi[v]) != LatticeVector(fmap.assignment[v]):
            raise LinkMoveError(f"phi disagrees with the map on boundary vertex {v!r}")
    old_labels = {v for s in S for v in s}
    interior = sorted({v for s in ball for v in s} - bd_vertices, key=str)
    clash = [v for v in interior if v in old_labels]
    if clash:
        raise LinkMoveError(f"ball interior labels {clash} clash with the source")
    star = {t for t in S if sigma <= t}
    kept = S - star
    dsig = [frozenset(c) for r in range(0, len(sigma)) for c in itertools.combinations(sorted(sigma, key=str), r)]
    new = set(kept)
    for t1 in dsig:
        for t2 in ball | {frozenset()}:
            u = t1 | t2
            if u:
                new.add(u)
    new = close_faces(new)
    if not _is_closed_pseudomanifold(new):
        raise LinkMoveError("gluing does not produce a closed pseudomanifold")
    assignment = {l: v for l, v in fmap.assignment.items() if any(l in s for s in new)}
    for v in interior:
        assignment[v] = LatticeVector(phi[v])
    order = interior + [l for l in fmap.order if l in assignment and l not in interior]
    out = SimplicialMapRecord(new, fmap.target, assignment, order)
    return out

"""E¹ chain complexes with Λ³ coefficients over finite truncations, and the
Morse vector field on their degrees 0 to 2.

Degree p is the direct sum over (p-1)-simplices w (the empty simplex at p=0)
of Λ³⟨w, b⟩^⊥.  Basis vectors of a block are ambient rows of Λ³Q^{2G}; since
every inclusion of complements is the identity on ambient rows, a field pair
(z, c(z)) just stores z once in its source block and once, signed, in the
target block.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterable, Mapping, Sequence

import flint
import numpy as np

from .complexes import (
    FiniteComplex,
    ambient_genus,
    assign_wstar,
    b_vector,
    distinguished,
    filtration_level,
    seed_duals,
    vertex_level,
    wstar_size,
)
from .exterior import (
    ContainmentError,
    SubspaceBasis,
    Wedge3Element,
    decompose,
    decompose_rest,
    exterior3,
    orth_complement,
    rank_of,
    rewrite_matrix,
    solve_duals,
    triples,
    wedge_summand,
)
from .linalg import IntMatrix, NoSolution, solve_exact
from .morse import BasedChainComplex, Matching, exactness_at, gradient_cycles, validate_matching
from .symplectic import (
    ConstructionError,
    LatticeVector,
    PreconditionError,
    apply,
    basis_vector,
    form_row,
    format_vector,
    is_symplectic,
)

Simplex = tuple[int, ...]
Row = tuple[int, ...]

RESOURCE_ENV = "SPMORSE_MAX_CELLS"
DEFAULT_MAX_CELLS = 20000


def max_cells() -> int:
    """Cell budget for assembling explicit chain complexes (overridable from the environment)."""
    return int(os.environ.get(RESOURCE_ENV, DEFAULT_MAX_CELLS))


@dataclass(frozen=True)
class E1Config:
    g: int
    i: int
    distinguished_size: int = 6
    cap_steps: int = 64

    def __post_init__(self):
        if self.i not in (1, 2):
            raise PreconditionError("component index must be 1 or 2")
        if self.g < 1:
            raise PreconditionError("genus must be positive")
        if self.distinguished_size < 4:
            raise PreconditionError("at least four distinguished vertices are needed")
        if self.cap_steps < 1:
            raise PreconditionError("step cap must be positive")

    @property
    def G(self) -> int:
        return ambient_genus(self.g, self.i)

    @property
    def b(self) -> list[LatticeVector]:
        return b_vector(self.i, self.G)

    def carrier(self, vectors: Sequence[Sequence[int]]) -> SubspaceBasis:
        return orth_complement([tuple(v) for v in vectors] + [tuple(v) for v in self.b], self.G)

    def to_json(self) -> dict:
        return {"g": self.g, "i": self.i, "distinguished_size": self.distinguished_size,
                "cap_steps": self.cap_steps}

    @classmethod
    def from_json(cls, payload: Mapping) -> "E1Config":
        return cls(int(payload["g"]), int(payload["i"]), int(payload.get("distinguished_size", 6)),
                   int(payload.get("cap_steps", 64)))


def _row(r) -> Row:
    return tuple(int(x) for x in r)


def _sorted_union(s: Simplex, v: int) -> tuple[Simplex, int]:
    t = tuple(sorted(s + (v,)))
    return t, t.index(v)


def faces(s: Simplex) -> list[Simplex]:
    """Faces d_j s (drop position j), in order of j."""
    return [s[:j] + s[j + 1:] for j in range(len(s))]


# ---------------------------------------------------------------------------
# The truncated E¹ complex in standard bases
# ---------------------------------------------------------------------------

@dataclass
class E1Truncation:
    cfg: E1Config
    complex: FiniteComplex
    blocks: dict[int, list[Simplex]]
    offsets: dict[Simplex, int]
    chain: BasedChainComplex

    def carrier(self, s: Simplex) -> SubspaceBasis:
        return self.cfg.carrier(self.complex.realize(s))

    def block_range(self, s: Simplex) -> range:
        n = comb(self.carrier(s).dim, 3)
        return range(self.offsets[s], self.offsets[s] + n)

    def element(self, degree: int, coords: Mapping[int, object]) -> dict[tuple, Wedge3Element]:
        """Split a chain (basis index -> coefficient) into truncation-free form."""
        out: dict[tuple, dict] = {}
        for idx, c in coords.items():
            if not c:
                continue
            trip, s = self.chain.labels[degree][idx]
            out.setdefault(s, {})[trip] = c
        return {self.complex.realize(s): Wedge3Element.from_map(self.carrier(s), m) for s, m in out.items()}

    def digest(self) -> str:
        body = json.dumps({"config": self.cfg.to_json(), "complex": self.complex.digest(),
                           "degrees": {str(p): len(v) for p, v in self.blocks.items()}}, sort_keys=True)
        return hashlib.sha256(body.encode()).hexdigest()

    def to_json(self) -> dict:
        return {"config": self.cfg.to_json(), "complex": self.complex.to_json(),
                "chain": self.chain.to_json(), "digest": self.digest()}


def _check_config(cfg: E1Config, complex: FiniteComplex) -> None:
    if (complex.g, complex.i) != (cfg.g, cfg.i):
        raise PreconditionError(f"truncation is for (g, i) = ({complex.g}, {complex.i}), config has ({cfg.g}, {cfg.i})")
    missing = complex.missing_faces()
    if missing:
        raise PreconditionError(f"truncation is not face-closed: {len(missing)} missing faces, first {list(missing[0])}")


def build_e1(cfg: E1Config, truncation: FiniteComplex, max_degree: int | None = None,
             verify: bool = True) -> E1Truncation:
    """Assemble the truncated E¹ complex in the standard triple bases of each block."""
    _check_config(cfg, truncation)
    top = max((len(s) for s in truncation.simplices), default=0)
    if max_degree is not None:
        top = min(top, max_degree)
    blocks = {p: truncation.of_dim(p - 1) for p in range(top + 1)}
    offsets: dict[Simplex, int] = {}
    labels: dict[int, list] = {}
    carriers: dict[Simplex, SubspaceBasis] = {}
    for p, ss in blocks.items():
        labels[p] = []
        for s in ss:
            carriers[s] = cfg.carrier(truncation.realize(s))
            offsets[s] = len(labels[p])
            labels[p] += [(t, s) for t in triples(carriers[s].dim)]
    d: dict[int, list[dict]] = {0: [{} for _ in labels[0]]}
    for p in range(1, top + 1):
        cols: list[dict] = []
        for s in blocks[p]:
            parts = []
            for j, f in enumerate(faces(s)):
                P = rewrite_matrix(carriers[s], carriers[f])
                parts.append((-1 if j % 2 else 1, offsets[f], P))
            for r in range(comb(carriers[s].dim, 3)):
                col: dict[int, int] = {}
                for sign, off, P in parts:
                    for c, v in enumerate(P[r]):
                        if v:
                            col[off + c] = col.get(off + c, 0) + sign * int(v)
                cols.append({k: v for k, v in col.items() if v})
        d[p] = cols
    chain = BasedChainComplex(labels, d)
    if verify:
        bad = chain.dd_violations()
        if bad:
            raise ConstructionError("e1-build", f"d∘d is nonzero at {bad[0]}")
    return E1Truncation(cfg, truncation, blocks, offsets, chain)


# ---------------------------------------------------------------------------
# Truncation-free elements, the differential and the symplectic action
# ---------------------------------------------------------------------------

E1Element = dict  # ordered simplex (tuple of LatticeVector) -> Wedge3Element


def _as_element(element) -> dict:
    if isinstance(element, dict):
        return element
    coeff, simplex = element
    return {tuple(LatticeVector(v) for v in simplex): coeff}


def differential(cfg: E1Config, element) -> dict:
    """d(v, w) = sum_j (-1)^j (v, d_j w); vertex order of each simplex is kept as given."""
    out: dict[tuple, Wedge3Element] = {}
    for s, coeff in _as_element(element).items():
        for j in range(len(s)):
            f = s[:j] + s[j + 1:]
            term = coeff.rewrite(cfg.carrier(f))
            if j % 2:
                term = -term
            out[f] = out[f] + term if f in out else term
    return {f: e for f, e in out.items() if not e.is_zero()}


def _check_action(cfg: E1Config, M: IntMatrix) -> None:
    if M.rows != 2 * cfg.G or M.cols != 2 * cfg.G:
        raise PreconditionError(f"matrix must be {2 * cfg.G} x {2 * cfg.G}")
    if not is_symplectic(M):
        raise PreconditionError("matrix does not preserve the symplectic form")
    for v in cfg.b:
        if apply(M, v) != v:
            raise PreconditionError("matrix does not fix b1")


def sp_act(cfg: E1Config, M: IntMatrix, element, check: bool = True) -> dict:
    """Act vertex-wise on simplices and through Λ³M on coefficients."""
    if check:
        _check_action(cfg, M)
    L = exterior3(M.T.tolist())
    out: dict[tuple, Wedge3Element] = {}
    for s, coeff in _as_element(element).items():
        image = tuple(apply(M, v) for v in s)
        amb = np.asarray(coeff.to_ambient(), dtype=object)
        new = amb.dot(L) if amb.size else amb
        term = Wedge3Element.from_ambient(cfg.carrier(image), list(new))
        out[image] = out[image] + term if image in out else term
    return {s: e for s, e in out.items() if not e.is_zero()}


def elements_equal(a: Mapping, b: Mapping) -> bool:
    keys = set(a) | set(b)
    for k in keys:
        x = [int(v) if not isinstance(v, Fraction) else v for v in a[k].to_ambient()] if k in a else None
        y = [int(v) if not isinstance(v, Fraction) else v for v in b[k].to_ambient()] if k in b else None
        if x is None:
            x = [0] * len(y)
        if y is None:
            y = [0] * len(x)
        if x != y:
            return False
    return True


# ---------------------------------------------------------------------------
# Field bookkeeping
# ---------------------------------------------------------------------------

@dataclass
class FieldPair:
    """A redundant vector z in ``source`` paired with c(z) = sign * z in ``target``."""

    degree: int
    source: Simplex
    target: Simplex
    row: Row
    sign: int
    rule: str
    stage: int | None = None


@dataclass
class Block:
    simplex: Simplex
    full_dim: int
    rows: list[Row] = field(default_factory=list)
    roles: list[tuple[str, int]] = field(default_factory=list)

    def redundant(self) -> list[int]:
        return [n for n, (role, _) in enumerate(self.roles) if role == "redundant"]


@dataclass
class SummandStatus:
    status: str  # certified | unconstructed | failed
    reason: str = ""
    stage: int | None = None
    rule: str = ""


@dataclass
class FieldConstruction:
    cfg: E1Config
    complex: FiniteComplex
    pairs: list[FieldPair] = field(default_factory=list)
    blocks: dict[Simplex, Block] = field(default_factory=dict)
    status: dict[Simplex, SummandStatus] = field(default_factory=dict)
    wstar: dict[Simplex, tuple[Simplex, tuple]] = field(default_factory=dict)
    duals: dict[Simplex, tuple] = field(default_factory=dict)
    _carriers: dict[Simplex, SubspaceBasis] = field(default_factory=dict, repr=False)

    def carrier(self, s: Simplex) -> SubspaceBasis:
        if s not in self._carriers:
            self._carriers[s] = self.cfg.carrier(self.complex.realize(s))
        return self._carriers[s]

    def block(self, s: Simplex) -> Block:
        if s not in self.blocks:
            self.blocks[s] = Block(s, comb(self.carrier(s).dim, 3))
        return self.blocks[s]

    def add_pairs(self, source: Simplex, vertex: int, rows: Iterable, rule: str, stage: int | None = None) -> int:
        target, pos = _sorted_union(source, vertex)
        sign = -1 if pos % 2 else 1
        src, tgt = self.block(source), self.block(target)
        count = 0
        for r in rows:
            r = _row(r)
            k = len(self.pairs)
            self.pairs.append(FieldPair(len(source), source, target, r, sign, rule, stage))
            src.rows.append(r)
            src.roles.append(("redundant", k))
            tgt.rows.append(tuple(sign * x for x in r))
            tgt.roles.append(("collapsible", k))
            count += 1
        return count

    def index_of(self, vectors: Sequence[Sequence[int]]) -> Simplex | None:
        try:
            s = tuple(sorted(self.complex.index(v) for v in vectors))
        except KeyError:
            return None
        return s if self.complex.has_simplex(s) else None

    def label(self, s: Simplex) -> list[str]:
        return [format_vector(v) for v in self.complex.realize(s)]

    def matching_summary(self) -> dict:
        by_degree: dict[int, int] = {}
        for p in self.pairs:
            by_degree[p.degree] = by_degree.get(p.degree, 0) + 1
        return {str(k): v for k, v in sorted(by_degree.items())}


def _vertex_level_of(field_: FieldConstruction, v: int) -> float:
    return vertex_level(field_.complex.vertices[v], field_.cfg.i)


def _a_indices(field_: FieldConstruction) -> list[int | None]:
    A = distinguished(field_.cfg.i, field_.cfg.G)
    return [field_.complex.index(a) if field_.complex.has_vertex(a) else None for a in A]


# ---------------------------------------------------------------------------
# Construction-closed truncations
# ---------------------------------------------------------------------------

def vertex_wstar(cfg: E1Config, x: Sequence[int], size: int = 4) -> tuple[LatticeVector, ...]:
    x = LatticeVector(x)
    return assign_wstar([x], cfg.i, vertex_level(x, cfg.i), cfg.g)[:size]


def construction_closure(cfg: E1Config, seeds: Iterable[Sequence[int]], size: int = 4,
                         max_vertices: int = 5000) -> FiniteComplex:
    """Smallest truncation holding the seeds, A_1..A_4 and, for every non-distinguished
    vertex x in it, the simplex {x} * x*[:size] with all its faces."""
    A = distinguished(cfg.i, cfg.G)
    verts: set[LatticeVector] = set(A)
    facets: list[tuple[LatticeVector, ...]] = [tuple(A)]
    queue = [LatticeVector(s) for s in seeds]
    seen: set[LatticeVector] = set()
    while queue:
        x = queue.pop(0)
        if x in seen:
            continue
        seen.add(x)
        verts.add(x)
        if x in A:
            continue
        ws = vertex_wstar(cfg, x, size)
        facets.append((x,) + tuple(ws))
        for w in ws:
            if w not in seen:
                queue.append(w)
        if len(verts) > max_vertices:
            raise PreconditionError(f"construction closure exceeds {max_vertices} vertices")
    vertices = sorted(verts)
    idx = {v: n for n, v in enumerate(vertices)}
    simplices = set()
    for f in facets:
        ids = sorted(idx[v] for v in f)
        for r in range(1, len(ids) + 1):
            simplices.update(itertools.combinations(ids, r))
    return FiniteComplex(cfg.g, cfg.i, 0, vertices, sorted(simplices),
                         notes=[f"construction closure of {len(seen)} vertices"])


# ---------------------------------------------------------------------------
# Degrees 0 and 1
# ---------------------------------------------------------------------------

def _unwrap(t, cfg: E1Config | None) -> tuple[E1Config, FiniteComplex]:
    if isinstance(t, E1Truncation):
        return t.cfg, t.complex
    if cfg is None:
        raise PreconditionError("a configuration is required with a bare truncation")
    return cfg, t


def build_field_deg01(t, cfg: E1Config | None = None) -> FieldConstruction:
    """Pairs spanning degree 0 and degree 1 of the truncation (where it is construction-closed)."""
    cfg, complex = _unwrap(t, cfg)
    if (complex.g, complex.i) != (cfg.g, cfg.i):
        raise PreconditionError("truncation and configuration disagree on (g, i)")
    f = FieldConstruction(cfg, complex)
    G, i = cfg.G, cfg.i
    A, B, b = distinguished(i, G), seed_duals(i, G), cfg.b
    a_idx = _a_indices(f)
    others = [v for v in range(len(complex.vertices)) if v not in a_idx]
    if others and cfg.g < 8 - i:
        raise PreconditionError(f"non-distinguished vertices need g >= {8 - i}, got g = {cfg.g}")

    # degree 0: the empty simplex, split along A_1..A_4 with duals B_1..B_4
    f.block(())
    if G < 4:
        f.status[()] = SummandStatus("failed", "genus too small for four distinguished vertices")
        return f
    dec0 = decompose([], A, B, b)
    if None in a_idx:
        miss = [format_vector(A[j]) for j, v in enumerate(a_idx) if v is None]
        f.status[()] = SummandStatus("unconstructed", f"missing distinguished vertices {miss}")
    else:
        for j in range(4):
            f.add_pairs((), a_idx[j], dec0.summands[j].tolist(), "seed", 0)
        f.status[()] = SummandStatus("certified", rule="seed", stage=0)

    # degree 1 on A_j: the rest R(A_j) goes to the edges {A_m, A_j}
    rest = decompose_rest([], A, B, b)
    for j in range(1, 5):
        v = a_idx[j - 1]
        if v is None:
            continue
        f.block((v,))
        if a_idx[0] is None or None in a_idx:
            f.status[(v,)] = SummandStatus("unconstructed", "missing distinguished vertices")
            continue
        missing = [m for m, _ in rest[j] if not complex.has_simplex(tuple(sorted((a_idx[m - 1], v))))]
        if missing:
            f.status[(v,)] = SummandStatus("unconstructed", f"missing edges to A_{missing}")
            continue
        for m, rows in rest[j]:
            f.add_pairs((v,), a_idx[m - 1], rows.tolist(), "seed-rest", 0)
        f.status[(v,)] = SummandStatus("certified", rule="seed-rest", stage=0)

    # degree 1 on every other vertex: decompose along x*
    for v in others:
        x = complex.vertices[v]
        f.block((v,))
        try:
            ws = vertex_wstar(cfg, x)
        except (ConstructionError, PreconditionError) as exc:
            f.status[(v,)] = SummandStatus("failed", f"assign_wstar: {exc}")
            continue
        ids = []
        for w in ws:
            e = f.index_of([x, w])
            ids.append(None if e is None else complex.index(w))
        if None in ids:
            miss = [format_vector(w) for w, n in zip(ws, ids) if n is None]
            f.status[(v,)] = SummandStatus("unconstructed", f"missing x* vertices or edges {miss}")
            continue
        try:
            duals = solve_duals([x], ws, b)
            dec = decompose([x], ws, duals, b)
        except (ConstructionError, PreconditionError) as exc:
            f.status[(v,)] = SummandStatus("failed", f"decompose: {exc}")
            continue
        f.wstar[(v,)] = (tuple(ids), tuple(ws))
        f.duals[(v,)] = tuple(duals)
        for j in range(4):
            f.add_pairs((v,), ids[j], dec.summands[j].tolist(), "wstar", 0)
        f.status[(v,)] = SummandStatus("certified", rule="wstar", stage=0)
    return f


# ---------------------------------------------------------------------------
# Degree 2
# ---------------------------------------------------------------------------

def help_vector(x: Sequence[int], vs: Sequence[Sequence[int]]) -> tuple:
    """Rational u supported on H_2 with <x,u> = <v,u> = 1 for all v in vs.

    Then b1 - u is orthogonal to x and every v (all of a1-rank 1).
    """
    x = LatticeVector(x)
    vectors = [x] + [LatticeVector(v) for v in vs]
    n = len(x)
    rows = [[-c for c in form_row(v)][2:] for v in vectors]
    try:
        sol = solve_exact(rows, [1] * len(vectors))
    except NoSolution:
        raise ConstructionError("help-vector", "no vector of H_2 pairs to 1 with all inputs") from None
    u = (0, 0) + tuple(sol)
    b1 = basis_vector(n // 2, "b", 1)
    tilde = tuple(Fraction(b1[k]) - Fraction(u[k]) for k in range(n))
    for v in vectors:
        if sum(Fraction(c) * r for c, r in zip(tilde, form_row(v))) != 0:
            raise ConstructionError("help-vector", f"b1 - u is not orthogonal to {format_vector(v)}")
    return u


def _span_rank(rows: list) -> int:
    return rank_of(rows) if rows else 0


def _complete(f: FieldConstruction, s: Simplex) -> bool:
    blk = f.blocks.get(s)
    return blk is not None and len(blk.rows) == blk.full_dim and _span_rank(blk.rows) == blk.full_dim


def _a_edge_rest(f: FieldConstruction, a_idx: list[int]) -> None:
    """Edges {A_m, A_j}: the part not hit from degree 1 telescopes over A_l, l < m."""
    cfg = f.cfg
    A, B = distinguished(cfg.i, cfg.G), seed_duals(cfg.i, cfg.G)
    for m, j in itertools.combinations(range(1, 5), 2):
        e = tuple(sorted((a_idx[m - 1], a_idx[j - 1])))
        if not f.complex.has_simplex(e):
            continue
        tri_missing = [l for l in range(1, m) if not f.complex.has_simplex(tuple(sorted(e + (a_idx[l - 1],))))]
        if tri_missing:
            f.block(e)
            f.status[e] = SummandStatus("unconstructed", f"missing triangles with A_{tri_missing}")
            continue
        for l in range(1, m):
            space = cfg.carrier([A[l - 1], A[m - 1], A[j - 1]])
            rows = wedge_summand(B[: l - 1], space)
            f.add_pairs(e, a_idx[l - 1], rows.tolist(), "seed-edge", 0)
        f.status[e] = SummandStatus("certified" if _complete(f, e) else "failed",
                                    "" if _complete(f, e) else "collapsible and rest do not span", 0, "seed-edge")


def _wstar_edges(f: FieldConstruction, v: int) -> None:
    """Edges {x, x_j}: the rest R(x_j) goes to triangles {x, x_m, x_j}."""
    cfg = f.cfg
    ids, ws = f.wstar[(v,)]
    x = f.complex.vertices[v]
    rest = decompose_rest([x], ws, f.duals[(v,)], cfg.b)
    for j in range(1, 5):
        e = tuple(sorted((v, ids[j - 1])))
        missing = [m for m, _ in rest[j] if not f.complex.has_simplex(tuple(sorted(e + (ids[m - 1],))))]
        if missing:
            f.block(e)
            f.status[e] = SummandStatus("unconstructed", f"missing triangles with x_{missing}")
            continue
        for m, rows in rest[j]:
            f.add_pairs(e, ids[m - 1], rows.tolist(), "wstar-rest", 0)
        ok = _complete(f, e)
        f.status[e] = SummandStatus("certified" if ok else "failed", "" if ok else "C + R do not span", 0, "wstar-rest")


def _independent_extension(current: list[Row], candidates: list[Row], limit: int | None = None) -> list[int]:
    """Indices of candidates extending ``current`` independently, chosen greedily in order."""
    if not candidates:
        return []
    stacked = list(current) + list(candidates)
    m = flint.fmpq_mat(len(stacked[0]), len(stacked), [int(stacked[c][r]) for r in range(len(stacked[0])) for c in range(len(stacked))])
    red, rank = m.rref()
    pivots = []
    col = 0
    for r in range(rank):
        while red[r, col] == 0:
            col += 1
        pivots.append(col)
        col += 1
    base = len(current)
    return [p - base for p in pivots if p >= base][:limit]


def _stage_fixpoint(f: FieldConstruction, v: int, k) -> None:
    """Greedy stages for the edges {x, x'} with x' above x: stage j adds wedges of
    Λ³<x, x', x''> through triangles with edges {x, x''} completed before stage j."""
    cfg, cx = f.cfg, f.complex
    ids, _ = f.wstar[(v,)]
    nbrs = sorted({w for s in cx.of_dim(1) if v in s for w in s if w != v})
    upper = [w for w in nbrs if _vertex_level_of(f, w) > k]
    done: dict[int, int] = {}
    for w in ids:
        e = tuple(sorted((v, w)))
        if f.status.get(e, SummandStatus("failed")).status == "certified":
            done[w] = 0
    todo = [w for w in upper if w not in done and w not in ids
            and filtration_level(cx.realize(tuple(sorted((v, w)))), cfg.i) >= k]
    tri = {tuple(s) for s in cx.of_dim(2) if v in s}
    stage = 0
    while todo:
        stage += 1
        finished = []
        for w in todo:
            e = tuple(sorted((v, w)))
            blk = f.block(e)
            for w2 in sorted(u for u, st in done.items() if st < stage):
                t = tuple(sorted((v, w, w2)))
                if t not in tri or filtration_level(cx.realize(t), cfg.i) < k:
                    continue
                cand = [_row(r) for r in f.carrier(t).wedge_rows().tolist()]
                tblk = f.block(t)
                picks = _independent_extension(blk.rows, cand)
                picks = [picks[q] for q in _independent_extension(tblk.rows, [cand[p] for p in picks])]
                if picks:
                    f.add_pairs(e, w2, [cand[p] for p in picks], "stage", stage)
                if len(blk.rows) == blk.full_dim:
                    break
            if _complete(f, e):
                finished.append(w)
                f.status[e] = SummandStatus("certified", stage=stage, rule="stage")
        for w in finished:
            done[w] = stage
        todo = [w for w in todo if w not in finished]
        if not finished:
            break
    for w in todo:
        e = tuple(sorted((v, w)))
        blk = f.block(e)
        f.status[e] = SummandStatus("unconstructed",
                                    f"stage fixpoint reached with rank {len(blk.rows)} of {blk.full_dim}",
                                    stage, "stage")


def _edge_wstar(f: FieldConstruction, e: Simplex) -> None:
    """Remaining edges: decompose along {x, x'}* into triangles {x, x', v_j}."""
    cfg = f.cfg
    vec = f.complex.realize(e)
    k = filtration_level(vec, cfg.i)
    f.block(e)
    try:
        ws = assign_wstar(list(vec), cfg.i, k, cfg.g)[:4]
        duals = solve_duals(list(vec), ws, cfg.b)
        dec = decompose(list(vec), ws, duals, cfg.b)
    except (ConstructionError, PreconditionError) as exc:
        f.status[e] = SummandStatus("failed", f"edge w*: {exc}", rule="edge-wstar")
        return
    ids = []
    for w in ws:
        t = f.index_of(list(vec) + [w])
        ids.append(None if t is None else f.complex.index(w))
    if None in ids:
        miss = [format_vector(w) for w, n in zip(ws, ids) if n is None]
        f.status[e] = SummandStatus("unconstructed", f"missing triangles with {miss}", rule="edge-wstar")
        return
    for j in range(4):
        f.add_pairs(e, ids[j], dec.summands[j].tolist(), "edge-wstar", 0)
    ok = _complete(f, e)
    f.status[e] = SummandStatus("certified" if ok else "failed", "" if ok else "summands do not span", 0, "edge-wstar")


def extend_field_deg2(field_: FieldConstruction) -> FieldConstruction:
    """Extend the degree-0/1 field over the edge summands, level by level from the top."""
    f = field_
    cx, cfg = f.complex, f.cfg
    a_idx = _a_indices(f)
    if None not in a_idx:
        _a_edge_rest(f, a_idx)
    by_level: dict = {}
    for (v,), st in sorted((s, st) for s, st in f.status.items() if len(s) == 1):
        if v in a_idx or st.status != "certified":
            continue
        by_level.setdefault(_vertex_level_of(f, v), []).append(v)
    edges_by_level: dict = {}
    for e in cx.of_dim(1):
        edges_by_level.setdefault(filtration_level(cx.realize(e), cfg.i), []).append(e)
    for k in sorted(set(by_level) | set(edges_by_level), reverse=True):
        for v in by_level.get(k, []):
            _wstar_edges(f, v)
        for v in by_level.get(k, []):
            _stage_fixpoint(f, v, k)
        for e in edges_by_level.get(k, []):
            if e not in f.status:
                _edge_wstar(f, e)
    for e in cx.of_dim(1):
        if e not in f.status:
            f.block(e)
            f.status[e] = SummandStatus("unconstructed", "endpoint block not constructed")
    return f


# ---------------------------------------------------------------------------
# Block bases and coordinates
# ---------------------------------------------------------------------------

class _Solver:
    """Coordinates with respect to a fixed basis of ambient rows (square on pivot columns)."""

    def __init__(self, rows: list[Row]):
        self.rows = rows
        self.k = len(rows)
        if not rows:
            self.pivots: list[int] = []
            return
        m = flint.fmpq_mat(self.k, len(rows[0]), [int(x) for r in rows for x in r])
        red, rank = m.rref()
        if rank != self.k:
            raise ConstructionError("field-independence", f"block rows have rank {rank} of {self.k}")
        piv, col = [], 0
        for r in range(rank):
            while red[r, col] == 0:
                col += 1
            piv.append(col)
            col += 1
        self.pivots = piv
        self.full = m
        self.inv = flint.fmpq_mat(self.k, self.k, [int(rows[a][p]) for a in range(self.k) for p in piv]).inv()

    def coords(self, targets: list[Row]) -> flint.fmpq_mat:
        if not self.k:
            if any(any(t) for t in targets):
                raise ContainmentError("nonzero vector in a zero block")
            return flint.fmpq_mat(len(targets), 0)
        T = flint.fmpq_mat(len(targets), self.k, [int(t[p]) for t in targets for p in self.pivots])
        X = T * self.inv
        full = flint.fmpq_mat(len(targets), len(targets[0]), [int(x) for t in targets for x in t])
        if X * self.full != full:
            raise ContainmentError("vector outside the block")
        return X


def full_basis(f: FieldConstruction, s: Simplex) -> tuple[list[Row], int]:
    """Decided rows of a block followed by a deterministic completion from the standard triples."""
    blk = f.block(s)
    if len(blk.rows) >= blk.full_dim:
        return list(blk.rows), len(blk.rows)
    cand = [_row(r) for r in f.carrier(s).wedge_rows().tolist()]
    stacked = blk.rows + cand
    picks = _independent_extension([], stacked)
    if picks[: len(blk.rows)] != list(range(len(blk.rows))):
        raise ConstructionError("field-independence", f"decided rows of block {list(s)} are dependent")
    extra = [stacked[p] for p in picks[len(blk.rows):]]
    return list(blk.rows) + extra, len(blk.rows)


def _solver(f: FieldConstruction, s: Simplex, cache: dict) -> tuple[_Solver, int]:
    key = (s, len(f.block(s).rows))
    if key not in cache:
        rows, decided = full_basis(f, s)
        cache[key] = (_Solver(rows), decided)
    return cache[key]


# ---------------------------------------------------------------------------
# Gradient paths, block by block
# ---------------------------------------------------------------------------

@dataclass
class PathSummary:
    degree: int
    max_length: int
    per_block: dict[Simplex, int]
    cycle: list | None = None
    cap_reached: bool = False

    @property
    def terminates(self) -> bool:
        return self.cycle is None and not self.cap_reached

    def to_json(self) -> dict:
        return {"degree": self.degree, "max_length": self.max_length, "terminates": self.terminates,
                "cap_reached": self.cap_reached, "cycle": self.cycle}


def _positions(f: FieldConstruction) -> dict[int, tuple[Simplex, int, Simplex, int]]:
    out: dict[int, list] = {}
    for s, blk in f.blocks.items():
        for n, (role, k) in enumerate(blk.roles):
            slot = out.setdefault(k, [None, None])
            slot[0 if role == "redundant" else 1] = (s, n)
    return {k: (a[0], a[1], b[0], b[1]) for k, (a, b) in out.items() if a is not None and b is not None}


def gradient_path_bound(field_: FieldConstruction, degree: int, cap: int | None = None,
                        cache: dict | None = None) -> PathSummary:
    """Longest gradient path (counted in pairs) from every redundant vector of ``degree``.

    Successors of z (paired into target T) are the redundant basis vectors of the
    other faces of T on which z has a nonzero coordinate.
    """
    f = field_
    cap = f.cfg.cap_steps if cap is None else cap
    cache = {} if cache is None else cache
    sources = sorted(s for s, blk in f.blocks.items() if len(s) == degree and blk.redundant())
    # edges[s] = list of (face, source positions, bool mask over face redundant positions)
    edges: dict[Simplex, list] = {}
    for s in sources:
        groups: dict[Simplex, list[int]] = {}
        for n, (role, k) in enumerate(f.blocks[s].roles):
            if role == "redundant":
                groups.setdefault(f.pairs[k].target, []).append(n)
        out = []
        for T, ns in sorted(groups.items()):
            rows = [f.blocks[s].rows[n] for n in ns]
            for fc in faces(T):
                if fc == s or fc not in f.blocks or not f.blocks[fc].redundant():
                    continue
                solver, _ = _solver(f, fc, cache)
                X = solver.coords(rows)
                red = f.blocks[fc].redundant()
                entries = X.entries()
                k = solver.k
                mask = np.array([[entries[a * k + c] != 0 for c in red] for a in range(len(rows))], dtype=bool)
                out.append((fc, ns, red, mask))
        edges[s] = out
    # topological order of blocks (successor blocks first)
    succ = {s: sorted({e[0] for e in edges[s]}) for s in sources}
    indeg = {s: 0 for s in sources}
    for s in sources:
        for t in succ[s]:
            indeg[t] = indeg.get(t, 0) + 1
    order, queue = [], [s for s in sources if indeg[s] == 0]
    while queue:
        s = queue.pop()
        order.append(s)
        for t in succ.get(s, []):
            indeg[t] -= 1
            if indeg[t] == 0 and t in edges:
                queue.append(t)
    summary = PathSummary(degree, 0, {})
    if len(order) < len(sources):
        cells = _cell_lengths(f, edges, sources)
        if isinstance(cells, list):
            summary.cycle = cells
            return summary
        for (s, n), ln in cells.items():
            summary.per_block[s] = max(summary.per_block.get(s, 0), ln)
    else:
        length: dict[Simplex, np.ndarray] = {}
        for s in reversed(order):
            L = np.zeros(len(f.blocks[s].rows), dtype=np.int64)
            for n in f.blocks[s].redundant():
                L[n] = 1
            for fc, ns, red, mask in edges[s]:
                Lf = length[fc][red] if fc in length else np.zeros(len(red), dtype=np.int64)
                best = np.where(mask, Lf[None, :], 0).max(axis=1) if mask.size else np.zeros(len(ns), dtype=np.int64)
                idx = np.array(ns)
                L[idx] = np.maximum(L[idx], best + 1)
            length[s] = L
            summary.per_block[s] = int(L.max()) if L.size else 0
    summary.max_length = max(summary.per_block.values(), default=0)
    summary.cap_reached = summary.max_length > cap
    return summary


def _cell_graph(edges: dict, blocks: Iterable[Simplex]) -> dict[tuple, list[tuple]]:
    g: dict[tuple, list[tuple]] = {}
    for s in blocks:
        for fc, ns, red, mask in edges[s]:
            for a, n in enumerate(ns):
                g.setdefault((s, n), []).extend((fc, red[c]) for c in np.nonzero(mask[a])[0])
    return g


def _cell_lengths(f: FieldConstruction, edges: dict, sources: list[Simplex]) -> dict | list:
    """Cell-level longest paths (used when blocks form cycles); a list means a cell cycle."""
    g = _cell_graph(edges, sources)
    for s in sources:
        for n in f.blocks[s].redundant():
            g.setdefault((s, n), [])
    indeg = {c: 0 for c in g}
    for c, nx in g.items():
        for d in nx:
            indeg[d] = indeg.get(d, 0) + 1
    queue = [c for c, k in indeg.items() if k == 0]
    order = []
    while queue:
        c = queue.pop()
        order.append(c)
        for d in g.get(c, []):
            indeg[d] -= 1
            if indeg[d] == 0:
                queue.append(d)
    if len(order) < len(indeg):
        left = sorted(c for c in indeg if c not in set(order))
        return [[list(s), int(n)] for s, n in left[:8]]
    L: dict[tuple, int] = {}
    for c in reversed(order):
        L[c] = 1 + max((L[d] for d in g.get(c, [])), default=0)
    return L


# ---------------------------------------------------------------------------
# Explicit assembly in the field bases (small truncations)
# ---------------------------------------------------------------------------

def assemble(field_: FieldConstruction, max_degree: int = 3, cache: dict | None = None) -> tuple[BasedChainComplex, Matching]:
    """The truncated E¹ complex written in the field's block bases, with the field as a Matching."""
    f = field_
    cx = f.complex
    cache = {} if cache is None else cache
    top = min(max_degree, max((len(s) for s in cx.simplices), default=0))
    blocks = {p: cx.of_dim(p - 1) for p in range(top + 1)}
    total = sum(f.block(s).full_dim for ss in blocks.values() for s in ss)
    if total > max_cells():
        raise PreconditionError(f"assembly needs {total} cells, above the budget {max_cells()} (set {RESOURCE_ENV})")
    labels: dict[int, list] = {}
    offset: dict[Simplex, int] = {}
    bases: dict[Simplex, list[Row]] = {}
    for p, ss in blocks.items():
        labels[p] = []
        for s in ss:
            rows, decided = full_basis(f, s)
            bases[s] = rows
            offset[s] = len(labels[p])
            roles = f.blocks[s].roles
            labels[p] += [(roles[n][0] if n < decided else "completion", s, n) for n in range(len(rows))]
    d: dict[int, list[dict]] = {0: [{} for _ in labels[0]]}
    for p in range(1, top + 1):
        cols: list[dict] = []
        for s in blocks[p]:
            parts = []
            for j, fc in enumerate(faces(s)):
                solver, _ = _solver(f, fc, cache)
                X = solver.coords(bases[s]) if bases[s] else None
                parts.append((-1 if j % 2 else 1, offset[fc], X, solver.k))
            for n in range(len(bases[s])):
                col: dict[int, object] = {}
                for sign, off, X, k in parts:
                    for c in range(k):
                        v = X[n, c]
                        if v != 0:
                            col[off + c] = col.get(off + c, 0) + sign * Fraction(int(v.p), int(v.q))
                cols.append(col)
        d[p] = cols
    chain = BasedChainComplex(labels, d)
    cells = []
    for k, (src, sn, tgt, tn) in sorted(_positions(f).items()):
        if len(tgt) - 1 >= top or src not in offset or tgt not in offset:
            continue
        cells.append(((len(src), offset[src] + sn), (len(tgt), offset[tgt] + tn)))
    return chain, Matching.of(cells)


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------

def _partner_ok(p: FieldPair) -> bool:
    added = [v for v in p.target if v not in p.source]
    return len(added) == 1 and p.sign * (-1) ** p.target.index(added[0]) == 1


def certify(field_: FieldConstruction, truncation: E1Truncation | None = None, degrees: Sequence[int] = (0, 1, 2),
            exactness: bool | None = None) -> dict:
    """Machine-checkable certificate; never raises on a failed check, it records it."""
    f = field_
    cache: dict = {}
    issues: list[str] = []
    placed = _positions(f)
    for k, p in enumerate(f.pairs):
        if not _partner_ok(p):
            issues.append(f"pair {k}: partner coefficient is not 1")
        if k not in placed:
            issues.append(f"pair {k}: only one half is recorded in the blocks")
    for s, blk in sorted(f.blocks.items()):
        if blk.rows and _span_rank(blk.rows) != len(blk.rows):
            issues.append(f"block {list(s)}: decided vectors are dependent")
    paths = {}
    for dgr in degrees:
        if any(p.degree == dgr for p in f.pairs):
            try:
                paths[dgr] = gradient_path_bound(f, dgr, cache=cache)
            except (ConstructionError, ContainmentError) as exc:
                issues.append(f"degree {dgr} paths: {exc}")
    summands = []
    for s in sorted(f.blocks, key=lambda s: (len(s), s)):
        if len(s) not in degrees:
            continue
        st = f.status.get(s, SummandStatus("unconstructed", "no construction rule applied"))
        status, reason = st.status, st.reason
        blk = f.blocks[s]
        if status == "certified" and (len(blk.rows) != blk.full_dim or _span_rank(blk.rows) != blk.full_dim):
            status, reason = "failed", "decided vectors do not span the summand"
        pl = paths.get(len(s))
        if status == "certified" and pl is not None and not pl.terminates:
            status, reason = "failed", "gradient paths do not terminate"
        summands.append({"simplex": f.label(s), "degree": len(s), "status": status, "reason": reason,
                         "rule": st.rule, "stage": st.stage,
                         "max_path_len": pl.per_block.get(s, 0) if pl is not None else 0})
    ex = {"checked": False, "value": None}
    want = exactness if exactness is not None else truncation is not None
    if want:
        try:
            chain, matching = assemble(f, max_degree=max(degrees) + 1, cache=cache)
            rep = validate_matching(chain, matching)
            cyc = gradient_cycles(chain, matching, degrees=list(degrees))
            low = [p for p in chain.degrees if p <= max(degrees)]
            matched = {c for pr in matching.pairs for c in pr}
            spans_all = all((p, j) in matched for p in low for j in range(chain.dim(p)))
            value = exactness_at(chain, max(degrees))
            predicted = bool(rep) and not cyc and spans_all
            ex = {"checked": True, "value": value, "predicted": predicted, "agree": (not predicted) or value,
                  "matching_valid": bool(rep)}
            issues += [f"assembled matching: {x}" for x in rep.issues]
        except (PreconditionError, ConstructionError, ContainmentError) as exc:
            ex = {"checked": False, "value": None, "reason": str(exc)}
    counts = {"certified": 0, "unconstructed": 0, "failed": 0}
    for sm in summands:
        counts[sm["status"]] += 1
    return {
        "config": f.cfg.to_json(),
        "truncation": f.complex.digest(),
        "summands": summands,
        "counts": counts,
        "matching": {"pairs": f.matching_summary(), "valid": not issues, "issues": issues},
        "paths": {str(k): v.to_json() for k, v in sorted(paths.items())},
        "exactness": ex,
    }


def verify_certificate(cert: Mapping, field_: FieldConstruction, truncation: E1Truncation | None = None) -> bool:
    """Re-run certification on the stored truncation and compare."""
    again = certify(field_, truncation, exactness=cert.get("exactness", {}).get("checked", False))
    return json.dumps(again, sort_keys=True) == json.dumps(dict(cert), sort_keys=True)


# ---------------------------------------------------------------------------
# Unordered complex: pairs for descending ordered edges
# ---------------------------------------------------------------------------

def _edge_wstar_skipping(cfg: E1Config, lo: LatticeVector, hi: LatticeVector, k) -> list[LatticeVector]:
    """First four vertices of the edge's w* that are not the edge's own vertices.

    A distinguished endpoint reappears among the fixed A_j of w*; the gap is filled
    from further isotropic directions.
    """
    n = wstar_size(cfg.g, cfg.i, 1)
    for extra in range(3):
        try:
            ws = assign_wstar([lo, hi], cfg.i, k, cfg.g, size=n + extra)
        except ConstructionError:
            break
        ws = [w for w in ws if w not in (lo, hi)][:4]
        if len(ws) == 4:
            return ws
    raise ConstructionError("wstar-dimension", "not enough w* vertices away from the edge")


# For an edge among A_1..A_4 (positions in ascending vertex order) whose w* still
# uses other A_j, whether the higher endpoint is the one replaced.  Found by
# exhaustive search: the only other choice is its mirror, and every other one sends
# two of these edges into the same ordered triangle.
_A_EDGE_REPLACES_HI = {(0, 1): False, (0, 2): False, (0, 3): True,
                       (1, 2): True, (1, 3): False, (2, 3): True}


def pair_ordering_pass(field_: FieldConstruction) -> dict:
    """Local pairs on the summands indexed by descending ordered edges.

    For an edge, x is the endpoint of lower level (the first in descending order
    on a tie) and y the other.  Each z in the decomposition of Λ³<x, y, b>^⊥ along
    the edge's w* goes to the ordered triangle that replaces x by the ascending
    pair (x, w_z), so deleting w_z gives back the descending edge.  Edges among
    A_1..A_4 use spare distinguished vertices; the pass is locally valid once
    four spares exist (``distinguished_size`` >= 8).  Only local validity is
    checked: partner coefficients and independence per target.
    """
    f = field_
    cfg, cx = f.cfg, f.complex
    A4 = distinguished(cfg.i, cfg.G)
    targets: dict[tuple, list[Row]] = {}
    issues: list[str] = []
    npairs = nedges = 0
    for e in cx.of_dim(1):
        lo, hi = cx.realize(e)
        lvl_lo, lvl_hi = vertex_level(lo, cfg.i), vertex_level(hi, cfg.i)
        x, y = (lo, hi) if lvl_lo < lvl_hi else (hi, lo)
        try:
            if lo in A4 and hi in A4:
                if cfg.distinguished_size > cfg.G:
                    raise PreconditionError(f"{cfg.distinguished_size} distinguished vertices need genus >= {cfg.distinguished_size}")
                pool = distinguished(cfg.i, cfg.G, cfg.distinguished_size)
                ws = ([a for a in pool if a not in A4] + [a for a in A4 if a not in (lo, hi)])[:4]
                if any(a in A4 for a in ws):
                    rank = sorted(A4).index
                    x, y = (hi, lo) if _A_EDGE_REPLACES_HI[(rank(lo), rank(hi))] else (lo, hi)
                else:
                    x, y = hi, lo
                if len(ws) < 4:
                    raise PreconditionError("fewer than four remaining distinguished vertices")
            else:
                k = filtration_level([lo, hi], cfg.i)
                ws = _edge_wstar_skipping(cfg, lo, hi, k)
            dec = decompose([x, y], ws, None, cfg.b)
        except (ConstructionError, PreconditionError) as exc:
            issues.append(f"edge {f.label(e)}: {exc}")
            continue
        nedges += 1
        for j, w in enumerate(ws):
            first = tuple(sorted((x, w)))
            tri = first + (y,) if x == hi else (y,) + first
            sign = -1 if tri.index(w) % 2 else 1
            rows = [_row(r) for r in dec.summands[j].tolist()]
            face = tuple(v for v in tri if v != w)
            if face != (hi, lo):
                issues.append(f"edge {f.label(e)}: target face is not the descending edge")
            targets.setdefault(tri, []).extend(tuple(sign * c for c in r) for r in rows)
            npairs += len(rows)
    for tri, rows in targets.items():
        if _span_rank(rows) != len(rows):
            issues.append(f"target {[format_vector(v) for v in tri]}: collapsible vectors are dependent")
    return {"edges": nedges, "pairs": npairs, "targets": len(targets), "valid": not issues, "issues": issues}


def level_seeds(cfg: E1Config, per_level: int, seed: int = 0, bound: int = 1) -> list[LatticeVector]:
    """Random vertices of every filtration level below the top, ``per_level`` each."""
    import random

    rng = random.Random(seed)
    G, i = cfg.G, cfg.i
    a1, b1 = basis_vector(G, "a", 1), basis_vector(G, "b", 1)
    levels = [k for k in (1, 2, 3, 4, 5) if k <= G] if i == 1 else [k for k in (0, 1, 2, 3, 4, 5) if k < G]
    out: list[LatticeVector] = []
    for k in levels:
        found, tries = 0, 0
        while found < per_level and tries < 2000:
            tries += 1
            if i == 1 or k >= 2:
                start = 2 * (k - 1)
                tail = [rng.randint(-bound, bound) for _ in range(2 * G - start)]
                tail[0] = tail[0] or 1
                v = LatticeVector([0] * start + tail)
                if i == 2:
                    v = a1 + v
            else:
                t = rng.randint(-bound, bound)
                tail = [rng.randint(-bound, bound) for _ in range(2 * G - 2)]
                if k == 0:
                    tail = [2 * c for c in tail]
                    tail[0] = tail[0] or 2
                v = a1 + t * b1 + LatticeVector([0, 0] + tail)
            if vertex_level(v, i) == k and v not in out:
                out.append(v)
                found += 1
    return out

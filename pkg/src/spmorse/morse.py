"""Algebraic discrete Morse theory on based chain complexes over Q."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import flint

from .linalg import snf
from .symplectic import PreconditionError

Cell = tuple[int, int]  # (degree, index)


def _num(x):
    if isinstance(x, Fraction) and x.denominator == 1:
        return x.numerator
    return x


def _parse(text: str):
    return _num(Fraction(text))


@dataclass
class BasedChainComplex:
    """Graded vector space with labeled bases and sparse differentials.

    ``d[n][j]`` is the column of d(b_n^j) as a map {row index in degree n-1: coefficient}.
    """

    labels: dict[int, list]
    d: dict[int, list[dict[int, object]]] = field(default_factory=dict)

    def __post_init__(self):
        for n in self.degrees:
            cols = self.d.setdefault(n, [{} for _ in self.labels[n]])
            if len(cols) != len(self.labels[n]):
                raise ValueError(f"degree {n} has {len(self.labels[n])} basis vectors but {len(cols)} columns")
            self.d[n] = [{r: _num(v) for r, v in col.items() if v} for col in cols]
            if n - 1 not in self.labels:
                if any(self.d[n]):
                    raise ValueError(f"nonzero differential out of the lowest degree {n}")
            else:
                for col in self.d[n]:
                    for r in col:
                        if not 0 <= r < len(self.labels[n - 1]):
                            raise ValueError(f"row index {r} outside degree {n - 1}")

    @property
    def degrees(self) -> list[int]:
        return sorted(self.labels)

    def dim(self, n: int) -> int:
        return len(self.labels.get(n, []))

    def column(self, n: int, j: int) -> dict[int, object]:
        return self.d[n][j] if n in self.d else {}

    def rows(self, n: int) -> list[list]:
        """Dense matrix of d_n: C_n -> C_{n-1} (dim(n-1) rows)."""
        m = [[0] * self.dim(n) for _ in range(self.dim(n - 1))]
        for j, col in enumerate(self.d.get(n, [])):
            for r, v in col.items():
                m[r][j] = v
        return m

    def rank(self, n: int) -> int:
        if self.dim(n) == 0 or self.dim(n - 1) == 0:
            return 0
        entries = [(r, j, v) for j, col in enumerate(self.d[n]) for r, v in col.items()]
        if not entries:
            return 0
        m = flint.fmpq_mat(self.dim(n - 1), self.dim(n))
        for r, j, v in entries:
            v = Fraction(v)
            m[r, j] = flint.fmpq(v.numerator, v.denominator)
        return m.rank()

    def dd_violations(self) -> list[tuple[int, int, int, object]]:
        """Nonzero entries of d_{n-1} d_n as (n, column, row, value)."""
        bad = []
        for n in self.degrees:
            if n - 1 not in self.labels or n - 2 not in self.labels:
                continue
            for j, col in enumerate(self.d[n]):
                acc: dict[int, object] = {}
                for r, v in col.items():
                    for s, w in self.d[n - 1][r].items():
                        acc[s] = acc.get(s, 0) + v * w
                bad += [(n, j, s, _num(x)) for s, x in sorted(acc.items()) if x]
        return bad

    def verify(self) -> None:
        bad = self.dd_violations()
        if bad:
            raise ValueError(f"d∘d ≠ 0, first entry {bad[0]}")

    def to_json(self) -> dict:
        return {
            "degrees": self.degrees,
            "labels": {str(n): [_label_json(l) for l in self.labels[n]] for n in self.degrees},
            "differential": [[n, j, r, str(v)] for n in self.degrees for j, col in enumerate(self.d[n])
                             for r, v in sorted(col.items())],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "BasedChainComplex":
        labels = {int(n): [_label_from(l) for l in ls] for n, ls in payload["labels"].items()}
        d = {n: [{} for _ in labels[n]] for n in labels}
        for n, j, r, v in payload.get("differential", []):
            d[int(n)][int(j)][int(r)] = _parse(str(v))
        return cls(labels, d)

    @classmethod
    def from_matrices(cls, dims: dict[int, int], mats: dict[int, Sequence[Sequence]]) -> "BasedChainComplex":
        """Build from dense matrices ``mats[n]`` of shape dim(n-1) x dim(n)."""
        labels = {n: [f"e{n}_{j}" for j in range(k)] for n, k in dims.items()}
        d = {}
        for n, k in dims.items():
            m = mats.get(n)
            d[n] = [{r: m[r][j] for r in range(len(m)) if m[r][j]} if m is not None else {} for j in range(k)]
        return cls(labels, d)


def _label_json(l):
    return l if isinstance(l, (str, int)) else json.loads(json.dumps(l, default=str))


def _label_from(l):
    if isinstance(l, list):
        return tuple(_label_from(x) for x in l)
    return l


# ---------------------------------------------------------------------------
# Matchings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Matching:
    """Pairs (redundant cell in degree n, collapsible cell in degree n+1)."""

    pairs: tuple[tuple[Cell, Cell], ...]

    @classmethod
    def of(cls, pairs: Iterable[tuple[Cell, Cell]]) -> "Matching":
        return cls(tuple((tuple(a), tuple(b)) for a, b in pairs))

    def partner_up(self) -> dict[Cell, Cell]:
        return {a: b for a, b in self.pairs}

    def partner_down(self) -> dict[Cell, Cell]:
        return {b: a for a, b in self.pairs}

    def matched(self) -> set[Cell]:
        return {c for p in self.pairs for c in p}

    def without(self, pair) -> "Matching":
        return Matching(tuple(p for p in self.pairs if p != pair))

    def to_json(self) -> dict:
        return {"pairs": [[list(a), list(b)] for a, b in self.pairs]}

    @classmethod
    def from_json(cls, payload: dict) -> "Matching":
        return cls.of(((int(a[0]), int(a[1])), (int(b[0]), int(b[1]))) for a, b in payload["pairs"])


@dataclass
class MatchingReport:
    valid: bool
    issues: list[str]
    scales: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.valid


def validate_matching(c: BasedChainComplex, m: Matching, normalize: bool = False) -> MatchingReport:
    """Check partner coefficients and disjointness; never raises.

    With ``normalize`` any nonzero partner coefficient is accepted and the
    rescaling that would make it 1 is reported in ``scales``.
    """
    issues = []
    scales = {}
    seen: dict[Cell, int] = {}
    for k, (a, b) in enumerate(m.pairs):
        for cell in (a, b):
            if cell in seen:
                issues.append(f"cell {cell} appears in pairs {seen[cell]} and {k}")
            else:
                seen[cell] = k
        (n, j), (n1, j1) = a, b
        if n1 != n + 1:
            issues.append(f"pair {k}: degrees {n} and {n1} are not adjacent")
            continue
        if not (0 <= j < c.dim(n)) or not (0 <= j1 < c.dim(n1)):
            issues.append(f"pair {k}: index out of range")
            continue
        coef = c.column(n1, j1).get(j, 0)
        if coef == 1:
            continue
        if normalize and coef != 0:
            scales[b] = Fraction(1) / Fraction(coef)
            continue
        issues.append(f"pair {k}: coefficient of {a} in d{b} is {coef}, expected 1")
    return MatchingReport(not issues, issues, scales)


def gradient_successors(c: BasedChainComplex, m: Matching, cell: Cell) -> list[Cell]:
    up = m.partner_up()
    if cell not in up:
        return []
    n1, j1 = up[cell]
    return sorted((n1 - 1, r) for r in c.column(n1, j1) if (n1 - 1, r) != cell and (n1 - 1, r) in up)


@dataclass
class PathReport:
    start: Cell
    max_length: int
    cycle: bool
    cap_reached: bool
    witness: list[Cell]

    @property
    def terminates(self) -> bool:
        return not self.cycle and not self.cap_reached


def gradient_paths(c: BasedChainComplex, m: Matching, start: Cell, cap: int = 64,
                   check: bool = True) -> PathReport:
    """Exhaustive exploration of gradient paths from a redundant cell.

    Length counts the pairs visited.  A reachable cycle sets ``cycle``; paths
    longer than ``cap`` pairs set ``cap_reached`` instead of looping forever.
    """
    if check:
        rep = validate_matching(c, m)
        if not rep:
            raise PreconditionError("invalid matching: " + "; ".join(rep.issues))
    start = tuple(start)
    if start not in m.partner_up():
        return PathReport(start, 0, False, False, [])
    longest: dict[Cell, tuple[int, list[Cell]]] = {}
    state: dict[Cell, int] = {}
    cycle_path: list[Cell] = []
    cap_hit = False

    def visit(cell: Cell, depth: int, stack: list[Cell]) -> tuple[int, list[Cell]]:
        nonlocal cap_hit, cycle_path
        if cell in longest:
            return longest[cell]
        if state.get(cell) == 1:
            if not cycle_path:
                cycle_path = stack[stack.index(cell):] + [cell]
            return (0, [])
        if depth > cap:
            cap_hit = True
            return (0, [])
        state[cell] = 1
        stack.append(cell)
        best = (1, [cell])
        for nxt in gradient_successors(c, m, cell):
            ln, path = visit(nxt, depth + 1, stack)
            if ln + 1 > best[0]:
                best = (ln + 1, [cell] + path)
        stack.pop()
        state[cell] = 2
        if not cycle_path and not cap_hit:
            longest[cell] = best
        return best

    length, path = visit(start, 1, [])
    if cycle_path:
        return PathReport(start, length, True, False, cycle_path)
    return PathReport(start, length, False, cap_hit, path)


def gradient_cycles(c: BasedChainComplex, m: Matching, degrees: Iterable[int] | None = None) -> list[list[Cell]]:
    """Independent cycle detector (iterative Kahn elimination) on the gradient digraph."""
    starts = [a for a, _ in m.pairs if degrees is None or a[0] in set(degrees)]
    succ = {a: gradient_successors(c, m, a) for a in starts}
    indeg = {a: 0 for a in starts}
    for a in starts:
        for b in succ[a]:
            if b in indeg:
                indeg[b] += 1
    queue = [a for a in starts if indeg[a] == 0]
    removed = set()
    while queue:
        a = queue.pop()
        removed.add(a)
        for b in succ[a]:
            if b in indeg:
                indeg[b] -= 1
                if indeg[b] == 0:
                    queue.append(b)
    left = [a for a in starts if a not in removed]
    return [left] if left else []


def is_acyclic(c: BasedChainComplex, m: Matching, degrees: Iterable[int] | None = None) -> bool:
    return not gradient_cycles(c, m, degrees)


# ---------------------------------------------------------------------------
# Homology and spanning
# ---------------------------------------------------------------------------

def homology(c: BasedChainComplex) -> dict[int, int]:
    """Betti numbers over Q: dim C_n - rank d_n - rank d_{n+1}."""
    bad = c.dd_violations()
    if bad:
        raise ValueError(f"d∘d ≠ 0 at {bad[0]}")
    return {n: c.dim(n) - c.rank(n) - c.rank(n + 1) for n in c.degrees}


def exactness_at(c: BasedChainComplex, n: int) -> bool:
    return homology(c)[n] == 0


def snf_homology(c: BasedChainComplex) -> dict[int, tuple[int, tuple[int, ...]]]:
    """Oracle: (Betti, torsion) per degree from the Smith form of the differentials.

    Columns with denominators are cleared first; torsion is meaningful only for integral complexes.
    """
    ranks = {}
    torsion = {}
    for n in c.degrees:
        if c.dim(n) == 0 or c.dim(n - 1) == 0:
            ranks[n], torsion[n] = 0, ()
            continue
        cols = []
        for col in c.d[n]:
            dense = [col.get(r, 0) for r in range(c.dim(n - 1))]
            den = math.lcm(*(Fraction(x).denominator for x in dense))
            cols.append([int(Fraction(x) * den) for x in dense])
        rows = [[cols[j][r] for j in range(c.dim(n))] for r in range(c.dim(n - 1))]
        res = snf(rows)
        ranks[n] = res.rank
        torsion[n] = tuple(d for d in res.invariant_factors if d > 1)
    out = {}
    for n in c.degrees:
        betti = c.dim(n) - ranks.get(n, 0) - ranks.get(n + 1, 0)
        out[n] = (betti, torsion.get(n + 1, ()))
    return out


def spans(c: BasedChainComplex, m: Matching, degree: int, subspace: Sequence[Sequence] | None = None) -> bool:
    """Whether the subspace (generators in basis coordinates; default all of C_n) lies in R_n + C_n."""
    matched = {j for (n, j) in m.matched() if n == degree}
    if subspace is None:
        return len(matched) == c.dim(degree)
    return all(all(not x for j, x in enumerate(v) if j not in matched) for v in subspace)


def collapse_exactness(c: BasedChainComplex, m: Matching, n: int) -> bool:
    """Morse-theoretic exactness at degree n (and below): every cell of degree <= n is matched and
    the pairs starting in degrees <= n have no gradient cycles."""
    rep = validate_matching(c, m)
    if not rep:
        raise PreconditionError("invalid matching: " + "; ".join(rep.issues))
    low = [k for k in c.degrees if k <= n]
    for k in low:
        if not spans(c, m, k):
            raise PreconditionError(f"matching does not span degree {k}")
    if not is_acyclic(c, m, degrees=low):
        raise PreconditionError("gradient cycle among low-degree pairs")
    return True


def find_spanning_matching(c: BasedChainComplex, n: int, node_limit: int = 200000) -> Matching | None:
    """Exhaustive search for a valid acyclic matching covering every cell of degree <= n (toy sizes)."""
    cells = [(k, j) for k in c.degrees if k <= n for j in range(c.dim(k))]
    options: dict[Cell, list[tuple[Cell, Cell]]] = {}
    for (k, j) in cells:
        opts = []
        if k - 1 in c.labels:
            for r, v in c.column(k, j).items():
                if v == 1:
                    opts.append(((k - 1, r), (k, j)))
        if k + 1 in c.labels:
            for jj in range(c.dim(k + 1)):
                if c.column(k + 1, jj).get(j) == 1:
                    opts.append(((k, j), (k + 1, jj)))
        options[(k, j)] = opts
    used: set[Cell] = set()
    chosen: list[tuple[Cell, Cell]] = []
    budget = [node_limit]

    def rec(i: int) -> Matching | None:
        budget[0] -= 1
        if budget[0] < 0:
            return None
        while i < len(cells) and cells[i] in used:
            i += 1
        if i == len(cells):
            mm = Matching.of(chosen)
            return mm if is_acyclic(c, mm, degrees=[k for k in c.degrees if k <= n]) else None
        for pair in options[cells[i]]:
            if pair[0] in used or pair[1] in used:
                continue
            used.update(pair)
            chosen.append(pair)
            found = rec(i + 1)
            if found is not None:
                return found
            chosen.pop()
            used.difference_update(pair)
        return None

    return rec(0)

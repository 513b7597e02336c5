"""Exact integer and rational linear algebra.

Everything here works on arbitrary-precision ``int`` and ``fractions.Fraction``.
Normal forms (HNF, SNF, saturation) are implemented directly; large rational
rank/solve problems are delegated to FLINT when it is available.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

try:  # FLINT is optional: pure Python fallbacks exist for every routine.
    import flint
except ImportError:  # pragma: no cover
    flint = None

SPARSE_THRESHOLD = 64
FLINT_THRESHOLD = 24


class NoSolution(ArithmeticError):
    """The linear system is consistent in shape but has no solution."""


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


def xgcd(a: int, b: int) -> tuple[int, int, int]:
    """Return ``(g, x, y)`` with ``g = gcd(a, b) >= 0`` and ``a*x + b*y = g``."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, r = divmod(a, b)
        a, b = b, r
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        return -a, -x0, -y0
    return a, x0, y0


def _elim_coeffs(a: int, b: int) -> tuple[int, int, int]:
    """Like :func:`xgcd`, but keeps the first operand untouched when it divides the second."""
    if a and b % a == 0:
        return abs(a), (1 if a > 0 else -1), 0
    return xgcd(a, b)


def _normalize(value) -> Fraction | int:
    if isinstance(value, Fraction):
        return int(value) if value.denominator == 1 else value
    if isinstance(value, int):
        return value
    raise TypeError(f"non-exact entry {value!r}")


class _Matrix:
    """Shared storage: dense row lists for small shapes, a dict above the threshold."""

    __slots__ = ("rows", "cols", "_dense", "_sparse")

    def __init__(self, rows: int, cols: int, data: Sequence[Sequence] | None = None,
                 entries: dict[tuple[int, int], object] | None = None):
        if rows < 0 or cols < 0:
            raise DimensionError("negative dimension")
        self.rows = rows
        self.cols = cols
        sparse = rows > SPARSE_THRESHOLD or cols > SPARSE_THRESHOLD
        self._dense = None
        self._sparse = None
        if data is not None:
            if len(data) != rows or any(len(r) != cols for r in data):
                raise DimensionError("row data does not match the declared shape")
            if sparse:
                self._sparse = {(i, j): self._coerce(v) for i, row in enumerate(data)
                                for j, v in enumerate(row) if v}
            else:
                self._dense = [[self._coerce(v) for v in row] for row in data]
        else:
            entries = entries or {}
            for (i, j) in entries:
                if not (0 <= i < rows and 0 <= j < cols):
                    raise DimensionError(f"entry ({i},{j}) out of bounds")
            if sparse:
                self._sparse = {k: self._coerce(v) for k, v in entries.items() if v}
            else:
                self._dense = [[self._coerce(0)] * cols for _ in range(rows)]
                for (i, j), v in entries.items():
                    self._dense[i][j] = self._coerce(v)

    @staticmethod
    def _coerce(value):
        raise NotImplementedError

    @property
    def is_sparse(self) -> bool:
        return self._sparse is not None

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, key: tuple[int, int]):
        i, j = key
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(f"entry ({i},{j}) outside {self.rows}x{self.cols}")
        if self._dense is not None:
            return self._dense[i][j]
        return self._sparse.get((i, j), self._coerce(0))

    def tolist(self) -> list[list]:
        if self._dense is not None:
            return [list(r) for r in self._dense]
        out = [[self._coerce(0)] * self.cols for _ in range(self.rows)]
        for (i, j), v in self._sparse.items():
            out[i][j] = v
        return out

    def row(self, i: int) -> list:
        return [self[i, j] for j in range(self.cols)]

    def column(self, j: int) -> list:
        return [self[i, j] for i in range(self.rows)]

    def columns(self) -> list[list]:
        data = self.tolist()
        return [[data[i][j] for i in range(self.rows)] for j in range(self.cols)]

    def nonzero(self) -> Iterable[tuple[int, int, object]]:
        if self._sparse is not None:
            for (i, j) in sorted(self._sparse):
                yield i, j, self._sparse[(i, j)]
        else:
            for i, row in enumerate(self._dense):
                for j, v in enumerate(row):
                    if v:
                        yield i, j, v

    def transpose(self):
        return type(self)(self.cols, self.rows,
                          entries={(j, i): v for i, j, v in self.nonzero()})

    T = property(transpose)

    def __matmul__(self, other):
        if self.cols != other.rows:
            raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
        right_rows: dict[int, list[tuple[int, object]]] = {}
        for i, j, v in other.nonzero():
            right_rows.setdefault(i, []).append((j, v))
        acc: dict[tuple[int, int], object] = {}
        for i, k, v in self.nonzero():
            for j, w in right_rows.get(k, ()):
                acc[(i, j)] = acc.get((i, j), 0) + v * w
        cls = RatMatrix if RatMatrix in (type(self), type(other)) else IntMatrix
        return cls(self.rows, other.cols, entries=acc)

    def __eq__(self, other) -> bool:
        if not isinstance(other, _Matrix) or self.shape != other.shape:
            return NotImplemented if not isinstance(other, _Matrix) else False
        return list(self.nonzero()) == list(other.nonzero())

    def __hash__(self):
        return hash((self.shape, tuple(self.nonzero())))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.tolist()!r})"

    def to_json(self) -> dict:
        return {"rows": self.rows, "cols": self.cols,
                "entries": [[i, j, str(v)] for i, j, v in self.nonzero()]}

    @classmethod
    def from_json(cls, payload: dict):
        entries = {(int(i), int(j)): cls._parse(v) for i, j, v in payload["entries"]}
        return cls(int(payload["rows"]), int(payload["cols"]), entries=entries)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence], cols: int | None = None):
        rows = [list(r) for r in rows]
        ncols = len(rows[0]) if rows else (cols or 0)
        return cls(len(rows), ncols, data=rows)

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence], rows: int | None = None):
        columns = [list(c) for c in columns]
        nrows = len(columns[0]) if columns else (rows or 0)
        data = [[columns[j][i] for j in range(len(columns))] for i in range(nrows)]
        return cls(nrows, len(columns), data=data)

    @classmethod
    def identity(cls, n: int):
        return cls(n, n, entries={(i, i): 1 for i in range(n)})

    @classmethod
    def zeros(cls, rows: int, cols: int):
        return cls(rows, cols, entries={})


class IntMatrix(_Matrix):
    """Integer matrix; dense below ``SPARSE_THRESHOLD`` in both directions."""

    __slots__ = ()

    @staticmethod
    def _coerce(value) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, Fraction) and value.denominator == 1:
                return int(value)
            raise TypeError(f"IntMatrix entries must be integers, got {value!r}")
        return value

    @staticmethod
    def _parse(text: str) -> int:
        return int(text)

    def det(self) -> int:
        if self.rows != self.cols:
            raise DimensionError("determinant of a non-square matrix")
        return bareiss_det(self.tolist())


class RatMatrix(_Matrix):
    """Rational matrix; entries are kept as reduced ``Fraction``s (or plain ints)."""

    __slots__ = ()

    @staticmethod
    def _coerce(value):
        if isinstance(value, bool):
            raise TypeError("boolean entry")
        if isinstance(value, int):
            return value
        if isinstance(value, Fraction):
            return _normalize(value)
        raise TypeError(f"RatMatrix entries must be exact, got {value!r}")

    @staticmethod
    def _parse(text: str):
        return _normalize(Fraction(text))


def _as_rows(m) -> list[list]:
    if isinstance(m, _Matrix):
        return m.tolist()
    return [list(r) for r in m]


def bareiss_det(rows: Sequence[Sequence[int]]) -> int:
    """Fraction-free determinant."""
    a = [list(r) for r in rows]
    n = len(a)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k]:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


# ---------------------------------------------------------------------------
# Hermite normal form
# ---------------------------------------------------------------------------

def _hnf_rows(a: list[list[int]], track: bool) -> tuple[list[list[int]], list[list[int]] | None, list[int]]:
    m = len(a)
    n = len(a[0]) if m else 0
    u = [[int(i == j) for j in range(m)] for i in range(m)] if track else None
    pivots: list[int] = []
    r = 0
    for c in range(n):
        if r == m:
            break
        for i in range(r + 1, m):
            if a[i][c] == 0:
                continue
            x, y = a[r][c], a[i][c]
            g, s, t = _elim_coeffs(x, y)
            p, q = x // g, y // g
            ra, ia = a[r], a[i]
            a[r] = [s * v + t * w for v, w in zip(ra, ia)]
            a[i] = [p * w - q * v for v, w in zip(ra, ia)]
            if track:
                ru, iu = u[r], u[i]
                u[r] = [s * v + t * w for v, w in zip(ru, iu)]
                u[i] = [p * w - q * v for v, w in zip(ru, iu)]
        if a[r][c] == 0:
            continue
        if a[r][c] < 0:
            a[r] = [-v for v in a[r]]
            if track:
                u[r] = [-v for v in u[r]]
        piv = a[r][c]
        for i in range(r):
            f = a[i][c] // piv
            if f:
                a[i] = [v - f * w for v, w in zip(a[i], a[r])]
                if track:
                    u[i] = [v - f * w for v, w in zip(u[i], u[r])]
        pivots.append(c)
        r += 1
    return a, u, pivots


def hnf(m) -> tuple[IntMatrix, IntMatrix]:
    """Row-style Hermite normal form ``h = u @ m`` with ``u`` unimodular.

    Pivots are positive and entries above each pivot lie in ``[0, pivot)``.
    """
    rows = _as_rows(m)
    ncols = m.cols if isinstance(m, _Matrix) else (len(rows[0]) if rows else 0)
    h, u, _ = _hnf_rows([list(r) for r in rows], track=True)
    return IntMatrix(len(rows), ncols, data=h), IntMatrix(len(rows), len(rows), data=u)


def hnf_basis(vectors: Sequence[Sequence[int]]) -> list[tuple[int, ...]]:
    """Canonical basis (nonzero HNF rows) of the lattice spanned by ``vectors``."""
    if not vectors:
        return []
    h, _, pivots = _hnf_rows([list(v) for v in vectors], track=False)
    return [tuple(h[i]) for i in range(len(pivots))]


def integer_kernel(rows: Sequence[Sequence[int]], ncols: int | None = None) -> list[tuple[int, ...]]:
    """Z-basis of ``{x : A x = 0}`` for the integer matrix with the given rows."""
    rows = [list(r) for r in rows]
    n = len(rows[0]) if rows else (ncols or 0)
    if not rows:
        return [tuple(int(i == j) for j in range(n)) for i in range(n)]
    at = [[rows[i][j] for i in range(len(rows))] for j in range(n)]
    h, u, pivots = _hnf_rows(at, track=True)
    basis = [tuple(u[i]) for i in range(len(pivots), n)]
    return hnf_basis(basis)


def saturate(vectors: Sequence[Sequence[int]], dim: int | None = None) -> IntMatrix:
    """Basis (as columns, HNF-canonical) of the smallest summand containing ``vectors``."""
    vectors = [list(v) for v in vectors]
    n = len(vectors[0]) if vectors else (dim or 0)
    if not vectors or not any(any(v) for v in vectors):
        return IntMatrix(n, 0, entries={})
    annihilator = integer_kernel(vectors, n)
    basis = integer_kernel(annihilator, n) if annihilator else [
        tuple(int(i == j) for j in range(n)) for i in range(n)]
    return IntMatrix.from_columns(basis, rows=n)


def saturate_rows(vectors: Sequence[Sequence[int]], dim: int) -> list[tuple[int, ...]]:
    """Same as :func:`saturate` but returning the basis as a list of tuples."""
    return [tuple(c) for c in saturate(vectors, dim).columns()]


def echelon_coordinates(basis: Sequence[Sequence[int]], v: Sequence[int]) -> list[Fraction] | None:
    """Coordinates of ``v`` in a row-echelon basis, or ``None`` if ``v`` is not in its span."""
    coeffs: list[Fraction] = []
    rest = [Fraction(x) for x in v]
    for b in basis:
        p = next(j for j, x in enumerate(b) if x)
        c = rest[p] / b[p]
        coeffs.append(c)
        if c:
            rest = [x - c * y for x, y in zip(rest, b)]
    if any(rest):
        return None
    return coeffs


# ---------------------------------------------------------------------------
# Smith normal form
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SNFResult:
    invariant_factors: tuple[int, ...]
    left_transform: IntMatrix
    right_transform: IntMatrix

    @property
    def rank(self) -> int:
        return sum(1 for d in self.invariant_factors if d)


def snf(m) -> SNFResult:
    """Smith normal form: ``left @ m @ right`` is diagonal with ``d1 | d2 | ...``."""
    a = _as_rows(m)
    nrows = len(a)
    ncols = m.cols if isinstance(m, _Matrix) else (len(a[0]) if a else 0)
    left = [[int(i == j) for j in range(nrows)] for i in range(nrows)]
    right = [[int(i == j) for j in range(ncols)] for i in range(ncols)]

    def row_combine(r, i, s, t, p, q):
        a[r], a[i] = ([s * x + t * y for x, y in zip(a[r], a[i])],
                      [p * y - q * x for x, y in zip(a[r], a[i])])
        left[r], left[i] = ([s * x + t * y for x, y in zip(left[r], left[i])],
                            [p * y - q * x for x, y in zip(left[r], left[i])])

    def col_combine(c, j, s, t, p, q):
        for mat in (a, right):
            for row in mat:
                x, y = row[c], row[j]
                row[c], row[j] = s * x + t * y, p * y - q * x

    k = 0
    while k < min(nrows, ncols):
        best = None
        for i in range(k, nrows):
            for j in range(k, ncols):
                if a[i][j] and (best is None or abs(a[i][j]) < abs(a[best[0]][best[1]])):
                    best = (i, j)
        if best is None:
            break
        i, j = best
        a[k], a[i] = a[i], a[k]
        left[k], left[i] = left[i], left[k]
        for mat in (a, right):
            for row in mat:
                row[k], row[j] = row[j], row[k]
        while True:
            for i in range(k + 1, nrows):
                if a[i][k]:
                    g, s, t = _elim_coeffs(a[k][k], a[i][k])
                    row_combine(k, i, s, t, a[k][k] // g, a[i][k] // g)
            for j in range(k + 1, ncols):
                if a[k][j]:
                    g, s, t = _elim_coeffs(a[k][k], a[k][j])
                    col_combine(k, j, s, t, a[k][k] // g, a[k][j] // g)
            if any(a[i][k] for i in range(k + 1, nrows)):
                continue
            piv = a[k][k]
            bad = next(((i, j) for i in range(k + 1, nrows) for j in range(k + 1, ncols)
                        if a[i][j] % piv), None)
            if bad is None:
                break
            i = bad[0]
            a[k] = [x + y for x, y in zip(a[k], a[i])]
            left[k] = [x + y for x, y in zip(left[k], left[i])]
        if a[k][k] < 0:
            a[k] = [-x for x in a[k]]
            left[k] = [-x for x in left[k]]
        k += 1
    factors = tuple(a[i][i] for i in range(min(nrows, ncols)))
    return SNFResult(factors, IntMatrix(nrows, nrows, data=left), IntMatrix(ncols, ncols, data=right))


# ---------------------------------------------------------------------------
# Rational linear algebra
# ---------------------------------------------------------------------------

def _use_flint(nrows: int, ncols: int) -> bool:
    return flint is not None and max(nrows, ncols) >= FLINT_THRESHOLD


def _to_fmpq(rows: Sequence[Sequence], ncols: int):
    flat = [flint.fmpq(x.numerator, x.denominator) if isinstance(x, Fraction) else x
            for r in rows for x in r]
    return flint.fmpq_mat(len(rows), ncols, flat)


def _from_fmpq(x) -> Fraction | int:
    p, q = int(x.p), int(x.q)
    return p if q == 1 else Fraction(p, q)


def rref(rows: Sequence[Sequence], ncols: int | None = None) -> tuple[list[list], list[int]]:
    """Reduced row echelon form over Q: ``(nonzero rows, pivot columns)``."""
    rows = [list(r) for r in rows]
    n = len(rows[0]) if rows else (ncols or 0)
    if not rows:
        return [], []
    if _use_flint(len(rows), n):
        r, rank = _to_fmpq(rows, n).rref()
        out = [[_from_fmpq(r[i, j]) for j in range(n)] for i in range(rank)]
        pivots = [next(j for j, x in enumerate(row) if x) for row in out]
        return out, pivots
    a = [[Fraction(x) for x in r] for r in rows]
    pivots: list[int] = []
    r = 0
    for c in range(n):
        p = next((i for i in range(r, len(a)) if a[i][c]), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(len(a)):
            if i != r and a[i][c]:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == len(a):
            break
    return [[_normalize(x) for x in a[i]] for i in range(r)], pivots


def rational_rank(m) -> int:
    rows = _as_rows(m)
    if not rows:
        return 0
    ncols = m.cols if isinstance(m, _Matrix) else len(rows[0])
    if _use_flint(len(rows), ncols):
        return _to_fmpq(rows, ncols).rank()
    return len(rref(rows, ncols)[1])


def rational_kernel(m) -> list[list]:
    """Basis of ``{x : m x = 0}`` over Q, one vector per free column."""
    rows = _as_rows(m)
    ncols = m.cols if isinstance(m, _Matrix) else (len(rows[0]) if rows else 0)
    red, pivots = rref(rows, ncols) if rows else ([], [])
    free = [j for j in range(ncols) if j not in set(pivots)]
    basis = []
    for f in free:
        x = [0] * ncols
        x[f] = 1
        for row, p in zip(red, pivots):
            x[p] = _normalize(-Fraction(row[f]))
        basis.append(x)
    return basis


def solve_exact(a, b: Sequence) -> list:
    """One solution of ``a x = b`` over Q (free variables set to zero).

    Raises :class:`NoSolution` when the system is inconsistent and
    :class:`DimensionError` when ``b`` does not match ``a``.
    """
    rows = _as_rows(a)
    if len(rows) != len(b):
        raise DimensionError(f"right-hand side has length {len(b)}, expected {len(rows)}")
    ncols = a.cols if isinstance(a, _Matrix) else (len(rows[0]) if rows else 0)
    aug = [list(r) + [v] for r, v in zip(rows, b)]
    red, pivots = rref(aug, ncols + 1)
    if pivots and pivots[-1] == ncols:
        raise NoSolution("inconsistent linear system")
    x = [0] * ncols
    for row, p in zip(red, pivots):
        x[p] = row[ncols]
    return x


def solve_many(a_rows: Sequence[Sequence], rhs_columns: Sequence[Sequence]) -> list[list]:
    """Solve ``a x = b`` for each right-hand side; ``a`` must have full column rank."""
    if not rhs_columns:
        return []
    nrows = len(a_rows)
    ncols = len(a_rows[0])
    if flint is not None:
        am = _to_fmpq(a_rows, ncols)
        red, rank = am.transpose().rref()
        if rank != ncols:
            raise DimensionError("coefficient matrix is not of full column rank")
        pivots = []
        for i in range(rank):
            pivots.append(next(j for j in range(nrows) if red[i, j] != 0))
        square = _to_fmpq([a_rows[p] for p in pivots], ncols)
        rhs = _to_fmpq([[col[p] for col in rhs_columns] for p in pivots], len(rhs_columns))
        sol = square.solve(rhs)
        out = [[_from_fmpq(sol[i, k]) for i in range(ncols)] for k in range(len(rhs_columns))]
        full = _to_fmpq(a_rows, ncols) * sol
        target = _to_fmpq([list(r) for r in zip(*rhs_columns)], len(rhs_columns))
        if full != target:
            raise NoSolution("right-hand side outside the column span")
        return out
    return [solve_exact(a_rows, col) for col in rhs_columns]


def rational_rank_rows(vectors: Sequence[Sequence]) -> int:
    return rational_rank([list(v) for v in vectors]) if vectors else 0


def primitive_part(v: Sequence[int]) -> tuple[int, ...]:
    g = 0
    for x in v:
        g = gcd(g, x)
    return tuple(v) if g in (0, 1) else tuple(x // g for x in v)


def clear_denominators(v: Sequence) -> tuple[int, ...]:
    """Smallest positive multiple of a rational vector with integer coprime entries."""
    den = 1
    for x in v:
        if isinstance(x, Fraction):
            den = den * x.denominator // gcd(den, x.denominator)
    return primitive_part([int(x * den) for x in v])

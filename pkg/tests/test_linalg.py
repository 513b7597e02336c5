from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from spmorse.linalg import (
    DimensionError,
    IntMatrix,
    NoSolution,
    RatMatrix,
    bareiss_det,
    hnf,
    hnf_basis,
    integer_kernel,
    rational_kernel,
    rational_rank,
    saturate,
    snf,
    solve_exact,
    xgcd,
)

from conftest import sympy_invariants

small_matrices = st.integers(1, 8).flatmap(
    lambda r: st.integers(1, 8).flatmap(
        lambda c: st.lists(st.lists(st.integers(-5, 5), min_size=c, max_size=c), min_size=r, max_size=r)))


def test_hnf_identity_fixed():
    h, u = hnf(IntMatrix.identity(3))
    assert h == IntMatrix.identity(3) and u == IntMatrix.identity(3)


def test_hnf_already_normal():
    h, u = hnf([[2, 0], [0, 3]])
    assert h.tolist() == [[2, 0], [0, 3]]
    assert u == IntMatrix.identity(2)


def test_hnf_small_elimination():
    h, _ = hnf([[1, 1], [1, -1]])
    assert h.row(0) == [1, 1] and h.row(1) == [0, 2]


def test_snf_examples():
    assert snf([[2, 0], [0, 3]]).invariant_factors == (1, 6)
    assert snf([[0, 0], [0, 0]]).invariant_factors == (0, 0)
    assert snf(IntMatrix.identity(3).tolist()).invariant_factors == (1, 1, 1)


def test_saturate_examples():
    assert saturate([[2, 0]]).columns() == [[1, 0]]
    assert sorted(saturate([[1, 1], [1, -1]]).columns()) == [[0, 1], [1, 0]]
    assert saturate([], dim=4).shape == (4, 0)


def test_rational_examples():
    assert rational_rank(IntMatrix.identity(4)) == 4
    assert rational_kernel([[1, 1]]) == [[-1, 1]]
    assert solve_exact([[2]], [1]) == [Fraction(1, 2)]


def test_solve_errors_are_distinct():
    with pytest.raises(NoSolution):
        solve_exact([[1], [1]], [0, 1])
    with pytest.raises(DimensionError):
        solve_exact([[1]], [1, 2])


def test_xgcd():
    g, s, t = xgcd(12, -18)
    assert g == 6 and 12 * s - 18 * t == 6


def test_matrix_json_round_trip():
    m = IntMatrix.from_rows([[1, 0, -7], [10**30, 2, 0]])
    assert IntMatrix.from_json(m.to_json()) == m
    q = RatMatrix.from_rows([[Fraction(1, 3), 2]])
    assert RatMatrix.from_json(q.to_json()) == q


def test_sparse_storage_above_threshold():
    m = IntMatrix(100, 100, entries={(3, 99): 5})
    assert m.is_sparse and m[3, 99] == 5 and m[0, 0] == 0
    assert (m.T)[99, 3] == 5


def test_int_matrix_rejects_floats():
    with pytest.raises(TypeError):
        IntMatrix.from_rows([[1.5]])


@given(small_matrices)
def test_snf_diagonalizes(rows):
    res = snf(rows)
    d = (res.left_transform @ IntMatrix.from_rows(rows) @ res.right_transform).tolist()
    facs = res.invariant_factors
    for i, row in enumerate(d):
        for j, x in enumerate(row):
            assert x == (facs[i] if i == j and i < len(facs) else 0)
    nz = [f for f in facs if f]
    assert all(b % a == 0 for a, b in zip(nz, nz[1:]))
    assert abs(res.left_transform.det()) == 1 and abs(res.right_transform.det()) == 1


@given(small_matrices)
def test_snf_matches_independent_oracle(rows):
    ours = snf(rows).invariant_factors
    assert tuple(abs(x) for x in ours) == sympy_invariants(rows)


@given(small_matrices)
def test_hnf_is_canonical_and_idempotent(rows):
    h, u = hnf(rows)
    assert (u @ IntMatrix.from_rows(rows)) == h
    assert abs(u.det()) == 1
    h2, _ = hnf(h)
    assert h2 == h
    for r in h.tolist():
        if any(r):
            p = next(j for j, x in enumerate(r) if x)
            assert r[p] > 0


@given(small_matrices)
def test_saturation_index_is_product_of_invariants(rows):
    n = len(rows[0])
    sat = saturate(rows, n)
    span = hnf_basis(rows)
    if not span:
        assert sat.cols == 0
        return
    assert sat.cols == len(span)
    # coordinates of the span basis in the saturated basis give the index
    coords = [solve_exact([list(r) for r in zip(*sat.columns())], list(v)) for v in span]
    assert all(isinstance(c, int) or c.denominator == 1 for row in coords for c in row)
    index = abs(bareiss_det([[int(c) for c in row] for row in coords]))
    prod = 1
    for d in sympy_invariants(rows):
        if d:
            prod *= d
    assert index == prod


@given(small_matrices)
def test_integer_kernel(rows):
    ker = integer_kernel(rows)
    for k in ker:
        assert all(sum(a * b for a, b in zip(r, k)) == 0 for r in rows)
    assert len(ker) == len(rows[0]) - rational_rank(rows)

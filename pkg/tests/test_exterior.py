import itertools
import random
from fractions import Fraction
from math import comb

import pytest
from sympy import Matrix

from spmorse.complexes import distinguished, seed_duals
from spmorse.exterior import (
    ContainmentError,
    Wedge3Element,
    decompose,
    decompose_rest,
    exterior3,
    orth_complement,
    rank_of,
    solve_duals,
    wedge,
    wedge3_basis,
)
from spmorse.symplectic import PreconditionError, basis_vector, form

from conftest import vec, vecs
from helpers import moved_basis


def minor_wedge(vectors):
    """Independent oracle: coordinates of v1^...^vk over sorted index tuples via sympy minors."""
    n = len(vectors[0])
    m = Matrix([list(v) for v in vectors])
    return [m[:, list(c)].det() for c in itertools.combinations(range(n), len(vectors))]


def wedge_with(amb3, u):
    """amb3 ^ u as 4-vector coordinates (index tuples sorted)."""
    n = len(u)
    trip = list(itertools.combinations(range(n), 3))
    out = {}
    for (p, q, r), c in zip(trip, amb3):
        if not c:
            continue
        for s in range(n):
            if u[s] and s not in (p, q, r):
                idx = sorted((p, q, r, s))
                sign = (-1) ** sum(1 for x in (p, q, r) if x > s)
                key = tuple(idx)
                out[key] = out.get(key, 0) + sign * c * u[s]
    return {k: v for k, v in out.items() if v}


def test_orth_complement_examples():
    s = orth_complement(vecs(["a1"], 2))
    assert s.dim == 3 and all(s.contains(v) for v in vecs(["a1", "a2", "b2"], 2))
    assert orth_complement([], 3).dim == 6
    s = orth_complement(vecs(["a1", "b1"], 3))
    assert s.dim == 4 and not s.contains(vec("a1", 3))


def test_exterior3_matches_minor_oracle():
    rng = random.Random(2)
    for _ in range(20):
        n = rng.randint(3, 6)
        vs = [[rng.randint(-3, 3) for _ in range(n)] for _ in range(3)]
        assert list(exterior3(vs)[0]) == minor_wedge(vs)


def test_wedge_alternation():
    g = 3
    u, v, w = vecs(["a1", "a2", "b3"], g)
    assert wedge(u, u, w).is_zero()
    assert wedge(u, v, w) == -wedge(v, u, w)
    assert len(wedge3_basis(orth_complement([], g))) == comb(6, 3)


def test_rewrite_round_trip():
    g = 3
    small = orth_complement(vecs(["a1"], g))
    full = orth_complement([], g)
    e = wedge(*vecs(["a1", "a2", "b3"], g), carrier=small)
    up = e.rewrite(full)
    assert up == wedge(*vecs(["a1", "a2", "b3"], g))
    assert Wedge3Element.from_ambient(small, up.to_ambient()) == e
    with pytest.raises(ContainmentError):
        wedge(*vecs(["b1", "a2", "b3"], g), carrier=small)


def test_rewrite_is_functorial():
    g = 3
    rng = random.Random(4)
    inner = orth_complement(vecs(["a1", "a2"], g))
    mid = orth_complement(vecs(["a1"], g))
    full = orth_complement([], g)
    for _ in range(10):
        e = Wedge3Element.from_dense(inner, [rng.randint(-2, 2) for _ in range(comb(inner.dim, 3))])
        assert e.rewrite(mid).rewrite(full) == e.rewrite(full)


def test_decompose_standard_dims():
    A = [basis_vector(4, "a", j) for j in range(1, 5)]
    B = [basis_vector(4, "b", j) for j in range(1, 5)]
    assert decompose([], A, B).dims == (35, 15, 5, 1)


def test_decompose_second_component_seed():
    G = 5
    dec = decompose([], distinguished(2, G), seed_duals(2, G), [basis_vector(G, "b", 1)])
    assert sum(dec.dims) == comb(2 * G - 1, 3)


def test_decompose_rejects_bad_input():
    g = 4
    ws = vecs(["b1", "a2", "a3", "a4"], g)
    with pytest.raises(PreconditionError):
        decompose(vecs(["a1"], g), ws)


def test_decompose_rest_examples():
    A = [basis_vector(4, "a", j) for j in range(1, 5)]
    B = [basis_vector(4, "b", j) for j in range(1, 5)]
    rest = decompose_rest([], A, B)
    assert rest[1] == []
    assert [(m, arr.shape[0]) for m, arr in rest[2]] == [(1, 20)]
    dec = decompose([], A, B)
    assert dec.dims[1] + 20 == comb(7, 3)
    rows = dec.summands[1].tolist() + rest[2][0][1].tolist()
    assert rank_of(rows) == 35


def test_kernel_characterization():
    A = [basis_vector(4, "a", j) for j in range(1, 5)]
    B = [basis_vector(4, "b", j) for j in range(1, 5)]
    dec = decompose([], A, B)
    for r in dec.summands[1].tolist():
        assert not wedge_with(r, B[0])
    for r in dec.summands[2].tolist():
        assert not wedge_with(r, B[0]) and not wedge_with(r, B[1])


def test_decompose_random_simplices():
    rng = random.Random(9)
    for seed in range(6):
        g = 6
        a, _ = moved_basis(g, seed)
        nw = rng.randint(0, 2)
        w, ws = a[:nw], a[nw:nw + 4]
        duals = solve_duals(w, ws)
        assert all(form(x, u) == (l == j) for l, x in enumerate(ws) for j, u in enumerate(duals))
        assert all(isinstance(c, (int, Fraction)) for u in duals for c in u)
        dec = decompose(w, ws, duals)
        assert sum(dec.dims) == comb(2 * g - nw, 3)
        rest = decompose_rest(w, ws, duals)
        assert set(rest) == {1, 2, 3, 4}

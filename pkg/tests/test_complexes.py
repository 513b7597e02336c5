import itertools
import random

import pytest

from spmorse.complexes import (
    INF,
    ComplexSpec,
    FiniteComplex,
    LinkMoveError,
    SimplicialMapRecord,
    assign_wstar,
    close_faces,
    connect_path,
    degenerate_relation,
    distinguished,
    enumerate_truncation,
    filtration_level,
    is_simplex,
    join,
    link_move,
    link_of,
    regular_bad,
    seed_duals,
    wstar_violations,
)
from spmorse.symplectic import (
    LatticeVector,
    PreconditionError,
    form,
    rank_b,
)

from conftest import vec, vecs
from helpers import gcd2_zero_simplex, level_simplex

L2 = ComplexSpec("L", 2)


def test_is_simplex_examples():
    assert is_simplex(L2, vecs(["a1", "a2"], 2))
    verdict = is_simplex(L2, vecs(["a1", "b1"], 2))
    assert not verdict and verdict.reason == "not isotropic at pair (0,1)"
    verdict = is_simplex(L2, vecs(["a1", "a1+2a2"], 2))
    assert not verdict and verdict.reason == "gcd = 2"


def test_a1_rank_and_order_conditions():
    spec = ComplexSpec("L_a1", 3)
    assert is_simplex(spec, vecs(["a1", "a1+a2"], 3))
    assert "a1-rank" in is_simplex(spec, vecs(["a1", "a2"], 3)).reason
    ordered = ComplexSpec("L_ordered", 3, {"i": 1})
    assert is_simplex(ordered, vecs(["a2", "a1"], 3))
    assert not is_simplex(ordered, vecs(["a1", "a2"], 3))


def test_spec_validation_and_json():
    with pytest.raises(ValueError):
        ComplexSpec("F", 3, {"i": 1})
    with pytest.raises(ValueError):
        ComplexSpec("nonsense", 3)
    spec = ComplexSpec("F", 5, {"i": 2, "k": INF})
    assert ComplexSpec.from_json(spec.to_json()) == spec


def test_join_and_link():
    assert join(vecs(["a1"], 2), vecs(["a2"], 2)) == tuple(vecs(["a1", "a2"], 2))
    pool_vs = sorted(vecs(["a2", "b1"], 2))
    pool = FiniteComplex(2, 1, 0, pool_vs, [(0,), (1,)])
    assert link_of(L2, vecs(["a1"], 2), pool) == [(vec("a2", 2),)]
    assert len(link_of(L2, [], pool)) == 2
    with pytest.raises(PreconditionError):
        link_of(L2, vecs(["a1", "b1"], 2), pool)


def test_filtration_level_examples():
    assert filtration_level(vec("a6", 7), 1) == 5
    assert filtration_level(vec("a1", 7), 1) == INF
    assert filtration_level(vec("a1+a6+2b6", 7), 2) == 5
    assert filtration_level(vec("a4+a5", 7), 1) == 4
    assert filtration_level(vec("a1+b1+2a2", 7), 2) == 0


def test_seed_vectors():
    A = distinguished(2, 5)
    B = seed_duals(2, 5)
    assert A[1] == vec("a1+a2", 5)
    assert B[0] == vec("b1-b2-b3-b4", 5)
    assert all(form(a, b) == int(i == j) for i, a in enumerate(A) for j, b in enumerate(B))


# -- w* assignment --------------------------------------------------------------

def test_assign_wstar_level_four():
    g = 7
    w = [vec("a4+a5", g)]
    ws = assign_wstar(w, 1, 4, g)
    assert ws[:3] == tuple(vecs(["a1", "a2", "a3"], g))
    assert all(filtration_level(v, 1) >= 5 and form(v, w[0]) == 0 for v in ws[3:])
    assert wstar_violations(w, ws, 1, 4, g) == []


def test_assign_wstar_empty_simplex():
    g = 7
    ws = assign_wstar([], 1, 2, g)
    # the empty simplex has dimension -1
    assert len(ws) == g - 2 + 1
    assert filtration_level(list(ws), 1) >= 3


def test_assign_wstar_b1_rank_condition():
    g = 7
    for t in (-2, 0, 3):
        w = [vec("a1+2a2", g + 1) + t * vec("b1", g + 1)]
        assert filtration_level(w, 2) == 0
        ws = assign_wstar(w, 2, 0, g)
        assert all(rank_b(v, 1) == t for v in ws)
        assert wstar_violations(w, ws, 2, 0, g) == []


def test_assign_wstar_rejects_wrong_level():
    with pytest.raises(PreconditionError):
        assign_wstar([vec("a6", 7)], 1, 3, 7)
    with pytest.raises(PreconditionError):
        assign_wstar([], 1, INF, 7)


def test_assign_wstar_random_levels():
    rng = random.Random(3)
    checked = 0
    for _ in range(60):
        i = rng.choice([1, 2])
        g = 8 - i
        k = rng.choice([1, 2, 3, 4, 5] if i == 1 else [0, 1, 2, 3, 4, 5])
        w = level_simplex(rng, i, g, k, rng.randint(1, 2))
        if w is None:
            continue
        lvl = filtration_level(w, i)
        if lvl == INF:
            continue
        ws = assign_wstar(w, i, lvl, g)
        assert wstar_violations(w, ws, i, lvl, g) == []
        assert assign_wstar(w, i, lvl, g) == ws
        checked += 1
    assert checked > 30


# -- connecting paths -------------------------------------------------------

def test_connect_path_via_distinguished():
    G = 7
    path = connect_path(vec("a2+b3", G), [], 2, vec("a4", G), vec("b4+a5", G), 1)
    assert path == vecs(["a4", "a1", "b4+a5"], G)


def test_connect_path_trivial_and_revalidated():
    G = 7
    assert connect_path(vec("a2+b3", G), [], 2, vec("a4", G), vec("a4", G), 1) == [vec("a4", G)]
    x, zs = vec("a3+b4", G), vecs(["b1", "b2"], G)
    path = connect_path(x, zs, 3, vec("a5", G), vec("b5+a6", G), 1)
    spec = ComplexSpec("conn", G, {"i": 1, "x": x, "z": zs, "k": 3})
    assert path[0] == vec("a5", G) and path[-1] == vec("b5+a6", G)
    for u, v in zip(path, path[1:]):
        assert is_simplex(spec, sorted([u, v]))


def test_connect_path_second_component():
    G = 8
    x = vec("a1+a2+b3", G)
    path = connect_path(x, [vec("b6", G)], 2, vec("a1+a4", G), vec("a1+b4+a5", G), 2)
    assert len(path) <= 3 and path[0] == vec("a1+a4", G)
    x = vec("a1+b1+a2", G)
    assert filtration_level(x, 2) == 1
    path = connect_path(x, [], 1, vec("a1+b2+a3", G), vec("a1+b2+b3", G), 2)
    assert path[-1] == vec("a1+b2+b3", G)


def test_connect_path_rejects_bad_endpoint():
    G = 7
    with pytest.raises(PreconditionError):
        connect_path(vec("a2+b3", G), [], 2, vec("b2", G), vec("a4", G), 1)


# -- degenerate relation and regular-bad predicates --------------------------

def test_degenerate_relation_examples():
    coeffs, s, t = degenerate_relation(vecs(["a1+a2", "a1+2a2"], 3))
    assert (coeffs, s, t) == ([2, -1], 1, 0)
    assert degenerate_relation(vecs(["a1+b1+a2", "a1+b1+2a2"], 3))[2] == 1
    with pytest.raises(PreconditionError):
        degenerate_relation(vecs(["a1+a2"], 3))


def test_degenerate_relation_random():
    rng = random.Random(8)
    for _ in range(40):
        delta, t, _, _ = gcd2_zero_simplex(rng, 5)
        coeffs, s, tt = degenerate_relation(delta)
        assert s == 1 and tt == t
        total = sum((c * v for c, v in zip(coeffs, delta)), LatticeVector([0] * 10))
        assert total == vec("a1", 5) + t * vec("b1", 5)
        from math import gcd
        from functools import reduce
        assert reduce(gcd, coeffs) == 1


def test_regular_bad_modes():
    g = 3
    y = vec("b1", g)
    assert regular_bad(vecs(["3a1", "-3a1+a2"], g), "rank", y=y, R=3)
    assert not regular_bad(vecs(["3a1", "a2"], g), "rank", y=y, R=3)
    delta = vecs(["a1+a2", "a1+2a2"], g)
    assert regular_bad(delta, "gcd2_zero")
    assert regular_bad(vecs(["a1+b1+a2"], g), "b1", t=0)
    with pytest.raises(ValueError):
        regular_bad(delta, "rank")


# -- enumeration ----------------------------------------------------------------

def test_enumerate_vertex_count_matches_brute_force():
    cx = enumerate_truncation(2, 1, 1, 0)
    brute = [v for v in itertools.product(range(-1, 2), repeat=4) if any(v)]
    assert len(cx.vertices) == len(brute) == 80
    assert cx.vertices == sorted(cx.vertices)


def test_enumerate_empty_box():
    cx = enumerate_truncation(2, 1, 0, 2)
    assert cx.vertices == [] and cx.simplices == []


@pytest.mark.parametrize("i", [1, 2])
def test_enumeration_is_a_multicomplex(i):
    cx = enumerate_truncation(2, i, 1, 2, max_vertices=30)
    assert cx.is_closed()
    spec = ComplexSpec("L" if i == 1 else "L_a1", cx.ambient_genus)
    for s in cx.simplices:
        vs = cx.realize(s)
        for r in range(1, len(vs) + 1):
            for sub in itertools.combinations(vs, r):
                assert is_simplex(spec, list(sub))
        for perm in itertools.permutations(vs):
            assert is_simplex(spec, list(perm))


def test_enumeration_caps_flag_partial():
    cx = enumerate_truncation(2, 1, 1, 2, max_vertices=5)
    assert cx.partial and cx.is_closed()


def test_finite_complex_json_round_trip():
    cx = enumerate_truncation(2, 2, 1, 1, max_vertices=10)
    again = FiniteComplex.from_json(cx.to_json())
    assert again.digest() == cx.digest()


# -- link moves -------------------------------------------------------------

def _triangle_map():
    g = 3
    source = close_faces([("u", "v"), ("v", "w"), ("w", "u")])
    assignment = {"u": vec("a1", g), "v": vec("a2", g), "w": vec("a3", g)}
    return SimplicialMapRecord(source, ComplexSpec("L", g), assignment, ["u", "v", "w"]), g


def test_link_move_replaces_vertex():
    fmap, g = _triangle_map()
    ball = close_faces([("u", "x"), ("x", "w")])
    out = link_move(fmap, ["v"], ball, {"u": vec("a1", g), "w": vec("a3", g), "x": vec("b2", g)})
    edges = {s for s in out.source if len(s) == 2}
    assert edges == {frozenset("ux"), frozenset("xw"), frozenset("wu")}
    assert "v" not in out.assignment and out.invalid_images() == []


def test_link_move_rejects_disagreeing_phi():
    fmap, g = _triangle_map()
    ball = close_faces([("u", "x"), ("x", "w")])
    with pytest.raises(LinkMoveError):
        link_move(fmap, ["v"], ball, {"u": vec("b1", g), "w": vec("a3", g), "x": vec("b2", g)})
    with pytest.raises(LinkMoveError):
        link_move(fmap, ["v"], close_faces([("u", "x")]), {"u": vec("a1", g), "x": vec("b2", g)})


def test_link_move_on_octahedron_revalidates():
    g = 4
    labels = ["p", "q", "r", "s", "n", "m"]
    facets = [(e, x, y) for e in "nm" for x, y in [("p", "q"), ("q", "r"), ("r", "s"), ("s", "p")]]
    source = close_faces(facets)
    assignment = dict(zip(labels, vecs(["a1", "a2", "b1", "b2", "a3", "a4"], g)))
    fmap = SimplicialMapRecord(source, ComplexSpec("L", g), assignment, labels)
    assert fmap.invalid_images() == []
    # replace the north pole by a cone on its link with a fresh apex
    ball = close_faces([("c", x, y) for x, y in [("p", "q"), ("q", "r"), ("r", "s"), ("s", "p")]])
    phi = {k: assignment[k] for k in "pqrs"} | {"c": vec("b3", g)}
    out = link_move(fmap, ["n"], ball, phi)
    assert "n" not in out.assignment and out.assignment["c"] == vec("b3", g)
    assert len([s for s in out.source if len(s) == 3]) == 8
    assert out.invalid_images() == []

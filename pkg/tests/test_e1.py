import json
import random
from fractions import Fraction
from math import comb

import pytest

from spmorse.complexes import distinguished, enumerate_truncation
from spmorse.e1 import (
    RESOURCE_ENV,
    E1Config,
    assemble,
    build_e1,
    build_field_deg01,
    certify,
    construction_closure,
    differential,
    elements_equal,
    extend_field_deg2,
    gradient_path_bound,
    help_vector,
    level_seeds,
    max_cells,
    pair_ordering_pass,
    sp_act,
    verify_certificate,
)
from spmorse.exterior import Wedge3Element
from spmorse.linalg import IntMatrix
from spmorse.symplectic import LatticeVector, PreconditionError, apply, is_symplectic, random_symplectic

from conftest import vec, vecs


def pairing(u, v) -> Fraction:
    return sum(Fraction(u[2 * k]) * v[2 * k + 1] - Fraction(u[2 * k + 1]) * v[2 * k] for k in range(len(u) // 2))


def toy(g: int, i: int):
    cfg = E1Config(g, i)
    cx = enumerate_truncation(g, i, 0, 3, vertices=distinguished(i, cfg.G))
    tr = build_e1(cfg, cx)
    return cfg, tr


def random_element(cfg, vectors, rng):
    car = cfg.carrier(vectors)
    return {tuple(vectors): Wedge3Element.from_dense(car, [rng.randint(-2, 2) for _ in range(comb(car.dim, 3))])}


@pytest.mark.parametrize("g,i", [(3, 1), (3, 2)])
def test_build_e1_squares_to_zero(g, i):
    cx = enumerate_truncation(g, i, 1, 3, max_vertices=10)
    tr = build_e1(E1Config(g, i), cx)
    assert tr.chain.dd_violations() == []
    for p, ss in tr.blocks.items():
        assert tr.chain.dim(p) == sum(comb(tr.carrier(s).dim, 3) for s in ss)


def test_build_e1_rejects_mismatched_config():
    cx = enumerate_truncation(3, 1, 0, 1, max_vertices=4)
    with pytest.raises(PreconditionError):
        build_e1(E1Config(3, 2), cx)


@pytest.mark.parametrize("g,i", [(3, 1), (3, 2)])
def test_differential_is_equivariant(g, i):
    rng = random.Random(7)
    cfg = E1Config(g, i)
    cx = enumerate_truncation(g, i, 1, 2, max_vertices=10)
    for s in cx.of_dim(2)[:3]:
        e = random_element(cfg, cx.realize(s), rng)
        M = random_symplectic(cfg.G, rng.randrange(1000), 6, fix_b1=(i == 2))
        assert elements_equal(differential(cfg, sp_act(cfg, M, e)), sp_act(cfg, M, differential(cfg, e)))
        assert elements_equal(differential(cfg, differential(cfg, e)), {})


def test_action_rejects_bad_matrices():
    cfg = E1Config(2, 2)
    n = 2 * cfg.G
    e = random_element(cfg, vecs(["a1"], cfg.G), random.Random(1))
    scale = IntMatrix.from_rows([[2 if r == c == 0 else int(r == c) for c in range(n)] for r in range(n)])
    with pytest.raises(PreconditionError, match="symplectic"):
        sp_act(cfg, scale, e)
    b1 = vec("b1", cfg.G)
    moved = next(M for M in (random_symplectic(cfg.G, seed, 6) for seed in range(50)) if apply(M, b1) != b1)
    assert is_symplectic(moved)
    with pytest.raises(PreconditionError, match="b1"):
        sp_act(cfg, moved, e)


def test_distinguished_toy_certifies_and_is_exact():
    cfg, tr = toy(4, 1)
    f = extend_field_deg2(build_field_deg01(tr))
    cert = certify(f, tr)
    assert cert["counts"] == {"certified": 11, "unconstructed": 0, "failed": 0}
    assert cert["exactness"]["value"] is True and cert["exactness"]["agree"] is True
    assert cert["matching"]["valid"]
    assert f.matching_summary() == {"0": 56, "1": 84, "2": 36}


def test_assembled_matching_is_valid_on_toy():
    from spmorse.morse import validate_matching

    _, tr = toy(3, 2)
    f = extend_field_deg2(build_field_deg01(tr))
    chain, matching = assemble(f)
    assert chain.dd_violations() == []
    assert validate_matching(chain, matching)


def test_tampered_field_is_not_certified():
    _, tr = toy(4, 1)
    f = extend_field_deg2(build_field_deg01(tr))
    blk = f.blocks[f.pairs[0].source]
    n = blk.roles.index(("redundant", 0))
    del blk.rows[n], blk.roles[n]
    cert = certify(f, tr)
    empty = next(s for s in cert["summands"] if s["degree"] == 0)
    assert empty["status"] == "failed"
    assert not cert["matching"]["valid"]


def test_missing_wstar_vertices_leave_summand_unconstructed():
    cfg = E1Config(7, 1)
    x = LatticeVector([0, 0, 1, 0, 0, 1, 1, 0, 0, 0, 1, -1, 0, 1])
    cx = enumerate_truncation(7, 1, 0, 1, vertices=list(distinguished(1, cfg.G)) + [x])
    f = build_field_deg01(cx, cfg)
    st = f.status[(cx.index(x),)]
    assert st.status == "unconstructed"
    assert "missing" in st.reason
    assert certify(f)["counts"]["failed"] == 0


def test_help_vector_postcondition():
    G = 7
    x = vec("a1+b2", G)
    vs = vecs(["a1+a3", "a1+b3+b4"], G)
    u = help_vector(x, vs)
    assert u[:2] == (0, 0)
    for v in [x] + vs:
        assert pairing(v, u) == 1
        b1 = vec("b1", G)
        diff = [Fraction(b1[k]) - Fraction(u[k]) for k in range(2 * G)]
        assert pairing(diff, v) == 0


def test_certificate_is_deterministic_and_reproducible():
    _, tr = toy(3, 2)
    certs = [certify(extend_field_deg2(build_field_deg01(tr)), tr) for _ in range(2)]
    assert json.dumps(certs[0], sort_keys=True) == json.dumps(certs[1], sort_keys=True)
    f = extend_field_deg2(build_field_deg01(tr))
    assert verify_certificate(certs[0], f, tr)


def test_closure_paths_are_short():
    cfg = E1Config(7, 1)
    cx = construction_closure(cfg, level_seeds(cfg, 1, seed=3))
    f = build_field_deg01(cx, cfg)
    assert all(st.status == "certified" for st in f.status.values())
    summary = gradient_path_bound(f, 1)
    assert summary.terminates
    assert summary.max_length == 3


def test_pair_ordering_pass_needs_spare_distinguished_vertices():
    _, tr = toy(4, 1)
    report = pair_ordering_pass(build_field_deg01(tr))
    assert not report["valid"]
    assert any("genus" in x for x in report["issues"])


def test_pair_ordering_pass_is_locally_valid():
    cfg = E1Config(8, 1, distinguished_size=8)
    cx = construction_closure(cfg, [vec("a5+b6", cfg.G)])
    report = pair_ordering_pass(build_field_deg01(cx, cfg))
    assert report["valid"], report["issues"][:3]
    assert report["edges"] == len(cx.of_dim(1))


def test_cell_budget_from_environment(monkeypatch):
    monkeypatch.setenv(RESOURCE_ENV, "10")
    assert max_cells() == 10
    _, tr = toy(3, 2)
    f = extend_field_deg2(build_field_deg01(tr))
    with pytest.raises(PreconditionError, match=RESOURCE_ENV):
        assemble(f)
    cert = certify(f, tr)
    assert cert["exactness"]["checked"] is False


def test_config_json_round_trip():
    cfg = E1Config(6, 2, distinguished_size=7, cap_steps=10)
    assert E1Config.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg
    with pytest.raises(PreconditionError):
        E1Config(5, 3)

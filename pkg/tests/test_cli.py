import json
import subprocess
import sys

import pytest

from spmorse.cli import main
from spmorse.morse import BasedChainComplex, Matching

ORDERED = json.dumps({"tag": "L_ordered", "g": 3, "params": {"i": 1}})


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_gcd(capsys):
    assert run(capsys, "gcd", '["2a1"]', "--genus", "2")[:2] == (0, "2\n")
    assert run(capsys, "gcd", '{"g": 2, "vectors": ["2a1", "4b2"]}')[:2] == (0, "8\n")


def test_simplex_check(capsys):
    code, out, _ = run(capsys, "simplex", "check", ORDERED, '["a2", "a1"]')
    assert (code, out) == (0, "simplex\n")
    code, out, _ = run(capsys, "simplex", "check", ORDERED, '["a2", "b2"]')
    assert code == 1
    assert "not isotropic at pair (0,1)" in out


def test_exit_codes(capsys):
    code, _, err = run(capsys, "gcd", '["a1", ')
    assert code == 3 and "line 1 column" in err
    code, _, err = run(capsys, "gcd", '["a1"]')
    assert code == 2 and "genus" in err
    assert run(capsys, "path", "connect", '{"g": 3, "x": "a2", "z": [], "k": 1, "v1": "a1", "v2": "a3"}')[0] == 2


def test_enumerate_counts(capsys):
    code, out, _ = run(capsys, "enumerate", '{"g": 2, "box": 1, "max_dim": 1}')
    body = json.loads(out)
    assert code == 0
    assert len(body["vertices"]) == 80


def test_e1_certify_and_verify(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"g": 4, "i": 1, "truncation": "distinguished", "max_dim": 3,
                               "degree2": True, "exactness": True}))
    cert = tmp_path / "cert.json"
    code, out, _ = run(capsys, "e1", "certify", str(cfg), "--output", str(cert))
    assert code == 0 and out == ""
    body = json.loads(cert.read_text())
    assert body["counts"]["certified"] == 11
    assert body["exactness"]["agree"] is True
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".tmp-")] == []
    code, out, _ = run(capsys, "e1", "certify", str(cfg), "--verify", str(cert))
    assert (code, out) == (0, "certificate reproduced\n")


def test_e1_build_needs_four_distinguished_vertices(capsys):
    code, _, err = run(capsys, "e1", "build", '{"g": 3, "i": 1, "truncation": "distinguished"}')
    assert code == 2 and err


def test_morse_commands(capsys, tmp_path):
    c = BasedChainComplex.from_matrices({0: 1, 1: 1}, {1: [[1]]})
    cx = tmp_path / "c.json"
    cx.write_text(json.dumps(c.to_json()))
    good = json.dumps(Matching.of([((0, 0), (1, 0))]).to_json())
    code, out, _ = run(capsys, "morse", "validate", str(cx), good)
    assert code == 0 and json.loads(out)["valid"]
    code, out, _ = run(capsys, "morse", "homology", str(cx))
    assert json.loads(out)["betti"] == {"0": 0, "1": 0}
    code, out, _ = run(capsys, "morse", "paths", str(cx), good)
    assert code == 0 and json.loads(out)["paths"][0]["max_length"] >= 1
    twice = BasedChainComplex.from_matrices({0: 1, 1: 1}, {1: [[2]]})
    cx.write_text(json.dumps(twice.to_json()))
    code, out, _ = run(capsys, "morse", "homology", str(cx))
    assert json.loads(out)["torsion"]["0"] == [2]


def test_path_connect(capsys):
    args = json.dumps({"g": 7, "x": "a2+b3", "z": ["b1"], "k": 2, "v1": "a4", "v2": "b4+a5"})
    code, out, _ = run(capsys, "path", "connect", args)
    assert code == 0
    assert json.loads(out)["path"] == ["a4", "a6", "b4+a5"]


def test_output_is_byte_identical_across_processes(tmp_path):
    argv = [sys.executable, "-m", "spmorse", "enumerate", '{"g": 2, "box": 1, "max_dim": 1}']
    outs = [subprocess.run(argv, capture_output=True, check=True).stdout for _ in range(2)]
    assert outs[0] == outs[1]
    assert outs[0]


@pytest.mark.parametrize("argv", [["--help"], ["e1", "--help"]])
def test_help(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 0


def test_simplex_check_reports_order(capsys):
    code, out, _ = run(capsys, "simplex", "check", ORDERED, '["a1", "a2"]')
    assert code == 1 and "ascending order" in out

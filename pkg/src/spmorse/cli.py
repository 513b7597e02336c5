"""Command-line front end.

Exit codes: 0 success, 1 validation or construction failure, 2 precondition
error, 3 malformed JSON input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import Any, Sequence

from .complexes import ComplexSpec, FiniteComplex, connect_path, distinguished, enumerate_truncation, is_simplex
from .e1 import (
    E1Config,
    build_e1,
    build_field_deg01,
    certify,
    construction_closure,
    extend_field_deg2,
    level_seeds,
)
from .morse import BasedChainComplex, Matching, gradient_paths, homology, snf_homology, validate_matching
from .symplectic import (
    ConstructionError,
    LatticeVector,
    PreconditionError,
    dual_summand,
    format_vector,
    gcd_tuple,
    parse_vector,
)

EXIT_OK, EXIT_INVALID, EXIT_PRECONDITION, EXIT_JSON = 0, 1, 2, 3


class MalformedInput(Exception):
    pass


@dataclass
class RunConfig:
    g: int
    i: int = 1
    box: int = 1
    max_dim: int = 2
    seed: int = 0
    cap_steps: int = 64
    max_vertices: int | None = None
    max_simplices: int | None = None
    output: str | None = None

    def __post_init__(self):
        if self.g < 1:
            raise PreconditionError("genus must be at least 1")
        if self.box < 0:
            raise PreconditionError("box bound must be non-negative")
        for name in ("cap_steps", "max_vertices", "max_simplices"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise PreconditionError(f"{name} must be positive")


# ---------------------------------------------------------------------------
# Input helpers
# ---------------------------------------------------------------------------

def load_json(arg: str) -> Any:
    """Read JSON from a file path, ``-`` for stdin, or an inline literal."""
    if arg == "-":
        text, where = sys.stdin.read(), "<stdin>"
    elif os.path.exists(arg):
        with open(arg, encoding="utf-8") as fh:
            text, where = fh.read(), arg
    elif arg.lstrip()[:1] in "[{\"" and arg.strip():
        text, where = arg, "<inline>"
    else:
        raise PreconditionError(f"no such file: {arg}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"malformed JSON in {where} at line {exc.lineno} column {exc.colno} "
                             f"(char {exc.pos}): {exc.msg}") from None


def _genus(payload: Any, override: int | None) -> int | None:
    if override is not None:
        return override
    if isinstance(payload, dict):
        for key in ("g", "genus"):
            if key in payload:
                return int(payload[key])
    return None


def to_vector(item: Any, g: int | None) -> LatticeVector:
    if isinstance(item, str):
        if g is None:
            raise PreconditionError(f"a genus is needed to parse {item!r}")
        return parse_vector(item, g)
    if isinstance(item, dict) and "coords" in item:
        return LatticeVector.from_json(item)
    if isinstance(item, list):
        v = LatticeVector(int(c) for c in item)
        if g is not None and len(v) != 2 * g:
            raise PreconditionError(f"vector has {len(v)} coordinates, expected {2 * g}")
        return v
    raise PreconditionError(f"cannot read a vector from {item!r}")


def to_vectors(payload: Any, g: int | None) -> list[LatticeVector]:
    items = payload.get("vectors", payload.get("simplex")) if isinstance(payload, dict) else payload
    if not isinstance(items, list):
        raise PreconditionError("expected a list of vectors")
    return [to_vector(v, g) for v in items]


def emit(obj: Any, output: str | None = None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if output is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(output)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, output)


def run_config(payload: dict, args: argparse.Namespace) -> RunConfig:
    def pick(name: str, flag: str, default):
        v = getattr(args, flag, None)
        if v is not None:
            return v
        return payload.get(name, default)

    g = pick("g", "genus", None)
    if g is None:
        raise PreconditionError("configuration needs a genus")
    return RunConfig(
        g=int(g), i=int(pick("i", "component_index", 1)), box=int(pick("box", "box", 1)),
        max_dim=int(payload.get("max_dim", 2)), seed=int(pick("seed", "seed", 0)),
        cap_steps=int(pick("cap_steps", "cap_steps", 64)),
        max_vertices=payload.get("max_vertices"), max_simplices=payload.get("max_simplices"),
        output=getattr(args, "output", None),
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_gcd(args) -> int:
    payload = load_json(args.vectors)
    vs = to_vectors(payload, _genus(payload, args.genus))
    print(gcd_tuple(vs))
    return EXIT_OK


def cmd_dual(args) -> int:
    payload = load_json(args.vectors)
    vs = to_vectors(payload, _genus(payload, args.genus))
    sd = dual_summand(vs)
    problems = sd.violations()
    body = sd.to_json()
    body["violations"] = problems
    emit(body, args.output)
    return EXIT_INVALID if problems else EXIT_OK


def cmd_simplex_check(args) -> int:
    spec_payload = load_json(args.spec)
    if isinstance(spec_payload, dict) and "tag" in spec_payload:
        if args.genus is not None:
            spec_payload = dict(spec_payload, g=args.genus)
        spec = ComplexSpec.from_json(spec_payload)
    else:
        raise PreconditionError("complex specification needs a tag")
    simplex = to_vectors(load_json(args.simplex), spec.g)
    verdict = is_simplex(spec, simplex)
    if verdict:
        print("simplex")
        return EXIT_OK
    print(verdict.reason)
    return EXIT_INVALID


def cmd_enumerate(args) -> int:
    payload = load_json(args.config)
    rc = run_config(payload, args)
    cx = enumerate_truncation(rc.g, rc.i, rc.box, rc.max_dim, rc.max_vertices, rc.max_simplices)
    body = cx.to_json()
    body["digest"] = cx.digest()
    body["notes"] = cx.notes
    emit(body, rc.output)
    return EXIT_OK


def _truncation(payload: dict, rc: RunConfig, cfg: E1Config) -> FiniteComplex:
    if "complex" in payload:
        source = payload["complex"]
        return FiniteComplex.from_json(load_json(source) if isinstance(source, str) else source)
    kind = payload.get("truncation", "box")
    if kind == "box":
        return enumerate_truncation(rc.g, rc.i, rc.box, rc.max_dim, rc.max_vertices, rc.max_simplices)
    if kind == "closure":
        if "seeds" in payload:
            seeds = [to_vector(v, cfg.G) for v in payload["seeds"]]
        else:
            seeds = level_seeds(cfg, int(payload.get("per_level", 1)), rc.seed)
        return construction_closure(cfg, seeds, int(payload.get("wstar_size", 4)))
    if kind == "distinguished":
        return enumerate_truncation(rc.g, rc.i, 0, rc.max_dim, vertices=distinguished(rc.i, cfg.G))
    raise PreconditionError(f"unknown truncation kind {kind!r}")


def cmd_e1_build(args) -> int:
    payload = load_json(args.config)
    rc = run_config(payload, args)
    cfg = E1Config(rc.g, rc.i, int(payload.get("distinguished_size", 6)), rc.cap_steps)
    t = build_e1(cfg, _truncation(payload, rc, cfg), payload.get("max_degree"))
    emit(t.to_json(), rc.output)
    return EXIT_OK


def cmd_e1_certify(args) -> int:
    payload = load_json(args.config)
    rc = run_config(payload, args)
    cfg = E1Config(rc.g, rc.i, int(payload.get("distinguished_size", 6)), rc.cap_steps)
    cx = _truncation(payload, rc, cfg)
    field_ = build_field_deg01(cx, cfg)
    degrees = (0, 1)
    if payload.get("degree2", False):
        field_ = extend_field_deg2(field_)
        degrees = (0, 1, 2)
    truncation = None
    if payload.get("exactness", False):
        truncation = build_e1(cfg, cx, max(degrees) + 1)
    cert = certify(field_, truncation, degrees=degrees)
    if args.verify:
        stored = load_json(args.verify)
        same = json.dumps(stored, sort_keys=True) == json.dumps(cert, sort_keys=True)
        print("certificate reproduced" if same else "certificate differs")
        return EXIT_OK if same else EXIT_INVALID
    emit(cert, rc.output)
    ok = not cert["matching"]["issues"] and not cert["counts"]["failed"] and all(
        p["terminates"] for p in cert["paths"].values())
    return EXIT_OK if ok else EXIT_INVALID


def _load_complex(arg: str) -> BasedChainComplex:
    payload = load_json(arg)
    try:
        return BasedChainComplex.from_json(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise PreconditionError(f"not a based chain complex: {exc}") from None


def cmd_morse(args) -> int:
    c = _load_complex(args.complex)
    m = Matching.from_json(load_json(args.matching)) if args.matching else Matching(())
    if args.action == "validate":
        rep = validate_matching(c, m)
        emit({"valid": rep.valid, "issues": rep.issues}, args.output)
        return EXIT_OK if rep else EXIT_INVALID
    if args.action == "homology":
        betti = homology(c)
        oracle = snf_homology(c)
        emit({"betti": {str(k): v for k, v in betti.items()},
              "torsion": {str(k): list(v[1]) for k, v in oracle.items()}}, args.output)
        return EXIT_OK
    rep = validate_matching(c, m)
    if not rep:
        emit({"valid": False, "issues": rep.issues}, args.output)
        return EXIT_INVALID
    out = []
    for a, _ in m.pairs:
        pr = gradient_paths(c, m, a, cap=args.cap_steps or 64, check=False)
        out.append({"start": list(a), "max_length": pr.max_length, "cycle": pr.cycle,
                    "cap_reached": pr.cap_reached, "witness": [list(x) for x in pr.witness]})
    emit({"paths": out}, args.output)
    return EXIT_OK if all(not p["cycle"] and not p["cap_reached"] for p in out) else EXIT_INVALID


def cmd_path_connect(args) -> int:
    payload = load_json(args.args)
    i = int(args.component_index or payload.get("i", 1))
    g = _genus(payload, args.genus)
    x = to_vector(payload["x"], g)
    zs = [to_vector(z, g) for z in payload.get("z", [])]
    k = payload["k"]
    path = connect_path(x, zs, k, to_vector(payload["v1"], g), to_vector(payload["v2"], g), i,
                        payload.get("variant"))
    emit({"path": [format_vector(v) for v in path], "coords": [[str(c) for c in v] for v in path]}, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--genus", type=int)
    p.add_argument("--component-index", type=int, choices=(1, 2))
    p.add_argument("--box", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--cap-steps", type=int)
    p.add_argument("--output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spmorse", description="Isotropic-basis complexes and E¹ vector fields.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gcd", help="gcd of a tuple of vectors")
    p.add_argument("vectors")
    _common(p)
    p.set_defaults(func=cmd_gcd)

    p = sub.add_parser("dual", help="dual summand and symplectic splitting")
    p.add_argument("vectors")
    _common(p)
    p.set_defaults(func=cmd_dual)

    p = sub.add_parser("simplex", help="simplex predicates")
    ssub = p.add_subparsers(dest="action", required=True)
    q = ssub.add_parser("check")
    q.add_argument("spec")
    q.add_argument("simplex")
    _common(q)
    q.set_defaults(func=cmd_simplex_check)

    p = sub.add_parser("enumerate", help="enumerate a finite truncation")
    p.add_argument("config")
    _common(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("e1", help="E¹ complexes and vector fields")
    esub = p.add_subparsers(dest="action", required=True)
    q = esub.add_parser("build")
    q.add_argument("config")
    _common(q)
    q.set_defaults(func=cmd_e1_build)
    q = esub.add_parser("certify")
    q.add_argument("config")
    q.add_argument("--verify", help="stored certificate to reproduce")
    _common(q)
    q.set_defaults(func=cmd_e1_certify)

    p = sub.add_parser("morse", help="algebraic Morse theory on a based complex")
    p.add_argument("action", choices=("validate", "homology", "paths"))
    p.add_argument("complex")
    p.add_argument("matching", nargs="?")
    _common(p)
    p.set_defaults(func=cmd_morse)

    p = sub.add_parser("path", help="connecting paths")
    psub = p.add_subparsers(dest="action", required=True)
    q = psub.add_parser("connect")
    q.add_argument("args")
    _common(q)
    q.set_defaults(func=cmd_path_connect)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MalformedInput as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_JSON
    except (PreconditionError, ValueError, KeyError, IndexError) as exc:
        print(f"precondition error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except ConstructionError as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

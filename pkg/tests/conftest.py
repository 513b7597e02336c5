import random

import pytest
from hypothesis import settings
from sympy import ZZ, Matrix
from sympy.matrices.normalforms import invariant_factors

from spmorse.symplectic import LatticeVector, parse_vector

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def vec(text: str, g: int) -> LatticeVector:
    return parse_vector(text, g)


def vecs(texts, g: int) -> list[LatticeVector]:
    return [parse_vector(t, g) for t in texts]


def sympy_invariants(rows) -> tuple[int, ...]:
    """Independent Smith-form oracle."""
    rows = [list(r) for r in rows]
    if not rows or not rows[0]:
        return ()
    return tuple(int(abs(d)) for d in invariant_factors(Matrix(rows), domain=ZZ))


def sympy_gcd_tuple(vs) -> int:
    """Product of invariant factors of the coordinate matrix; 0 when rank-deficient."""
    if not vs:
        return 1
    cols = [list(v) for v in vs]
    if len(cols) > len(cols[0]):
        return 0
    rows = [[c[r] for c in cols] for r in range(len(cols[0]))]
    inv = sympy_invariants(rows)
    prod = 1
    for d in inv:
        prod *= d
    return prod


@pytest.fixture
def rng():
    return random.Random(20240601)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_RESULTS

    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status, seconds, limit, detail in sorted(ACCEPTANCE_RESULTS):
        line = f"criterion {number:>2} {status}  {seconds:7.2f}s / {limit:.0f}s  {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))

"""Random structured inputs shared by the unit and acceptance suites."""

import random

from spmorse.symplectic import LatticeVector, apply, basis_vector, random_symplectic


def moved_basis(g: int, seed: int, word: int = 8, fix_b1: bool = False):
    """Return (a-images, b-images) of the standard basis under a random symplectic matrix."""
    m = random_symplectic(g, seed, word, fix_b1=fix_b1)
    a = [apply(m, basis_vector(g, "a", j)) for j in range(1, g + 1)]
    b = [apply(m, basis_vector(g, "b", j)) for j in range(1, g + 1)]
    return a, b


def random_tuple(rng: random.Random, g_max: int = 4, size_max: int = 4, lo: int = -3, hi: int = 3):
    g = rng.randint(1, g_max)
    n = rng.randint(1, size_max)
    return [LatticeVector(rng.randint(lo, hi) for _ in range(2 * g)) for _ in range(n)]


def embed(v, offset_genus: int, total_genus: int) -> LatticeVector:
    """Place a vector of a smaller genus into the coordinates after the first ``offset_genus`` pairs."""
    coords = [0] * (2 * total_genus)
    coords[2 * offset_genus: 2 * offset_genus + len(v)] = list(v)
    return LatticeVector(coords)


def a1_simplex(rng: random.Random, g: int, n: int, scale: int = 1):
    """Isotropic tuple a1 + t b1 + q_j with the q_j an isotropic family in pr2(H).

    ``scale`` multiplies the last tail, so gcd2 is ``scale`` whenever the tails are primitive.
    A single vertex gets an arbitrary b1-coefficient and tail.
    """
    seed = rng.randrange(10**9)
    a, _ = moved_basis(g - 1, seed, 6)
    t = rng.randint(-2, 2)
    tails = [embed(a[j], 1, g) for j in range(n)]
    tails[-1] = scale * tails[-1]
    a1 = basis_vector(g, "a", 1)
    b1 = basis_vector(g, "b", 1)
    return [a1 + t * b1 + q for q in tails], t


def level_simplex(rng: random.Random, i: int, g: int, k: int, n: int):
    """A random simplex of the i-th complex built to sit at filtration level ``k`` or above.

    Returns ``None`` when the requested shape does not fit in the genus.
    """
    from spmorse.complexes import ambient_genus

    G = ambient_genus(g, i)
    seed = rng.randrange(10**9)
    a1 = basis_vector(G, "a", 1)
    if i == 1 or k >= 2:
        sub = G - k + 1
        if n > sub or n == 0:
            return None
        a, _ = moved_basis(sub, seed, 6)
        vs = [embed(v, k - 1, G) for v in a[:n]]
        if i == 2:
            vs = [a1 + v for v in vs]
        return vs
    if k == 1:
        base = [a1] + [a1 + basis_vector(G, "a", j) for j in range(2, n + 1)]
        return [apply_word(G, seed, v) for v in base[:n]]
    t = rng.randint(-2, 2)
    if n == 1:
        return [apply_word(G, seed, a1 + t * basis_vector(G, "b", 1) + 2 * basis_vector(G, "a", 2))]
    base = [a1 + t * basis_vector(G, "b", 1) + basis_vector(G, "a", 2),
            a1 + t * basis_vector(G, "b", 1) + 2 * basis_vector(G, "a", 2)]
    base += [a1 + t * basis_vector(G, "b", 1) + basis_vector(G, "a", j) for j in range(3, n + 1)]
    return [apply_word(G, seed, v) for v in base[:n]]


def apply_word(G: int, seed: int, v):
    return apply(random_symplectic(G, seed, 6, fix_b1=True), v)


def gcd2_zero_simplex(rng: random.Random, G: int):
    """A valid simplex of the a1-rank-one complex with gcd2 = 0, plus the shared b1-rank t."""
    from spmorse.symplectic import gcd2, gcd_tuple

    while True:
        seed = rng.randrange(10**9)
        a, _ = moved_basis(G - 1, seed, 6)
        r = rng.randint(1, min(3, G - 2))
        ps = [embed(x, 1, G) for x in a[:r]]
        t = rng.randint(-2, 2)
        base = basis_vector(G, "a", 1) + t * basis_vector(G, "b", 1)
        # r independent tails plus one dependent tail
        tails = list(ps)
        coeffs = [rng.randint(-2, 2) for _ in ps]
        if not any(coeffs):
            coeffs[0] = 2
        extra = ps[0] * 0
        for c, p in zip(coeffs, ps):
            extra = extra + c * p
        tails.insert(rng.randint(0, r), extra)
        delta = [base + q for q in tails]
        if len(set(delta)) == len(delta) and gcd2(delta) == 0 and gcd_tuple(delta) == 1:
            return delta, t, ps, seed


def _unimodular(rng: random.Random, n: int, steps: int):
    """Random unimodular matrix and its inverse, as lists of rows."""
    u = [[int(i == j) for j in range(n)] for i in range(n)]
    inv = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(steps if n > 1 else 0):
        i, j = rng.sample(range(n), 2)
        c = rng.choice((-1, 1))
        # row op on u: r_i += c r_j; matching column op on inv: c_j -= c c_i
        u[i] = [x + c * y for x, y in zip(u[i], u[j])]
        for row in inv:
            row[j] -= c * row[i]
    return u, inv


def _mul(a, b):
    if not a or not b or not b[0]:
        return [[0] * (len(b[0]) if b else 0) for _ in a]
    return [[sum(x * y for x, y in zip(row, col)) for col in zip(*b)] for row in a]


def random_complex(rng: random.Random, top: int = 3, max_dim: int = 8, steps: int | None = None):
    """Random based complex over degrees 0..top with known Betti numbers.

    Built as a sum of elementary pieces x -> c*y and isolated cells, then
    conjugated by random unimodular changes of basis.
    """
    from spmorse.morse import BasedChainComplex

    while True:
        pairs = [rng.randint(0, 3) for _ in range(top)]  # pieces from degree n+1 to n
        free = [rng.randint(0, 2) for _ in range(top + 1)]
        dims = [free[n] + (pairs[n] if n < top else 0) + (pairs[n - 1] if n > 0 else 0) for n in range(top + 1)]
        if all(d <= max_dim for d in dims) and any(dims):
            break
    # basis order in degree n: free cells, targets of pieces from n+1, sources of pieces into n-1
    mats = {}
    coeffs = {}
    for n in range(1, top + 1):
        rows, cols = dims[n - 1], dims[n]
        m = [[0] * cols for _ in range(rows)]
        for p in range(pairs[n - 1]):
            c = rng.choice((1, 1, 1, -1, 2))
            coeffs[(n, p)] = c
            r = free[n - 1] + p
            col = free[n] + (pairs[n] if n < top else 0) + p
            m[r][col] = c
        mats[n] = m
    k = rng.randint(0, 6) if steps is None else steps
    us = [_unimodular(rng, d, k) for d in dims]
    for n in range(1, top + 1):
        u_prev, _ = us[n - 1]
        _, inv_n = us[n]
        mats[n] = _mul(_mul(u_prev, mats[n]), inv_n)
    betti = {n: free[n] for n in range(top + 1)}
    torsion = {n: tuple(sorted(abs(coeffs[(n + 1, p)]) for p in range(pairs[n]) if abs(coeffs[(n + 1, p)]) > 1))
               for n in range(top)}
    torsion[top] = ()
    c = BasedChainComplex.from_matrices({n: dims[n] for n in range(top + 1)}, mats)
    return c, betti, torsion


# (number, title, status, seconds, limit, detail) per acceptance criterion run
ACCEPTANCE_RESULTS: list[tuple] = []

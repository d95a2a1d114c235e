"""Exact characteristic polynomials of simple undirected graphs."""

from __future__ import annotations

from dataclasses import dataclass

from .structures import Structure, StructureError


@dataclass(frozen=True)
class CharPoly:
    """Monic integer polynomial, coefficients from the leading term down."""

    coefficients: tuple[int, ...]

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __str__(self) -> str:
        terms = []
        d = self.degree
        for i, c in enumerate(self.coefficients):
            if c == 0:
                continue
            p = d - i
            mono = "" if p == 0 else ("x" if p == 1 else f"x^{p}")
            mag = abs(c)
            body = f"{mag}{mono}" if (mag != 1 or not mono) else mono
            sign = "-" if c < 0 else "+"
            terms.append((sign, body))
        if not terms:
            return "0"
        first_sign, first = terms[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, body in terms[1:]:
            out += f" {sign} {body}"
        return out


def adjacency(G: Structure) -> list[list[int]]:
    """0/1 adjacency matrix, after checking that E is symmetric and loopless."""
    if G.signature.relations != (("E", 2),):
        raise StructureError("spectra need the graph signature {E:2}")
    E = G.rel("E")
    for x, y in E:
        if x == y:
            raise StructureError(f"graph has a loop at {x}")
        if (y, x) not in E:
            raise StructureError(f"edge ({x},{y}) has no reverse")
    n = G.size
    return [[int((i, j) in E) for j in range(n)] for i in range(n)]


def char_poly_matrix(A: list[list[int]]) -> CharPoly:
    """det(xI - A) by the Faddeev-LeVerrier recurrence over the integers.

    M_1 = I, c_{n-1} = -tr(A), and M_k = A M_{k-1} + c_{n-k+1} I with
    c_{n-k} = -tr(A M_k) / k. Every division is exact for integer A.
    """
    n = len(A)
    coeffs = [1]
    if n == 0:
        return CharPoly((1,))
    M = [[int(i == j) for j in range(n)] for i in range(n)]
    for k in range(1, n + 1):
        AM = [[sum(A[i][t] * M[t][j] for t in range(n)) for j in range(n)] for i in range(n)]
        tr = sum(AM[i][i] for i in range(n))
        c, rem = divmod(-tr, k)
        assert rem == 0, "inexact division in Faddeev-LeVerrier"
        coeffs.append(c)
        M = [[AM[i][j] + (c if i == j else 0) for j in range(n)] for i in range(n)]
    return CharPoly(tuple(coeffs))


def char_poly(G: Structure) -> CharPoly:
    return char_poly_matrix(adjacency(G))


def cospectral(G: Structure, H: Structure) -> bool:
    return char_poly(G) == char_poly(H)


def graph(n: int, edges) -> Structure:
    """Undirected simple graph from an edge list."""
    E = set()
    for x, y in edges:
        E.add((x, y))
        E.add((y, x))
    return Structure.build({"E": 2}, n, {"E": sorted(E)})


def cycle(n: int) -> Structure:
    return graph(n, [(i, (i + 1) % n) for i in range(n)])


def star(leaves: int) -> Structure:
    return graph(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def shrikhande() -> Structure:
    """Cayley graph of Z4 x Z4 with connection set {±(1,0), ±(0,1), ±(1,1)}."""
    steps = [(1, 0), (0, 1), (1, 1)]
    edges = []
    for a in range(4):
        for b in range(4):
            for da, db in steps:
                edges.append((4 * a + b, 4 * ((a + da) % 4) + (b + db) % 4))
    return graph(16, edges)


def rook_4x4() -> Structure:
    """Line graph of K_{4,4}: cells of a 4x4 board, adjacent when sharing a row or column."""
    edges = []
    for u in range(16):
        for v in range(u + 1, 16):
            if u // 4 == v // 4 or u % 4 == v % 4:
                edges.append((u, v))
    return graph(16, edges)


def undirected_graphs(max_n: int, min_n: int = 1):
    """All simple graphs on ``min_n..max_n`` labelled vertices."""
    import itertools

    for n in range(min_n, max_n + 1):
        pairs = list(itertools.combinations(range(n), 2))
        for mask in range(1 << len(pairs)):
            yield graph(n, [p for i, p in enumerate(pairs) if mask >> i & 1])

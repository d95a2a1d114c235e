import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as hs

from fvm.games import count_equiv
from fvm.spectra import (
    CharPoly,
    adjacency,
    char_poly,
    char_poly_matrix,
    cospectral,
    cycle,
    graph,
    rook_4x4,
    shrikhande,
    star,
    undirected_graphs,
)
from fvm.structures import Structure, StructureError, disjoint_union

from strategies import graphs


def sympy_poly(G):
    x = sympy.Symbol("x")
    M = sympy.Matrix(adjacency(G))
    p = M.charpoly(x)
    return tuple(int(c) for c in p.all_coeffs())


def test_star_polynomial():
    p = char_poly(star(4))
    assert p.coefficients == (1, 0, -4, 0, 0, 0)
    assert str(p) == "x^5 - 4x^3"


def test_c4_plus_k1_is_cospectral_with_star():
    # the smallest cospectral pair: C4 plus an isolated vertex against K_{1,4}
    G = disjoint_union(cycle(4), graph(1, []))
    assert cospectral(G, star(4))
    assert not count_equiv("pebble", G, star(4), 2).result


def test_str_formats():
    assert str(CharPoly((1,))) == "1"
    assert str(CharPoly((1, -1))) == "x - 1"
    assert str(CharPoly((1, 0, -3, 2))) == "x^3 - 3x + 2"
    assert CharPoly((1, 0, 0)).degree == 2


def test_srg_pair_is_cospectral():
    assert cospectral(shrikhande(), rook_4x4())
    assert char_poly(shrikhande()) == char_poly(rook_4x4())
    assert sympy_poly(shrikhande()) == char_poly(shrikhande()).coefficients


@given(graphs(max_size=6))
@settings(max_examples=60, deadline=None)
def test_matches_sympy(G):
    assert char_poly(G).coefficients == sympy_poly(G)


@given(graphs(max_size=4), graphs(max_size=4))
@settings(max_examples=30, deadline=None)
def test_disjoint_union_multiplies(G, H):
    x = sympy.Symbol("x")
    pg = sympy.Poly(char_poly(G).coefficients, x)
    ph = sympy.Poly(char_poly(H).coefficients, x)
    union = char_poly(disjoint_union(G, H))
    assert union.coefficients == tuple(int(c) for c in (pg * ph).all_coeffs())


@given(graphs(max_size=5), hs.randoms(use_true_random=False))
@settings(max_examples=40, deadline=None)
def test_relabelling_invariant(G, rnd):
    perm = list(range(G.size))
    rnd.shuffle(perm)
    H = Structure.build(G.signature, G.size, {"E": [(perm[a], perm[b]) for a, b in G.rel("E")]})
    assert cospectral(G, H)


def test_adjacency_rejects_non_graphs():
    with pytest.raises(StructureError, match="loop"):
        adjacency(Structure.build({"E": 2}, 1, {"E": [(0, 0)]}))
    with pytest.raises(StructureError, match="reverse"):
        adjacency(Structure.build({"E": 2}, 2, {"E": [(0, 1)]}))
    with pytest.raises(StructureError, match="signature"):
        adjacency(Structure.build({"F": 2}, 1))


def test_empty_matrix():
    assert char_poly_matrix([]).coefficients == (1,)


def test_undirected_graph_counts():
    # labelled simple graphs on n vertices: 2^(n choose 2)
    assert sum(1 for _ in undirected_graphs(4, 4)) == 64
    assert sum(1 for _ in undirected_graphs(3)) == 1 + 2 + 8

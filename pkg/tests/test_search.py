import random

import pytest
from hypothesis import given, settings

from fvm.search import SearchBudgetExceeded, all_maps, find_homomorphism, iter_homomorphisms
from fvm.structures import Structure, StructureMap

from strategies import structures


def brute(A, B):
    out = set()
    for t in all_maps(A.size, B.size):
        if A.pointed and t[A.point] != B.point:
            continue
        if StructureMap(A, B, t).is_homomorphism:
            out.add(t)
    return out


@given(structures(max_size=3), structures(max_size=3))
@settings(max_examples=80, deadline=None)
def test_search_matches_brute_force(A, B):
    found = list(iter_homomorphisms(A, B))
    assert len(found) == len(set(found))
    assert set(found) == brute(A, B)


@given(structures(max_size=3, pointed=True), structures(max_size=3, pointed=True))
@settings(max_examples=40, deadline=None)
def test_pointed_search_matches_brute_force(A, B):
    assert set(iter_homomorphisms(A, B)) == brute(A, B)


@given(structures(sig=(("E", 2), ("P", 1)), max_size=3), structures(sig=(("E", 2), ("P", 1)), max_size=3))
@settings(max_examples=40, deadline=None)
def test_shuffled_search_finds_the_same_set(A, B):
    assert set(iter_homomorphisms(A, B, rng=random.Random(1))) == brute(A, B)


def test_fixed_and_budget():
    K2 = Structure.build({"E": 2}, 2, {"E": [(0, 1), (1, 0)]})
    assert list(iter_homomorphisms(K2, K2, fixed={0: 1})) == [(1, 0)]
    assert find_homomorphism(Structure.build({"E": 2}, 1, {"E": [(0, 0)]}), K2) is None
    big = Structure.build({"E": 2}, 6)
    with pytest.raises(SearchBudgetExceeded):
        list(iter_homomorphisms(big, big, budget=10))


def test_all_maps_count():
    assert sum(1 for _ in all_maps(3, 2)) == 8
    assert list(all_maps(0, 3)) == [()]

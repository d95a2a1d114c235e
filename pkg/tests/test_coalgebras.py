import itertools
import json

import pytest

from fvm.coalgebras import (
    Coalgebra,
    CoalgebraError,
    CoalgebraMorphism,
    bimorph_correspondence,
    bimorph_fault_check,
    chain_coalgebra,
    check_coalgebra,
    check_coproduct_decomposition,
    coalgebra_from_obj,
    coalgebra_from_words,
    coalgebra_morphisms,
    coalgebra_to_obj,
    cofree,
    compare_with_cofree,
    enumerate_coalgebras,
    equalizer_em,
    forest_order,
    identity_morphism,
    is_open,
    is_open_pathwise_embedding,
    is_path,
    is_pathwise_embedding,
    lifted_op,
    span_coalgebra,
    span_search,
)
from fvm.comonads import EF, Modal, Pebble, build
from fvm.games import full_equiv
from fvm.kleisli import get_law, with_swapped_outputs
from fvm.structures import Structure, enumerate_structures

G = {"E": 2}


def edge():
    return Structure.build(G, 2, {"E": [(0, 1)]})


# --- validation and enumeration


def test_check_coalgebra_examples():
    A = edge()
    assert check_coalgebra(coalgebra_from_words("ef", A, [(0,), (0, 1)], 2)).passed
    # edge endpoints not comparable: the words are fine but alpha is not a homomorphism
    bad = coalgebra_from_words("ef", A, [(0,), (1,)], 2)
    assert check_coalgebra(bad).failure == "alpha is not a homomorphism"
    wrong_end = coalgebra_from_words("ef", Structure.build(G, 2), [(1,), (1,)], 2)
    assert check_coalgebra(wrong_end).failure == "counit law"
    not_closed = coalgebra_from_words("ef", Structure.build(G, 2), [(0,), (1, 1)], 2)
    assert not check_coalgebra(not_closed).passed


def test_pebble_coalgebras_are_rejected():
    with pytest.raises(CoalgebraError, match="infinite"):
        list(enumerate_coalgebras(Pebble(2), edge()))


def test_missing_word():
    with pytest.raises(CoalgebraError, match="not a carrier element"):
        coalgebra_from_words("ef", edge(), [(0,), (0, 1, 0)], 2)


@pytest.mark.parametrize(
    "n, k, expected",
    [
        # labelled rooted forests on n nodes number (n+1)^(n-1); height bounds remove the tall ones
        (1, 1, 1),
        (2, 1, 1),
        (2, 2, 3),
        (3, 3, 16),
        (3, 2, 16 - 6),
        (3, 1, 1),
    ],
)
def test_ef_coalgebras_are_forest_orders(n, k, expected):
    assert len(list(enumerate_coalgebras(EF(k), Structure.build(G, n)))) == expected


def test_edge_forces_comparability():
    assert len(list(enumerate_coalgebras(EF(2), edge()))) == 2
    assert not list(enumerate_coalgebras(EF(1), edge()))
    triangle = Structure.build(G, 3, {"E": [(0, 1), (1, 2), (2, 0)]})
    # every pair is adjacent, so only the 3! chains remain
    assert len(list(enumerate_coalgebras(EF(3), triangle))) == 6


def test_modal_coalgebras_are_trees():
    path2 = Structure.build(G, 3, {"E": [(0, 1), (1, 2)]}, point=0)
    assert len(list(enumerate_coalgebras(Modal(2), path2))) == 1
    assert not list(enumerate_coalgebras(Modal(1), path2))
    looped = Structure.build(G, 1, {"E": [(0, 0)]}, point=0)
    assert not list(enumerate_coalgebras(Modal(3), looped))


def test_forest_order_and_paths():
    c = chain_coalgebra(Structure.build(G, 3))
    order = forest_order(c)
    assert order.is_total() and is_path(c)
    assert order.chain(2) == [0, 1, 2]
    assert order.parent(0) is None and order.parent(2) == 1
    assert order.depth == 3
    anti = coalgebra_from_words("ef", Structure.build(G, 2), [(0,), (1,)], 1)
    assert not is_path(anti)
    assert forest_order(anti).children()[None] == [0, 1]


def test_cofree_is_a_coalgebra():
    for A in enumerate_structures(G, 2, up_to_iso=True):
        for k in (1, 2):
            assert check_coalgebra(cofree(build("ef", A, k))).passed
    P = Structure.build(G, 2, {"E": [(0, 1)]}, point=0)
    assert check_coalgebra(cofree(build("modal", P, 2))).passed


# --- morphisms, openness, equalizers


def test_identity_and_composition():
    c = chain_coalgebra(Structure.build(G, 2))
    i = identity_morphism(c)
    assert i.is_valid() and i.then(i).table == i.table


def test_counit_is_open_pathwise_embedding():
    A = edge()
    F = cofree(build("ef", A, 2))
    c = coalgebra_from_words("ef", A, [(0,), (0, 1)], 2)
    maps = list(coalgebra_morphisms(c, F))
    assert len(maps) == 1
    f = maps[0]
    assert f.is_valid() and is_pathwise_embedding(f)
    # the chain uses only the edge 0 -> 1, while the cofree side also branches to words starting at 1
    assert not is_open(f)


def test_identity_on_cofree_is_open():
    F = cofree(build("ef", edge(), 2))
    assert is_open_pathwise_embedding(identity_morphism(F))


def test_equalizer():
    A = Structure.build(G, 2)
    c = coalgebra_from_words("ef", A, [(0,), (1,)], 1)
    maps = list(coalgebra_morphisms(c, c))
    assert len(maps) == 4
    ident = identity_morphism(c)
    swap = next(m for m in maps if m.table == (1, 0))
    eq = equalizer_em(ident, swap)
    assert eq.coalgebra.size == 0
    assert eq.maximality_probes()
    same = equalizer_em(ident, ident)
    assert same.coalgebra.size == 2
    assert same.factor(ident).table == (0, 1)
    const = next(m for m in maps if m.table == (0, 0))
    eq2 = equalizer_em(ident, const)
    assert eq2.kept == {0}
    assert eq2.factor(const).table == (0, 0)
    assert eq2.factor(ident) is None


def test_equalizer_drops_elements_with_missing_letters():
    A = Structure.build(G, 2)
    c = chain_coalgebra(A)
    d = coalgebra_from_words("ef", A, [(0,), (0, 1)], 2)
    maps = list(coalgebra_morphisms(c, d))
    assert maps
    ident = maps[0]
    eq = equalizer_em(ident, ident)
    assert eq.kept == {0, 1}


# --- lifting


@pytest.mark.parametrize("name", ["coproduct-ef", "product-ef", "merge-modal"])
def test_lifting_cofree_matches_cofree_of_composite(name):
    law = get_law(name, 2)
    pointed = name == "merge-modal"
    bases = list(enumerate_structures(G, 1, up_to_iso=True, pointed=pointed))
    for A, B in itertools.product(bases, repeat=2):
        cmp = compare_with_cofree(law, [A, B])
        assert cmp.passed, cmp.as_dict()
        assert cmp.lifted_size == cmp.cofree_size


def test_lifted_coproduct_of_chains():
    law = get_law("coproduct-ef", 1)
    c = chain_coalgebra(Structure.build(G, 1))
    hat = lifted_op(law, [c, c])
    assert check_coalgebra(hat.coalgebra).passed
    assert hat.u().is_homomorphism


def test_operand_mismatch():
    law = get_law("coproduct-ef", 2)
    P = Structure.build(G, 1, point=0)
    m = cofree(build("modal", P, 2))
    with pytest.raises(CoalgebraError, match="operand mismatch"):
        lifted_op(law, [m, m])


def test_bimorph_correspondence_small():
    law = get_law("product-ef", 2)
    A = Structure.build(G, 1)
    beta = cofree(build("ef", A, 2))
    for alpha in enumerate_coalgebras(EF(2), Structure.build(G, 2)):
        rep = bimorph_correspondence(alpha, [beta, beta], law, samples=5)
        assert rep.passed, rep.as_dict()


def test_bimorph_fault_is_flagged():
    law = get_law("coproduct-ef", 2)
    A = edge()
    beta = cofree(build("ef", A, 2))
    alpha = coalgebra_from_words("ef", Structure.build(G, 4, {"E": [(0, 1), (2, 3)]}), [(0,), (0, 1), (2,), (2, 3)], 2)
    bad = with_swapped_outputs(law, ((0, 0),), ((0, 0), (0, 1)))
    rep = bimorph_fault_check(alpha, [beta, beta], law, bad)
    assert rep.honest.passed
    assert rep.flagged
    assert json.dumps(rep.as_dict())


def test_coproduct_decomposition():
    law = get_law("coproduct-ef", 2)
    path = chain_coalgebra(Structure.build(G, 2))
    for A in enumerate_structures(G, 2, up_to_iso=True):
        beta = cofree(build("ef", A, 2))
        rep = check_coproduct_decomposition(law, path, [beta, beta])
        assert rep.passed, rep.as_dict()


# --- spans


@pytest.mark.parametrize("k", [1, 2])
def test_span_exists_iff_full_equivalence(k):
    reps = list(enumerate_structures(G, 2, up_to_iso=True))
    for A, B in itertools.product(reps, repeat=2):
        res = span_search(A, B, k, max_z=10_000)
        assert res.found == full_equiv("ef", A, B, k).result


def test_span_legs_are_open_pathwise_embeddings():
    A = Structure.build(G, 2)
    B = Structure.build(G, 1)
    res = span_search(A, B, 2, max_z=100)
    assert res.found
    f, g = span_coalgebra(A, B, 2, res.words)
    for leg in (f, g):
        assert leg.is_valid() and is_open_pathwise_embedding(leg)


def test_span_respects_budget():
    res = span_search(Structure.build(G, 3), Structure.build(G, 2), 2, max_z=1)
    assert not res.found and res.size is not None and res.size > 1


# --- serialization


def test_json_round_trip():
    c = coalgebra_from_words("ef", edge(), [(0,), (0, 1)], 2)
    obj = json.loads(json.dumps(coalgebra_to_obj(c)))
    back = coalgebra_from_obj(obj)
    assert [back.value(a) for a in range(back.size)] == [c.value(a) for a in range(c.size)]
    del obj["legend"]
    assert coalgebra_from_obj(obj).alpha == c.alpha
    with pytest.raises(CoalgebraError):
        coalgebra_from_obj({"alpha": [0]})


def test_morphism_table_length_is_checked():
    c = chain_coalgebra(Structure.build(G, 2))
    with pytest.raises(CoalgebraError):
        CoalgebraMorphism(c, c, (0,))
    with pytest.raises(CoalgebraError):
        Coalgebra(c.C, (0,))


@pytest.mark.parametrize("k, expected", [(1, [(0,), (1,)]), (2, [(0,), (1,), (0, 1), (1, 0)]), (3, [(0,), (1,), (0, 1), (1, 0)])])
def test_lifted_union_of_singleton_words(k, expected):
    # a word repeating a summand restricts to a length-2 word where alpha gives length 1,
    # so only the interleaved words survive the equalizer
    c = coalgebra_from_words("ef", Structure.build(G, 1), [(0,)], k)
    hat = lifted_op(get_law("coproduct-ef", k), [c, c])
    assert [hat.DH.elems[i] for i in hat.inclusion] == expected

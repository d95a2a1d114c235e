import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as hs

from fvm import comonads as cmd
from fvm.comonads import (
    EF,
    Cos,
    GuardExceeded,
    Modal,
    Pebble,
    build,
    build_partial,
    check_comonad_laws,
    coextend,
    comultiplication,
    counit,
    fmap,
    kleisli_compose,
    make_comonad,
    value_from_json,
    value_to_json,
)
from fvm.search import find_homomorphism, iter_homomorphisms
from fvm.structures import Structure, StructureError, StructureMap, enumerate_structures, identity_map
from fvm.spectra import cycle

from strategies import structures

G = {"E": 2}


def comparable(s, t):
    n = min(len(s), len(t))
    return s[:n] == t[:n]


def brute_word_relation(base, k, pebbles=None, trunc=None):
    """Carrier relation straight from the definition, for EF (pebbles=None) or Pebble."""
    if pebbles is None:
        letters = list(range(base.size))
        elem = lambda letter: letter  # noqa: E731
        maxlen = k
    else:
        letters = [(p, a) for p in range(pebbles) for a in range(base.size)]
        elem = lambda letter: letter[1]  # noqa: E731
        maxlen = trunc
    words = [w for L in range(1, maxlen + 1) for w in itertools.product(letters, repeat=L)]
    rel = set()
    for s, t in itertools.product(words, repeat=2):
        if not comparable(s, t) or (elem(s[-1]), elem(t[-1])) not in base.rel("E"):
            continue
        if pebbles is not None and len(s) != len(t):
            short, long_ = (s, t) if len(s) < len(t) else (t, s)
            if any(p == short[-1][0] for p, _ in long_[len(short):]):
                continue
        rel.add((s, t))
    return words, rel


@given(structures(max_size=2), hs.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_ef_carrier_matches_definition(A, k):
    C = build("ef", A, k)
    words, rel = brute_word_relation(A, k)
    assert set(C.elems) == set(words)
    assert {(C.elems[i], C.elems[j]) for i, j in C.carrier.rel("E")} == rel


@given(structures(max_size=2), hs.integers(1, 2))
@settings(max_examples=20, deadline=None)
def test_pebble_carrier_matches_definition(A, k):
    C = build(Pebble(k, 3), A)
    words, rel = brute_word_relation(A, None, pebbles=k, trunc=3)
    assert set(C.elems) == set(words)
    assert {(C.elems[i], C.elems[j]) for i, j in C.carrier.rel("E")} == rel


def test_ef_examples():
    C = build("ef", Structure.build(G, 1), 2)
    assert C.elems == ((0,), (0, 0))
    assert not C.carrier.rel("E")
    for n in (1, 2, 3):
        for k in (1, 2, 3):
            assert len(build("ef", Structure.build(G, n), k)) == sum(n**j for j in range(1, k + 1))


def test_modal_loop_example():
    A = Structure.build(G, 1, {"E": [(0, 0)]}, point=0)
    C = build("modal", A, 2)
    assert len(C) == 3
    assert C.carrier.rel("E") == {(0, 1), (1, 2)}
    assert C.carrier.point == 0
    assert counit(C).table == (0, 0, 0)


def test_modal_unary_at_endpoint():
    A = Structure.build({"E": 2, "P": 1}, 2, {"E": [(0, 1)], "P": [(1,)]}, point=0)
    C = build("modal", A, 1)
    assert C.elems == ((("", 0),), (("", 0), ("E", 1)))
    assert C.carrier.rel("P") == {(1,)}


def test_cos_walk_positions():
    # closed walks on a 4-cycle number tr(A^L): spectrum 2, 0, 0, -2 gives 8 of length 2 and 32 of length 4
    C = build(Cos(4), cycle(4))
    assert len(C) == 8 * 2 + 32 * 4
    assert counit(C).is_homomorphism


def test_build_errors():
    with pytest.raises(StructureError):
        build("modal", Structure.build(G, 1), 1)
    with pytest.raises(StructureError):
        build("ef", Structure.build(G, 1, point=0), 1)
    with pytest.raises(StructureError):
        build(Cos(3), Structure.build(G, 2, {"E": [(0, 1)]}))
    with pytest.raises(GuardExceeded):
        build("ef", Structure.build(G, 4), 3, guard=10)
    with pytest.raises(StructureError):
        make_comonad("nope")


def test_counit_examples():
    A = Structure.build(G, 3)
    ef = EF(3)
    assert ef.last((0,)) == 0
    assert ef.last((0, 1, 2)) == 2
    C = build(ef, A)
    assert counit(C).is_homomorphism
    assert sorted(set(counit(C).table)) == [0, 1, 2]


def test_coextension_examples():
    A = Structure.build(G, 2, {"E": [(0, 1)]})
    C = build("ef", A, 2)
    assert coextend(C, counit(C)).table == tuple(range(len(C)))
    const = StructureMap(C.carrier, Structure.build(G, 1, {"E": [(0, 0)]}), (0,) * len(C))
    fs = coextend(C, const)
    target = build("ef", const.target, 2)
    assert target.elems[fs.table[C.index[(0, 1)]]] == (0, 0)
    assert target.elems[fs.table[C.index[(1,)]]] == (0,)


def test_comultiplication_examples():
    A = Structure.build(G, 2)
    C = build("ef", A, 2)
    d = comultiplication(C)
    CC = build("ef", C.carrier, 2)
    a, b = C.index[(0,)], C.index[(0, 1)]
    assert CC.elems[d.table[C.index[(0,)]]] == (a,)
    assert CC.elems[d.table[C.index[(0, 1)]]] == (a, b)
    assert counit(CC).table[d.table[b]] == b


def test_fmap_examples():
    A = Structure.build(G, 2)
    C = build("ef", A, 2)
    assert fmap(C, identity_map(A)).table == tuple(range(len(C)))
    swap = StructureMap(A, A, (1, 0))
    image = fmap(C, swap)
    assert C.elems[image.table[C.index[(0, 1)]]] == (1, 0)


def test_fmap_composes_exhaustively():
    for A in enumerate_structures(G, 2):
        C = build("ef", A, 2)
        for g in iter_homomorphisms(A, A):
            for h in iter_homomorphisms(A, A):
                gm, hm = StructureMap(A, A, g), StructureMap(A, A, h)
                assert fmap(C, gm.then(hm)).table == fmap(C, gm).then(fmap(C, hm)).table


@pytest.mark.parametrize("kind, k, pointed", [("ef", 1, False), ("ef", 2, False), ("modal", 2, True)])
def test_kleisli_form_matches_comonoid_form(kind, k, pointed):
    """f* rebuilt as C(f) . delta agrees with coextension."""
    rng = random.Random(7)
    bases = list(enumerate_structures(G, 2, up_to_iso=True, pointed=pointed))
    for A in bases:
        C = build(kind, A, k)
        for B in bases:
            f = find_homomorphism(C.carrier, B, rng=rng)
            if f is None:
                continue
            fs = coextend(C, f)
            CB = build(kind, B, k)
            d = comultiplication(C)
            cm = C.comonad
            for i, x in enumerate(C.elems):
                via = cm.fmap(lambda u: f.table[C.index[u]], cm.delta(x))
                assert CB.elems[fs.table[i]] == via
            assert d.is_homomorphism


def test_kleisli_composition_is_associative():
    rng = random.Random(3)
    bases = list(enumerate_structures(G, 2, up_to_iso=True))
    for A in bases:
        C = build("ef", A, 2)
        f = find_homomorphism(C.carrier, rng.choice(bases), rng=rng)
        if f is None:
            continue
        CB = build("ef", f.target, 2)
        g = find_homomorphism(CB.carrier, rng.choice(bases), rng=rng)
        if g is None:
            continue
        CD = build("ef", g.target, 2)
        h = find_homomorphism(CD.carrier, rng.choice(bases), rng=rng)
        if h is None:
            continue
        left = kleisli_compose(C, kleisli_compose(C, f, g), h)
        right = kleisli_compose(C, f, kleisli_compose(CB, g, h))
        assert left.table == right.table


@pytest.mark.parametrize("kind, k", [("ef", 1), ("ef", 2), ("modal", 1), ("modal", 2)])
def test_law_checker_passes(kind, k):
    pointed = kind == "modal"
    bases = list(enumerate_structures(G, 2, up_to_iso=True, pointed=pointed))
    for i, A in enumerate(bases):
        rep = check_comonad_laws(build(kind, A, k), bases, seed=i, samples=2)
        assert rep.passed, rep.as_dict()


def test_law_checker_reports_a_broken_coextension():
    class Broken(EF):
        def coext(self, h, x):
            out = super().coext(h, x)
            return out[::-1]

    A = Structure.build(G, 2, {"E": [(0, 1)]})
    rep = check_comonad_laws(build(Broken(2), A), [A], samples=2)
    assert not rep.passed
    failed = [r for r in rep.results.values() if not r.passed]
    assert failed and all(r.counterexample is not None for r in failed)


def test_pebble_truncation_closed():
    A = Structure.build(G, 2, {"E": [(0, 1), (1, 1)]})
    C = build(Pebble(2, 4), A)
    rep = check_comonad_laws(C, [A], samples=3)
    assert rep.passed
    cm = C.comonad
    for x in C.elems:
        assert cm.delta(x) and len(cm.delta(x)) == len(x)


@given(structures(max_size=3), hs.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_carrier_tuples_are_prefix_comparable(A, k):
    C = build("ef", A, k)
    for i, j in C.carrier.rel("E"):
        assert comparable(C.elems[i], C.elems[j])


def test_build_partial_is_induced():
    A = Structure.build(G, 2, {"E": [(0, 1), (1, 0)]})
    full = build("ef", A, 3)
    part = build_partial(EF(3), A, [(0, 1, 0)])
    assert part.elems == ((0,), (0, 1), (0, 1, 0))
    for i, j in part.carrier.rel("E"):
        assert (full.index[part.elems[i]], full.index[part.elems[j]]) in full.carrier.rel("E")


def test_is_value():
    A = Structure.build(G, 2, {"E": [(0, 1)]}, point=0)
    m = Modal(2)
    assert m.is_value(A, (("", 0), ("E", 1)))
    assert not m.is_value(A, (("", 0), ("E", 0)))
    assert not m.is_value(A, (("", 1),))
    assert EF(2).is_value(Structure.build(G, 2), (1, 0))
    assert not EF(2).is_value(Structure.build(G, 2), (1, 0, 1))


def test_value_json_roundtrip():
    for v in [(0, 1), (("", 0), ("E", 1)), (((0, 1), 2), 1)]:
        assert value_from_json(value_to_json(v)) == v
    assert cmd.legend(build("ef", Structure.build(G, 1), 2)) == [[0], [0, 0]]

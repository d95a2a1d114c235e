"""Eilenberg-Moore coalgebras for the EF and modal comonads.

A coalgebra stores ``alpha`` as indices into a materialized carrier. Checks
run on element values, so ``c.value(a)`` is the word that ``alpha`` assigns
to ``a``. Paths inside a coalgebra are down-closed chains of its forest
order; every one of them is the down-closure of its top element, and for the
EF comonad the empty chain is a path too.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

from .comonads import (
    Comonad,
    EF,
    ComonadInstance,
    build,
    build_partial,
    legend,
    make_comonad,
    value_from_json,
    value_to_json,
)
from .kleisli import KleisliLaw
from .search import iter_homomorphisms
from .structures import (
    Structure,
    StructureError,
    StructureMap,
    find_isomorphism,
    induced_substructure,
    is_embedding,
    structure_from_obj,
    structure_to_obj,
)

FINITE_KINDS = ("ef", "modal")


class CoalgebraError(StructureError):
    pass


def _require_finite(cm: Comonad) -> None:
    if cm.kind not in FINITE_KINDS:
        raise CoalgebraError(f"coalgebras are supported for EF and modal comonads, not {cm.kind!r} (infinite carrier)")


@dataclass(frozen=True, eq=False)
class Coalgebra:
    C: ComonadInstance
    alpha: tuple[int, ...]

    def __post_init__(self):
        if len(self.alpha) != self.C.base.size:
            raise CoalgebraError("alpha must assign a carrier element to every base element")
        if any(not (0 <= i < len(self.C)) for i in self.alpha):
            raise CoalgebraError("alpha points outside the carrier")

    @property
    def base(self) -> Structure:
        return self.C.base

    @property
    def comonad(self) -> Comonad:
        return self.C.comonad

    @property
    def size(self) -> int:
        return self.C.base.size

    def value(self, a: int) -> Any:
        return self.C.elems[self.alpha[a]]

    def letters(self, a: int) -> list[int]:
        cm = self.comonad
        return [cm.letter_elem(l) for l in self.value(a)]


def coalgebra_from_words(kind: str | Comonad, base: Structure, words: Sequence, k: int | None = None) -> Coalgebra:
    C = build(kind, base, k)
    try:
        alpha = tuple(C.index[tuple(w)] for w in words)
    except KeyError as exc:
        raise CoalgebraError(f"word {exc.args[0]!r} is not a carrier element") from None
    return Coalgebra(C, alpha)


# ---------------------------------------------------------------------------
# validation


@dataclass
class CoalgebraCheck:
    passed: bool
    failure: str | None = None
    element: int | None = None

    def as_dict(self) -> dict:
        return {"passed": self.passed, "failure": self.failure, "element": self.element}


def check_coalgebra(c: Coalgebra) -> CoalgebraCheck:
    """Both coalgebra squares, elementwise, plus alpha being a morphism."""
    cm = c.comonad
    _require_finite(cm)
    if not StructureMap(c.base, c.C.carrier, c.alpha).is_homomorphism:
        return CoalgebraCheck(False, "alpha is not a homomorphism")
    if c.base.pointed and c.alpha[c.base.point] != c.C.carrier.point:
        return CoalgebraCheck(False, "alpha does not preserve the point", c.base.point)
    for a in range(c.size):
        if cm.last(c.value(a)) != a:
            return CoalgebraCheck(False, "counit law", a)
    for a in range(c.size):
        w = c.value(a)
        if cm.delta(w) != cm.fmap(c.value, w):
            return CoalgebraCheck(False, "comultiplication law", a)
    return CoalgebraCheck(True)


def cofree(C: ComonadInstance) -> Coalgebra:
    """``(C(A), delta)``, with delta landing in the carrier built over the carrier."""
    cm = C.comonad
    _require_finite(cm)
    values = [cm.coext(lambda u: C.index[u], x) for x in C.elems]
    D = build_partial(cm, C.carrier, values)
    return Coalgebra(D, tuple(D.index[v] for v in values))


def chain_coalgebra(base: Structure) -> Coalgebra:
    """EF coalgebra ordering ``0 < 1 < ... < n-1`` in a single chain."""
    C = build("ef", base, max(base.size, 1))
    return Coalgebra(C, tuple(C.index[tuple(range(a + 1))] for a in range(base.size)))


def enumerate_coalgebras(cm: Comonad, base: Structure) -> Iterator[Coalgebra]:
    """Every coalgebra structure on ``base`` (brute force over words ending in each element)."""
    _require_finite(cm)
    C = build(cm, base)
    ends: list[list[int]] = [[] for _ in range(base.size)]
    for i, x in enumerate(C.elems):
        ends[cm.last(x)].append(i)
    for alpha in itertools.product(*ends):
        c = Coalgebra(C, tuple(alpha))
        if check_coalgebra(c).passed:
            yield c


# ---------------------------------------------------------------------------
# forest order


@dataclass(frozen=True, eq=False)
class ForestOrder:
    coalgebra: Coalgebra
    below: tuple[frozenset, ...]  # below[y] = {x : x below-or-equal y}
    height: tuple[int, ...]

    def leq(self, x: int, y: int) -> bool:
        return x in self.below[y]

    def pairs(self) -> list[tuple[int, int]]:
        return sorted((x, y) for y in range(len(self.below)) for x in self.below[y])

    def chain(self, y: int) -> list[int]:
        """The down-closure of ``y`` listed from the root."""
        return sorted(self.below[y], key=lambda x: self.height[x])

    def parent(self, y: int) -> int | None:
        ch = self.chain(y)
        return ch[-2] if len(ch) > 1 else None

    def children(self) -> dict[int | None, list[int]]:
        out: dict[int | None, list[int]] = {None: []}
        for y in range(len(self.below)):
            out.setdefault(y, [])
        for y in range(len(self.below)):
            out[self.parent(y)].append(y)
        return out

    @property
    def depth(self) -> int:
        return max(self.height, default=0)

    def is_total(self) -> bool:
        n = len(self.below)
        return all(x in self.below[y] or y in self.below[x] for x in range(n) for y in range(n))


def forest_order(c: Coalgebra) -> ForestOrder:
    check = check_coalgebra(c)
    if not check.passed:
        raise CoalgebraError(f"not a coalgebra: {check.failure} at element {check.element}")
    below = []
    for y in range(c.size):
        below.append(frozenset(c.letters(y)))
    height = tuple(len(c.value(y)) for y in range(c.size))
    order = ForestOrder(c, tuple(below), height)
    for y in range(c.size):
        for x, z in itertools.combinations(below[y], 2):
            if not (order.leq(x, z) or order.leq(z, x)):
                raise CoalgebraError(f"predecessors of {y} do not form a chain")
    for name, _, table in c.base.relation_items():
        for t in table:
            for x, z in itertools.combinations(t, 2):
                if not (order.leq(x, z) or order.leq(z, x)):
                    raise CoalgebraError(f"tuple {name}{t} is not compatible with the forest order")
    return order


def is_path(c: Coalgebra) -> bool:
    return forest_order(c).is_total()


def path_supports(c: Coalgebra, order: ForestOrder | None = None) -> list[frozenset]:
    """Element sets of the path subcoalgebras: every down-closure, plus the empty one for EF."""
    order = order or forest_order(c)
    out = [] if c.base.pointed else [frozenset()]
    out.extend(sorted(set(order.below), key=lambda s: (len(s), sorted(s))))
    return out


# ---------------------------------------------------------------------------
# morphisms


@dataclass(frozen=True, eq=False)
class CoalgebraMorphism:
    source: Coalgebra
    target: Coalgebra
    table: tuple[int, ...]

    def __post_init__(self):
        if self.source.comonad != self.target.comonad:
            raise CoalgebraError("coalgebras of different comonads")
        if len(self.table) != self.source.size:
            raise CoalgebraError("map table length differs from source size")

    @property
    def map(self) -> StructureMap:
        return StructureMap(self.source.base, self.target.base, self.table)

    def then(self, other: "CoalgebraMorphism") -> "CoalgebraMorphism":
        return CoalgebraMorphism(self.source, other.target, tuple(other.table[v] for v in self.table))

    def is_valid(self) -> bool:
        return is_coalgebra_morphism(self.map, self.source, self.target)


def identity_morphism(c: Coalgebra) -> CoalgebraMorphism:
    return CoalgebraMorphism(c, c, tuple(range(c.size)))


def is_coalgebra_morphism(f: StructureMap, src: Coalgebra, tgt: Coalgebra) -> bool:
    """``beta . f = C(f) . alpha`` together with f being a homomorphism."""
    if not f.is_homomorphism:
        return False
    if src.base.pointed and f.table[src.base.point] != tgt.base.point:
        return False
    cm = src.comonad
    g = lambda b: f.table[b]  # noqa: E731
    return all(tgt.value(f.table[a]) == cm.fmap(g, src.value(a)) for a in range(src.size))


def _ordered_search(src: Coalgebra, target: Structure, candidates, local_ok) -> Iterator[tuple[int, ...]]:
    """Maps out of ``src.base`` assigned root-first along the forest order.

    ``candidates(f, a)`` lists values for ``a`` once its predecessors are
    fixed; ``local_ok(f, a)`` checks conditions that only involve ``a`` and
    its predecessors. Relation tuples are checked as soon as they are fixed.
    """
    order = forest_order(src)
    seq = sorted(range(src.size), key=lambda a: (order.height[a], a))
    rank = {a: i for i, a in enumerate(seq)}
    checks: list[list] = [[] for _ in seq]
    for ta, tb in zip(src.base.rels, target.rels):
        for t in ta:
            checks[max(rank[x] for x in t)].append((tb, t))
    f: list = [None] * src.size
    if src.base.pointed and target.size == 0:
        return
    if not seq:
        yield ()
        return
    # explicit stack of (position, remaining candidates)
    stack = [(0, iter(candidates(f, seq[0], order)))]
    while stack:
        i, it = stack[-1]
        a = seq[i]
        for y in it:
            f[a] = y
            if all(tuple(f[x] for x in t) in tb for tb, t in checks[i]) and local_ok(f, a):
                break
        else:
            f[a] = None
            stack.pop()
            continue
        if i + 1 == len(seq):
            yield tuple(f)
        else:
            stack.append((i + 1, iter(candidates(f, seq[i + 1], order))))


def coalgebra_morphisms(src: Coalgebra, tgt: Coalgebra) -> Iterator[CoalgebraMorphism]:
    """All coalgebra morphisms, parents first: a child must go to a child of its parent's image."""
    kids = forest_order(tgt).children()
    cm = src.comonad

    def candidates(f, a, order):
        p = order.parent(a)
        return kids[None if p is None else f[p]]

    def local_ok(f, a):
        if src.base.pointed and a == src.base.point and f[a] != tgt.base.point:
            return False
        return tgt.value(f[a]) == cm.fmap(lambda b: f[b], src.value(a))

    for table in _ordered_search(src, tgt.base, candidates, local_ok):
        yield CoalgebraMorphism(src, tgt, table)


def _require_morphism(f: CoalgebraMorphism) -> None:
    if not f.is_valid():
        raise CoalgebraError("not a coalgebra morphism")


def _restricted_embedding(f: CoalgebraMorphism, support: Sequence[int]) -> bool:
    P, inc = induced_substructure(f.source.base, list(support))
    return is_embedding(StructureMap(P, f.target.base, tuple(f.table[x] for x in inc.table)))


def is_pathwise_embedding(f: CoalgebraMorphism) -> bool:
    _require_morphism(f)
    order = forest_order(f.source)
    return all(_restricted_embedding(f, sorted(S)) for S in path_supports(f.source, order) if S)


def open_failure(f: CoalgebraMorphism) -> dict | None:
    """First square of path embeddings without a diagonal, or None when f is open.

    For a path ``P`` below ``x`` in the source and ``Q`` below ``y`` in the
    target with ``f(x)`` below ``y``, the square commutes with ``g`` sending
    each level of P to the same level of Q. A diagonal must extend the chain
    of ``x`` level by level through elements mapped onto the chain of ``y``.
    """
    _require_morphism(f)
    X, Y = f.source, f.target
    oX, oY = forest_order(X), forest_order(Y)
    kids = oX.children()
    cm = X.comonad
    for S in path_supports(X, oX):
        chain_x = sorted(S, key=lambda x: oX.height[x])
        top = chain_x[-1] if chain_x else None
        for y in range(Y.size):
            chain_y = oY.chain(y)
            if len(chain_y) < len(chain_x):
                continue
            if any(f.table[x] != chain_y[i] for i, x in enumerate(chain_x)):
                continue
            # g must be a path embedding P -> Q
            P, inc = induced_substructure(X.base, chain_x)
            Q, _ = induced_substructure(Y.base, chain_y)
            g = StructureMap(P, Q, tuple(range(len(chain_x))))
            if chain_x and not is_embedding(g):
                continue
            if len(chain_x) == len(chain_y):
                continue  # d = e works
            if not _lift_chain(f, cm, kids, top, chain_x, chain_y, Q):
                return {"path_top": top, "target_top": y}
    return None


def _lift_chain(f, cm, kids, top, chain_x, chain_y, Q) -> bool:
    X, Y = f.source, f.target
    n = len(chain_x)
    d = list(chain_x)

    def morphism_ok() -> bool:
        pos = {z: i for i, z in enumerate(chain_y)}
        dm = lambda z: d[pos[z]]  # noqa: E731
        for i, z in enumerate(chain_y):
            if X.value(d[i]) != cm.fmap(dm, Y.value(z)):
                return False
        return StructureMap(Q, X.base, tuple(d)).is_homomorphism

    def extend(i: int, prev: int | None) -> bool:
        if i == len(chain_y):
            return morphism_ok()
        for x in kids[prev]:
            if f.table[x] == chain_y[i]:
                d.append(x)
                if extend(i + 1, x):
                    return True
                d.pop()
        return False

    return extend(n, top)


def is_open(f: CoalgebraMorphism) -> bool:
    return open_failure(f) is None


def is_open_pathwise_embedding(f: CoalgebraMorphism) -> bool:
    return is_pathwise_embedding(f) and is_open(f)


# ---------------------------------------------------------------------------
# subcoalgebras and equalizers


def greatest_subcoalgebra(c: Coalgebra, keep: set[int] | frozenset) -> frozenset:
    """Largest subset of ``keep`` closed under the letters of alpha."""
    cur = set(keep)
    while True:
        nxt = {x for x in cur if all(b in cur for b in c.letters(x))}
        if nxt == cur:
            return frozenset(cur)
        cur = nxt


def subcoalgebra(c: Coalgebra, elements: Sequence[int]) -> CoalgebraMorphism:
    """Induced subcoalgebra on a letter-closed set, returned as its inclusion."""
    elems = sorted(elements)
    pos = {x: i for i, x in enumerate(elems)}
    for x in elems:
        if any(b not in pos for b in c.letters(x)):
            raise CoalgebraError(f"element {x} has alpha-letters outside the subset")
    sub, inc = induced_substructure(c.base, elems)
    cm = c.comonad
    values = [cm.fmap(lambda b: pos[b], c.value(x)) for x in elems]
    C = build_partial(cm, sub, values)
    alpha = tuple(C.index[v] for v in values)
    return CoalgebraMorphism(Coalgebra(C, alpha), c, inc.table)


@dataclass(frozen=True, eq=False)
class Equalizer:
    inclusion: CoalgebraMorphism
    set_equalizer: frozenset
    kept: frozenset

    @property
    def coalgebra(self) -> Coalgebra:
        return self.inclusion.source

    def maximality_probes(self) -> bool:
        """Adding any excluded element breaks either equalizing or letter closure."""
        src = self.inclusion.target
        for x in range(src.size):
            if x in self.kept:
                continue
            grown = self.kept | {x}
            if x in self.set_equalizer and all(b in grown for b in src.letters(x)):
                return False
        return True

    def factor(self, h: CoalgebraMorphism) -> CoalgebraMorphism | None:
        """The unique map through the inclusion, when h lands inside it."""
        pos = {x: i for i, x in enumerate(self.inclusion.table)}
        if any(v not in pos for v in h.table):
            return None
        return CoalgebraMorphism(h.source, self.coalgebra, tuple(pos[v] for v in h.table))


def equalizer_em(f: CoalgebraMorphism, g: CoalgebraMorphism) -> Equalizer:
    """Greatest subcoalgebra of the set-theoretic equalizer of f and g."""
    _require_finite(f.source.comonad)
    if f.source is not g.source or f.target is not g.target:
        raise CoalgebraError("equalizer needs a parallel pair")
    _require_morphism(f)
    _require_morphism(g)
    eq = frozenset(x for x in range(f.source.size) if f.table[x] == g.table[x])
    kept = greatest_subcoalgebra(f.source, eq)
    inc = subcoalgebra(f.source, sorted(kept))
    out = Equalizer(inc, eq, kept)
    assert check_coalgebra(inc.source).passed
    assert all(f.table[x] == g.table[x] for x in inc.table)
    return out


# ---------------------------------------------------------------------------
# lifting an operation to coalgebras

LIFT_GUARD = 20_000
BIMORPH_LIMIT = 100_000


@dataclass(frozen=True, eq=False)
class Lifted:
    """The lifted operation at a tuple of coalgebras.

    ``coalgebra`` is the equalizer inside the cofree coalgebra on ``H(bases)``;
    ``inclusion[i]`` is the index in ``DH`` of its i-th element.
    """

    law: KleisliLaw
    operands: tuple[Coalgebra, ...]
    composite: Structure
    composite_values: list
    DH: ComonadInstance
    inclusion: tuple[int, ...]
    coalgebra: Coalgebra
    set_equalizer: frozenset = field(repr=False)

    def u(self) -> StructureMap:
        """Counit after the inclusion: the universal bimorphism into ``H(bases)``."""
        D = self.law.outer
        return StructureMap(self.coalgebra.base, self.composite, tuple(D.last(self.DH.elems[i]) for i in self.inclusion))


def _check_operands(law: KleisliLaw, operands: Sequence[Coalgebra]) -> None:
    if len(operands) != law.arity:
        raise CoalgebraError(f"{law.name} takes {law.arity} operands")
    for c, cm in zip(operands, law.inner):
        if c.comonad != cm:
            raise CoalgebraError("operand mismatch: coalgebra comonad differs from the law")
    _require_finite(law.outer)


def lifted_op(law: KleisliLaw, operands: Sequence[Coalgebra], guard: int = LIFT_GUARD) -> Lifted:
    """Equalizer of ``D(kappa) . delta`` and ``D(H(alphas))`` inside the cofree coalgebra on H.

    Both arrows are evaluated on element values, so the codomain of the pair
    is never materialized.
    """
    operands = tuple(operands)
    _check_operands(law, operands)
    D, op = law.outer, law.op
    bases = [c.base for c in operands]
    H = op.apply(bases)
    hv = op.values(bases, [list(range(b.size)) for b in bases])
    DH = build(D, H, guard=guard)
    alphas = [c.value for c in operands]
    h_alpha = lambda v: op.map(alphas, v)  # noqa: E731
    eq = set()
    for i, x in enumerate(DH.elems):
        xv = D.fmap(lambda j: hv[j], x)
        if D.coext(law.kappa, xv) == D.fmap(h_alpha, xv):
            eq.add(i)
    # cofree alpha sends a word to its prefixes; closure = prefix closure
    cur = set(eq)
    while True:
        nxt = {i for i in cur if all(DH.index[DH.elems[i][: j + 1]] in cur for j in range(len(DH.elems[i])))}
        if nxt == cur:
            break
        cur = nxt
    incl = tuple(sorted(cur))
    pos = {i: n for n, i in enumerate(incl)}
    sub, _ = induced_substructure(DH.carrier, list(incl))
    values = [D.coext(lambda u: pos[DH.index[u]], DH.elems[i]) for i in incl]
    C = build_partial(D, sub, values)
    c = Coalgebra(C, tuple(C.index[v] for v in values))
    assert check_coalgebra(c).passed
    return Lifted(law, operands, H, hv, DH, incl, c, frozenset(eq))


def lifted_map(src: Lifted, tgt: Lifted, gs: Sequence[CoalgebraMorphism]) -> CoalgebraMorphism:
    """Action of the lifted operation on a tuple of coalgebra morphisms."""
    law = src.law
    for g, a, b in zip(gs, src.operands, tgt.operands):
        if g.source is not a or g.target is not b:
            raise CoalgebraError("operand mismatch")
        _require_morphism(g)
    D, op = law.outer, law.op
    tindex = {v: i for i, v in enumerate(tgt.composite_values)}
    tpos = {i: n for n, i in enumerate(tgt.inclusion)}
    fns = [(lambda a, g=g: g.table[a]) for g in gs]
    table = []
    for i in src.inclusion:
        y = D.fmap(lambda j: tindex[op.map(fns, src.composite_values[j])], src.DH.elems[i])
        n = tpos.get(tgt.DH.index[y])
        if n is None:
            raise CoalgebraError("lifted map left the equalizer")
        table.append(n)
    return CoalgebraMorphism(src.coalgebra, tgt.coalgebra, tuple(table))


def _augmented(c: Coalgebra) -> Structure:
    """Base structure plus the forest order (and modal step labels) as relations."""
    order = forest_order(c)
    sig = c.base.signature
    rels = {name: set(table) for name, _, table in c.base.relation_items()}
    extra = [("__below", sorted(order.pairs()))]
    if c.comonad.kind == "modal":
        steps: dict[str, list] = {}
        for y in range(c.size):
            p = order.parent(y)
            if p is not None:
                steps.setdefault(c.value(y)[-1][0], []).append((p, y))
        extra += [(f"__step_{lab}", ts) for lab, ts in sorted(steps.items())]
    for name, ts in extra:
        sig = sig.extend(name, 2)
        rels[name] = ts
    return Structure.build(sig, c.size, rels, c.base.point)


def find_coalgebra_isomorphism(c1: Coalgebra, c2: Coalgebra) -> CoalgebraMorphism | None:
    """Structure isomorphism that also matches forest orders, checked as a coalgebra map."""
    if c1.comonad != c2.comonad:
        return None
    A1, A2 = _augmented(c1), _augmented(c2)
    if A1.signature != A2.signature:
        return None
    iso = find_isomorphism(A1, A2)
    if iso is None:
        return None
    f = CoalgebraMorphism(c1, c2, iso.table)
    if not f.is_valid():
        raise AssertionError("order-preserving isomorphism is not a coalgebra morphism")
    return f


def is_coalgebra_isomorphism(f: CoalgebraMorphism) -> bool:
    if len(set(f.table)) != f.target.size or f.source.size != f.target.size:
        return False
    return f.is_valid() and is_embedding(f.map)


@dataclass
class CofreeComparison:
    """The lifted operation on cofree operands against the cofree coalgebra on ``H(bases)``."""

    lifted_size: int
    cofree_size: int
    explicit: CoalgebraMorphism | None
    explicit_is_iso: bool
    searched: CoalgebraMorphism | None

    @property
    def passed(self) -> bool:
        return self.explicit_is_iso and self.searched is not None

    def as_dict(self) -> dict:
        return {
            "lifted_size": self.lifted_size,
            "cofree_size": self.cofree_size,
            "explicit_isomorphism": None if self.explicit is None else list(self.explicit.table),
            "explicit_is_isomorphism": self.explicit_is_iso,
            "search_found_isomorphism": self.searched is not None,
            "passed": self.passed,
        }


def compare_with_cofree(law: KleisliLaw, bases: Sequence[Structure], guard: int = LIFT_GUARD) -> CofreeComparison:
    """Lift cofree operands and compare with the cofree coalgebra on the composite.

    The explicit candidate sends ``x`` to ``D(kappa) . delta (x)``, re-read
    with carrier elements as indices; a generic isomorphism search runs as a
    second, independent route.
    """
    D, op = law.outer, law.op
    Cs = [build(cm, b, guard=guard) for cm, b in zip(law.inner, bases)]
    hat = lifted_op(law, [cofree(C) for C in Cs], guard=guard)
    H0 = op.apply(list(bases))
    hv0 = op.values(list(bases), [list(range(b.size)) for b in bases])
    inst = build(D, H0, guard=guard)
    free = cofree(inst)
    hindex = {v: i for i, v in enumerate(hat.composite_values)}
    pos = {i: n for n, i in enumerate(hat.inclusion)}
    to_idx = [(lambda w, C=C: C.index[w]) for C in Cs]
    table: list[int] | None = []
    for x in inst.elems:
        y = D.coext(lambda u: hindex[op.map(to_idx, law.kappa(D.fmap(lambda j: hv0[j], u)))], x)
        n = pos.get(hat.DH.index.get(y, -1))
        if n is None:
            table = None
            break
        table.append(n)
    explicit = None if table is None else CoalgebraMorphism(free, hat.coalgebra, tuple(table))
    ok = explicit is not None and is_coalgebra_isomorphism(explicit)
    searched = find_coalgebra_isomorphism(free, hat.coalgebra)
    return CofreeComparison(hat.coalgebra.size, len(inst), explicit, ok, searched)


# ---------------------------------------------------------------------------
# bimorphisms


def _composite_of(law: KleisliLaw, betas: Sequence[Coalgebra]) -> tuple[Structure, list]:
    bases = [b.base for b in betas]
    return law.op.apply(bases), law.op.values(bases, [list(range(b.size)) for b in bases])


def is_bimorphism(g: StructureMap, alpha: Coalgebra, betas: Sequence[Coalgebra], law: KleisliLaw) -> bool:
    """``H(betas) . g = kappa . D(g) . alpha`` elementwise, g a homomorphism."""
    _check_operands(law, betas)
    if alpha.comonad != law.outer:
        raise CoalgebraError("operand mismatch: source coalgebra comonad differs from the law")
    HB, hv = _composite_of(law, betas)
    if g.source != alpha.base or g.target != HB:
        raise CoalgebraError("operand mismatch: map must run from the source base to H(bases)")
    if not g.is_homomorphism:
        return False
    if alpha.base.pointed and g.table[alpha.base.point] != HB.point:
        return False
    D, op = law.outer, law.op
    bvals = [b.value for b in betas]
    gv = lambda a: hv[g.table[a]]  # noqa: E731
    for a in range(alpha.size):
        if op.map(bvals, hv[g.table[a]]) != law.kappa(D.fmap(gv, alpha.value(a))):
            return False
    return True


def iter_bimorphisms(alpha: Coalgebra, betas: Sequence[Coalgebra], law: KleisliLaw) -> Iterator[tuple[int, ...]]:
    """Bimorphism tables, found by a search that checks the defining square per element."""
    _check_operands(law, betas)
    HB, hv = _composite_of(law, betas)
    D, op = law.outer, law.op
    bvals = [b.value for b in betas]
    everything = range(HB.size)

    def local_ok(f, a):
        if alpha.base.pointed and a == alpha.base.point and f[a] != HB.point:
            return False
        return op.map(bvals, hv[f[a]]) == law.kappa(D.fmap(lambda b: hv[f[b]], alpha.value(a)))

    yield from _ordered_search(alpha, HB, lambda f, a, order: everything, local_ok)


def bimorphisms(alpha: Coalgebra, betas: Sequence[Coalgebra], law: KleisliLaw) -> list[tuple[int, ...]]:
    return list(iter_bimorphisms(alpha, betas, law))


@dataclass
class BimorphReport:
    coalgebra_morphisms: int
    bimorphisms: int
    injective: bool
    surjective: bool
    distribution_checked: int
    distribution_failures: int

    @property
    def bijective(self) -> bool:
        return self.injective and self.surjective

    @property
    def passed(self) -> bool:
        return self.bijective and self.coalgebra_morphisms == self.bimorphisms and self.distribution_failures == 0

    def as_dict(self) -> dict:
        return {
            "coalgebra_morphisms": self.coalgebra_morphisms,
            "bimorphisms": self.bimorphisms,
            "bijective": self.bijective,
            "distribution_checked": self.distribution_checked,
            "distribution_failures": self.distribution_failures,
            "passed": self.passed,
        }


def bimorph_correspondence(
    alpha: Coalgebra,
    betas: Sequence[Coalgebra],
    law: KleisliLaw,
    seed: int = 0,
    samples: int = 20,
    limit: int = BIMORPH_LIMIT,
) -> BimorphReport:
    """Compare coalgebra morphisms into the lifted operation with bimorphisms via ``f -> u . f``.

    Raises :class:`CoalgebraError` when either side has more than ``limit`` members.
    """
    betas = tuple(betas)
    hat = lifted_op(law, betas)
    u = hat.u()
    morphs = list(itertools.islice(coalgebra_morphisms(alpha, hat.coalgebra), limit + 1))
    bims = set(itertools.islice(iter_bimorphisms(alpha, betas, law), limit + 1))
    if len(morphs) > limit or len(bims) > limit:
        raise CoalgebraError(f"more than {limit} morphisms to compare")
    images = [tuple(u.table[v] for v in f.table) for f in morphs]
    injective = len(set(images)) == len(images)
    surjective = set(images) == bims
    # (H^(g) . f . h)# = H(g) . f# . h on sampled endomorphisms
    rng = random.Random(seed)
    checked = failures = 0
    if morphs:
        h_pool = list(coalgebra_morphisms(alpha, alpha))
        g_pools = [list(coalgebra_morphisms(b, b)) for b in betas]
        _, hv = _composite_of(law, betas)
        hindex = {v: i for i, v in enumerate(hv)}
        for _ in range(samples):
            f = rng.choice(morphs)
            h = rng.choice(h_pool)
            gs = [rng.choice(p) for p in g_pools]
            checked += 1
            try:
                hat_g = lifted_map(hat, hat, gs)
            except CoalgebraError:
                failures += 1
                continue
            lhs_m = h.then(f).then(hat_g)
            lhs = tuple(u.table[v] for v in lhs_m.table)
            fns = [(lambda a, g=g: g.table[a]) for g in gs]
            fsharp = [u.table[v] for v in f.table]
            rhs = tuple(hindex[law.op.map(fns, hv[fsharp[h.table[a]]])] for a in range(alpha.size))
            failures += lhs != rhs
    return BimorphReport(len(morphs), len(bims), injective, surjective, checked, failures)


@dataclass
class FaultReport:
    honest: BimorphReport
    corrupted: BimorphReport | None
    error: str | None

    @property
    def flagged(self) -> bool:
        if self.corrupted is None:
            return True
        c, h = self.corrupted, self.honest
        return not c.passed or (c.coalgebra_morphisms, c.bimorphisms) != (h.coalgebra_morphisms, h.bimorphisms)

    def as_dict(self) -> dict:
        return {
            "honest": self.honest.as_dict(),
            "corrupted": None if self.corrupted is None else self.corrupted.as_dict(),
            "error": self.error,
            "flagged": self.flagged,
        }


def bimorph_fault_check(
    alpha: Coalgebra,
    betas: Sequence[Coalgebra],
    law: KleisliLaw,
    corrupted: KleisliLaw,
    seed: int = 0,
    samples: int = 20,
) -> FaultReport:
    """Run the correspondence under ``law`` and under ``corrupted``.

    A corrupted law is caught when its counts move away from the honest ones,
    when the correspondence itself breaks, or when lifting fails outright.
    Both sides are computed from the same law, so a consistent bijection
    alone does not prove the law is right.
    """
    honest = bimorph_correspondence(alpha, betas, law, seed, samples)
    try:
        bad = bimorph_correspondence(alpha, betas, corrupted, seed, samples)
    except (CoalgebraError, StructureError) as e:
        return FaultReport(honest, None, str(e))
    return FaultReport(honest, bad, None)


# ---------------------------------------------------------------------------
# decomposition axiom for disjoint unions


@dataclass
class DecompositionReport:
    bimorphisms: int = 0
    decomposed: int = 0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures and self.decomposed == self.bimorphisms

    def as_dict(self) -> dict:
        return {"bimorphisms": self.bimorphisms, "decomposed": self.decomposed, "passed": self.passed, "failures": self.failures[:5]}


def check_coproduct_decomposition(law: KleisliLaw, path: Coalgebra, operands: Sequence[Coalgebra]) -> DecompositionReport:
    """Every bimorphism from a path into a disjoint union factors minimally through summand paths.

    The candidate minimal factor in summand i is the set of summand-i images;
    it must be a down-closed chain, the corestricted map must again be a
    bimorphism, and it must sit inside the chain of every other factorization.
    """
    if law.op.name != "disjoint-union":
        raise CoalgebraError("decomposition check is implemented for disjoint unions")
    if not is_path(path):
        raise CoalgebraError("source coalgebra is not a path")
    operands = tuple(operands)
    report = DecompositionReport()
    offsets = [0, operands[0].size]
    orders = [forest_order(c) for c in operands]
    supports = [set(path_supports(c, o)) for c, o in zip(operands, orders)]
    for t in bimorphisms(path, operands, law):
        report.bimorphisms += 1
        images = [set(), set()]
        for v in t:
            i = 0 if v < offsets[1] else 1
            images[i].add(v - offsets[i])
        mins = [frozenset(s) for s in images]
        if any(m not in supports[i] and m for i, m in enumerate(mins)):
            report.failures.append({"map": list(t), "reason": "summand image is not a down-closed chain"})
            continue
        incs = [subcoalgebra(c, sorted(m)) for c, m in zip(operands, mins)]
        subs = [inc.source for inc in incs]
        pos = [{x: n for n, x in enumerate(inc.table)} for inc in incs]
        HP, _ = _composite_of(law, subs)
        f0 = []
        for v in t:
            i = 0 if v < offsets[1] else 1
            f0.append(pos[i][v - offsets[i]] + (0 if i == 0 else subs[0].size))
        if not is_bimorphism(StructureMap(path.base, HP, tuple(f0)), path, subs, law):
            report.failures.append({"map": list(t), "reason": "factor is not a bimorphism"})
            continue
        # every other factorization through summand paths contains the minimal one
        for q0 in supports[0]:
            for q1 in supports[1]:
                if images[0] <= q0 and images[1] <= q1 and not (mins[0] <= q0 and mins[1] <= q1):
                    report.failures.append({"map": list(t), "reason": "not minimal"})
        report.decomposed += 1
    return report


# ---------------------------------------------------------------------------
# bounded span search


@dataclass
class SpanResult:
    found: bool
    size: int | None
    words: list | None

    def as_dict(self) -> dict:
        return {"found": self.found, "size": self.size, "span_apex": self.words}


def span_search(A: Structure, B: Structure, k: int, max_z: int) -> SpanResult:
    """Smallest apex of a span of open pathwise-embeddings between EF cofree coalgebras.

    The apex is searched among prefix-closed sets of words of pairs ``(a, b)``
    whose pairs agree atomically, closed under back and forth. Returns the
    smallest such set when it has at most ``max_z`` elements.
    """
    if A.signature != B.signature:
        raise StructureError("incompatible signatures")
    if A.pointed or B.pointed:
        raise CoalgebraError("span search runs on unpointed structures")
    items = [(arity, ta, tb) for (_, arity), ta, tb in zip(A.signature.relations, A.rels, B.rels)]

    def agrees(pos: tuple) -> bool:
        last = len(pos) - 1
        for arity, ta, tb in items:
            for combo in itertools.product(range(len(pos)), repeat=arity):
                if last not in combo:
                    continue
                if (tuple(pos[i][0] for i in combo) in ta) != (tuple(pos[i][1] for i in combo) in tb):
                    return False
        return True

    INF = float("inf")
    memo: dict = {}

    def best(pos: tuple) -> tuple[float, list]:
        """Cheapest closed subtree below ``pos`` (not counting pos itself)."""
        if len(pos) == k:
            return 0, []
        if pos in memo:
            return memo[pos]
        options = []
        for a in range(A.size):
            for b in range(B.size):
                child = pos + ((a, b),)
                if agrees(child):
                    cost, sub = best(child)
                    if cost < INF:
                        options.append(((a, b), 1 + cost, sub))
        result: tuple[float, list] = (INF, [])
        need_a, need_b = set(range(A.size)), set(range(B.size))
        for r in range(1, len(options) + 1):
            for chosen in itertools.combinations(options, r):
                if {p[0][0] for p in chosen} >= need_a and {p[0][1] for p in chosen} >= need_b:
                    cost = sum(c for _, c, _ in chosen)
                    if cost < result[0]:
                        words = []
                        for pair, _, sub in chosen:
                            words.append((pair,))
                            words.extend((pair,) + w for w in sub)
                        result = (cost, words)
        memo[pos] = result
        return result

    cost, words = best(())
    if cost == INF or cost > max_z:
        return SpanResult(False, None if cost == INF else int(cost), None)
    return SpanResult(True, int(cost), [[list(p) for p in w] for w in words])


def span_coalgebra(A: Structure, B: Structure, k: int, words: Sequence) -> tuple[CoalgebraMorphism, CoalgebraMorphism]:
    """Materialize a span apex and its two legs into the cofree coalgebras on A and B."""
    ws = sorted({tuple(tuple(p) for p in w) for w in words}, key=lambda w: (len(w), w))
    idx = {w: i for i, w in enumerate(ws)}
    rels: dict[str, set] = {}
    for name, arity, table in A.relation_items():
        rels[name] = set()
        for w in ws:
            chain = [idx[w[: j + 1]] for j in range(len(w))]
            for combo in itertools.product(range(len(w)), repeat=arity):
                if max(combo) != len(w) - 1:
                    continue
                if tuple(w[j][0] for j in combo) in table:
                    rels[name].add(tuple(chain[j] for j in combo))
    Z = Structure.build(A.signature, len(ws), rels)
    values = [tuple(idx[w[: j + 1]] for j in range(len(w))) for w in ws]
    CZ = build_partial(EF(k), Z, values)
    z = Coalgebra(CZ, tuple(CZ.index[v] for v in values))
    legs = []
    for side, S in ((0, A), (1, B)):
        FS = cofree(build("ef", S, k))
        CS = build("ef", S, k)
        legs.append(CoalgebraMorphism(z, FS, tuple(CS.index[tuple(p[side] for p in w)] for w in ws)))
    return legs[0], legs[1]


# ---------------------------------------------------------------------------
# JSON


def coalgebra_to_obj(c: Coalgebra) -> dict:
    obj = structure_to_obj(c.base)
    obj["comonad"] = c.comonad.describe()
    obj["alpha"] = list(c.alpha)
    obj["legend"] = legend(c.C)
    return obj


def coalgebra_from_obj(obj: Any) -> Coalgebra:
    """Inverse of :func:`coalgebra_to_obj`; ``alpha`` indexes into ``legend``.

    Without a legend, ``alpha`` indexes the full carrier in its standard order.
    """
    if not isinstance(obj, dict) or "alpha" not in obj or "comonad" not in obj:
        raise CoalgebraError("coalgebra JSON needs 'comonad' and 'alpha' next to the structure")
    base = structure_from_obj(obj)
    desc = obj["comonad"]
    cm = make_comonad(desc.get("kind", ""), desc.get("k"), desc.get("trunc"))
    _require_finite(cm)
    alpha = obj["alpha"]
    if not isinstance(alpha, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in alpha):
        raise CoalgebraError("alpha must be a list of carrier indices")
    if "legend" not in obj:
        return Coalgebra(build(cm, base), tuple(alpha))
    given = [value_from_json(v) for v in obj["legend"]]
    for v in given:
        if not cm.is_value(base, v):
            raise CoalgebraError(f"legend entry {value_to_json(v)!r} is not a carrier element")
    if any(not 0 <= i < len(given) for i in alpha):
        raise CoalgebraError("alpha points outside the legend")
    C = build_partial(cm, base, [given[i] for i in alpha])
    return Coalgebra(C, tuple(C.index[given[i]] for i in alpha))

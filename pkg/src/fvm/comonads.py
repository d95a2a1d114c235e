"""Game comonads in Kleisli form over finite relational structures.

Each comonad works at two levels. The value level (``last``, ``coext``,
``fmap``, ``delta``) acts on element values: words, pebbled words, labelled
paths, or walk positions. The materialized level (:class:`ComonadInstance`)
indexes those values as a carrier :class:`Structure` so ordinary maps and
homomorphism checks apply.

Element encodings:

* EF: a word is a tuple of base elements ``(a1, ..., an)``.
* Pebble: a tuple of letters ``(p, a)`` with pebble index ``p``.
* Modal: a tuple of letters ``(label, a)``; the first letter is ``("", a0)``
  with ``a0`` the point, each later letter records the relation stepped along.
* Cos: a pair ``(walk, i)`` with ``walk`` a tuple of vertices forming a closed
  walk and ``i`` a position on it.
"""

from __future__ import annotations

import functools
import itertools
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from .search import SearchBudgetExceeded, find_homomorphism
from .structures import Structure, StructureError, StructureMap, identity_map

DEFAULT_GUARD = 50_000

Value = Any


class GuardExceeded(StructureError):
    pass


def _prefix_related(s: Sequence, t: Sequence) -> bool:
    short, long_ = (s, t) if len(s) <= len(t) else (t, s)
    return tuple(long_[: len(short)]) == tuple(short)


@dataclass(frozen=True)
class Comonad:
    """Common value-level interface; subclasses fix the letter shape."""

    kind: str = field(init=False, default="")

    # value level -----------------------------------------------------------
    def last(self, x: Value) -> Value:
        return x[-1]

    def letter_elem(self, letter: Value) -> Value:
        return letter

    def letter_with(self, letter: Value, elem: Value) -> Value:
        return elem

    def coext(self, h: Callable[[Value], Value], x: Value) -> Value:
        """``h*``: replace the j-th letter's element by ``h`` of the j-th prefix."""
        return tuple(self.letter_with(x[j], h(x[: j + 1])) for j in range(len(x)))

    def fmap(self, g: Callable[[Value], Value], x: Value) -> Value:
        return self.coext(lambda u: g(self.last(u)), x)

    def delta(self, x: Value) -> Value:
        return self.coext(lambda u: u, x)

    def length(self, x: Value) -> int:
        return len(x)

    # materialized level ----------------------------------------------------
    def validate_base(self, base: Structure) -> None:
        pass

    def count(self, base: Structure) -> int:
        raise NotImplementedError

    def elements(self, base: Structure) -> list:
        raise NotImplementedError

    def relation_tuples(self, base: Structure, elems: Sequence, index: dict) -> dict[str, set]:
        raise NotImplementedError

    def holds(self, base_holds: Callable[[str, tuple], bool], name: str, arity: int, xs: Sequence) -> bool:
        """Relation predicate on carrier values given the base predicate."""
        raise NotImplementedError

    def point_value(self, base: Structure) -> Value | None:
        return None

    def is_value(self, base: Structure, v: Any) -> bool:
        """Membership in the carrier over ``base`` without materializing it."""
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# word comonads: EF and Pebble


@dataclass(frozen=True)
class _WordComonad(Comonad):
    def _letters(self, base: Structure) -> list:
        raise NotImplementedError

    def _max_len(self) -> int:
        raise NotImplementedError

    def _extra(self, prefix: Sequence, word: Sequence) -> bool:
        return True

    def count(self, base: Structure) -> int:
        m = len(self._letters(base))
        return sum(m**L for L in range(1, self._max_len() + 1))

    def elements(self, base: Structure) -> list:
        letters = self._letters(base)
        out = []
        for L in range(1, self._max_len() + 1):
            out.extend(itertools.product(letters, repeat=L))
        return out

    def _compatible(self, xs: Sequence) -> bool:
        for s, t in itertools.combinations(xs, 2):
            if not _prefix_related(s, t):
                return False
            if len(s) != len(t):
                short, long_ = (s, t) if len(s) < len(t) else (t, s)
                if not self._extra(short, long_):
                    return False
        return True

    def holds(self, base_holds, name, arity, xs) -> bool:
        return self._compatible(xs) and base_holds(name, tuple(self.letter_elem(x[-1]) for x in xs))

    def is_value(self, base, v) -> bool:
        if not isinstance(v, tuple) or not 1 <= len(v) <= self._max_len():
            return False
        letters = set(self._letters(base))
        return all(l in letters for l in v)

    def relation_tuples(self, base, elems, index) -> dict[str, set]:
        out: dict[str, set] = {name: set() for name in base.signature.names}
        for w in elems:
            L = len(w)
            prefixes = [w[: j + 1] for j in range(L)]
            lasts = [self.letter_elem(p[-1]) for p in prefixes]
            for name, arity, table in base.relation_items():
                for combo in itertools.product(range(L), repeat=arity):
                    if max(combo) != L - 1:
                        continue
                    if tuple(lasts[j] for j in combo) not in table:
                        continue
                    xs = [prefixes[j] for j in combo]
                    if all(self._extra(prefixes[j], w) for j in set(combo) if j != L - 1):
                        out[name].add(tuple(index[x] for x in xs))
        return out


@dataclass(frozen=True)
class EF(_WordComonad):
    """Ehrenfeucht-Fraisse comonad: nonempty words of length at most k."""

    k: int = 1
    kind: str = field(init=False, default="ef")

    def __post_init__(self):
        if self.k < 1:
            raise StructureError("k must be positive")

    def _letters(self, base):
        return list(range(base.size))

    def _max_len(self):
        return self.k

    def validate_base(self, base):
        if base.pointed:
            raise StructureError("EF comonad works over unpointed structures")

    def describe(self):
        return {"kind": "ef", "k": self.k}


@dataclass(frozen=True)
class Pebble(_WordComonad):
    """Pebbling comonad truncated to words of length at most ``trunc``.

    Two comparable words relate only if the pebble on the last letter of the
    shorter one is not placed again later in the longer one. For equal words
    the condition is vacuous.
    """

    k: int = 1
    trunc: int = 2
    kind: str = field(init=False, default="pebble")

    def __post_init__(self):
        if self.k < 1 or self.trunc < 1:
            raise StructureError("k and trunc must be positive")

    def letter_elem(self, letter):
        return letter[1]

    def letter_with(self, letter, elem):
        return (letter[0], elem)

    def last(self, x):
        return x[-1][1]

    def _letters(self, base):
        return [(p, a) for p in range(self.k) for a in range(base.size)]

    def _max_len(self):
        return self.trunc

    def _extra(self, prefix, word):
        p = prefix[-1][0]
        return all(q != p for q, _ in word[len(prefix):])

    def validate_base(self, base):
        if base.pointed:
            raise StructureError("use pointed_start with the pebble games; carriers are unpointed")

    def describe(self):
        return {"kind": "pebble", "k": self.k, "trunc": self.trunc}


@dataclass(frozen=True)
class PointedPebble(Pebble):
    """Pebble comonad over pointed structures, pointed at ``[(0, a0)]``.

    The relational carrier is the unpointed one; only the point is added.
    """

    kind: str = field(init=False, default="pebble-pointed")

    def validate_base(self, base):
        if not base.pointed:
            raise StructureError("pointed pebble comonad needs a pointed base")

    def point_value(self, base):
        return ((0, base.point),)

    def describe(self):
        return {"kind": "pebble-pointed", "k": self.k, "trunc": self.trunc}


# ---------------------------------------------------------------------------
# modal comonad


@dataclass(frozen=True)
class Modal(Comonad):
    """Modal comonad: labelled paths of at most k steps from the point."""

    k: int = 1
    kind: str = field(init=False, default="modal")

    def __post_init__(self):
        if self.k < 0:
            raise StructureError("k must be non-negative")

    def letter_elem(self, letter):
        return letter[1]

    def letter_with(self, letter, elem):
        return (letter[0], elem)

    def last(self, x):
        return x[-1][1]

    def validate_base(self, base):
        if not base.signature.is_modal:
            raise StructureError("modal comonad needs a modal signature")
        if not base.pointed:
            raise StructureError("modal comonad needs a pointed structure")

    def is_value(self, base, v) -> bool:
        if not isinstance(v, tuple) or not 1 <= len(v) <= self.k + 1 or v[0] != ("", base.point):
            return False
        for (_, x), step in zip(v, v[1:]):
            if not (isinstance(step, tuple) and len(step) == 2 and step[0] in base.signature):
                return False
            if base.signature.arity(step[0]) != 2 or (x, step[1]) not in base.rel(step[0]):
                return False
        return True

    def _successors(self, base):
        succ: list[list[tuple[str, int]]] = [[] for _ in range(base.size)]
        for name, arity, table in base.relation_items():
            if arity == 2:
                for x, y in sorted(table):
                    succ[x].append((name, y))
        return succ

    def count(self, base):
        succ = self._successors(base)
        layer = {base.point: 1}
        total = 1
        for _ in range(self.k):
            nxt: dict[int, int] = {}
            for x, c in layer.items():
                for _, y in succ[x]:
                    nxt[y] = nxt.get(y, 0) + c
            layer = nxt
            total += sum(layer.values())
        return total

    def elements(self, base):
        succ = self._successors(base)
        out = [(("", base.point),)]
        frontier = list(out)
        for _ in range(self.k):
            nxt = []
            for path in frontier:
                for name, y in succ[path[-1][1]]:
                    nxt.append(path + ((name, y),))
            nxt.sort()
            out.extend(nxt)
            frontier = nxt
        return out

    def holds(self, base_holds, name, arity, xs):
        if arity == 1:
            return base_holds(name, (self.last(xs[0]),))
        s, t = xs
        return len(t) == len(s) + 1 and tuple(t[:-1]) == tuple(s) and t[-1][0] == name

    def relation_tuples(self, base, elems, index):
        out: dict[str, set] = {name: set() for name in base.signature.names}
        for path in elems:
            i = index[path]
            for name, arity, table in base.relation_items():
                if arity == 1 and (path[-1][1],) in table:
                    out[name].add((i,))
            if len(path) > 1:
                out[path[-1][0]].add((index[path[:-1]], i))
        return out

    def point_value(self, base):
        return (("", base.point),)

    def describe(self):
        return {"kind": "modal", "k": self.k}


# ---------------------------------------------------------------------------
# closed-walk comonad


@dataclass(frozen=True)
class Cos(Comonad):
    """Closed walks of length at most ``trunc`` with a position on the walk."""

    trunc: int = 6
    kind: str = field(init=False, default="cos")

    def last(self, x):
        walk, i = x
        return walk[i]

    def coext(self, h, x):
        walk, i = x
        return (tuple(h((walk, j)) for j in range(len(walk))), i)

    def length(self, x):
        return len(x[0])

    def _edge_relation(self, base):
        binary = base.signature.binary()
        if len(binary) != 1 or len(base.signature.relations) != 1:
            raise StructureError("Cos needs a graph signature with one binary relation")
        return binary[0]

    def validate_base(self, base):
        name = self._edge_relation(base)
        table = base.rel(name)
        if any((y, x) not in table for x, y in table):
            raise StructureError("Cos needs an undirected (symmetric) edge relation")

    def _walks(self, base):
        name = self._edge_relation(base)
        table = base.rel(name)
        succ = [sorted(y for x, y in table if x == v) for v in range(base.size)]
        for L in range(1, self.trunc + 1):
            found = []

            def extend(walk):
                if len(walk) == L:
                    if (walk[-1], walk[0]) in table:
                        found.append(tuple(walk))
                    return
                for y in succ[walk[-1]]:
                    walk.append(y)
                    extend(walk)
                    walk.pop()

            for v in range(base.size):
                extend([v])
            yield from found

    def count(self, base):
        return sum(len(w) for w in self._walks(base))

    def elements(self, base):
        return [(w, i) for w in self._walks(base) for i in range(len(w))]

    def holds(self, base_holds, name, arity, xs):
        (c, i), (d, j) = xs
        L = len(c)
        return tuple(c) == tuple(d) and (j - i) % L in (1, L - 1)

    def relation_tuples(self, base, elems, index):
        name = self._edge_relation(base)
        rel = set()
        for x in elems:
            walk, i = x
            L = len(walk)
            for j in {(i + 1) % L, (i - 1) % L}:
                rel.add((index[x], index[(walk, j)]))
        return {name: rel}

    def describe(self):
        return {"kind": "cos", "trunc": self.trunc}


def make_comonad(kind: str, k: int | None = None, trunc: int | None = None) -> Comonad:
    kind = kind.lower()
    if kind == "ef":
        return EF(k if k is not None else 1)
    if kind == "pebble":
        kk = k if k is not None else 1
        return Pebble(kk, trunc if trunc is not None else 2 * kk)
    if kind in ("pebble-pointed", "p2"):
        kk = k if k is not None else 2
        return PointedPebble(kk, trunc if trunc is not None else 2 * kk)
    if kind == "modal":
        return Modal(k if k is not None else 1)
    if kind == "cos":
        return Cos(trunc if trunc is not None else 6)
    raise StructureError(f"unknown comonad kind {kind!r}")


# ---------------------------------------------------------------------------
# materialized instances


@dataclass(frozen=True, eq=False)
class ComonadInstance:
    comonad: Comonad
    base: Structure
    elems: tuple
    carrier: Structure
    index: dict = field(repr=False)

    @property
    def kind(self) -> str:
        return self.comonad.kind

    def __len__(self) -> int:
        return len(self.elems)

    def value(self, i: int) -> Value:
        return self.elems[i]

    def counit(self) -> StructureMap:
        return counit(self)


@functools.lru_cache(maxsize=512)
def _build_cached(comonad: Comonad, base: Structure, guard: int) -> ComonadInstance:
    comonad.validate_base(base)
    n = comonad.count(base)
    if n > guard:
        raise GuardExceeded(f"carrier of {n} elements exceeds the guard of {guard}")
    elems = tuple(comonad.elements(base))
    index = {x: i for i, x in enumerate(elems)}
    rels = comonad.relation_tuples(base, elems, index)
    pv = comonad.point_value(base)
    carrier = Structure.build(base.signature, len(elems), rels, index[pv] if pv is not None else None)
    return ComonadInstance(comonad, base, elems, carrier, index)


def build_partial(comonad: Comonad, base: Structure, values: Iterable[Value]) -> ComonadInstance:
    """Instance restricted to ``values`` and all their prefixes.

    The carrier is the induced substructure of the full carrier, which is
    all a coalgebra needs when its structure map lands inside ``values``.
    """
    comonad.validate_base(base)
    keep = set()
    for v in values:
        for j in range(1, len(v) + 1):
            keep.add(v[:j])
    pv = comonad.point_value(base)
    if pv is not None:
        keep.add(pv)
    elems = tuple(sorted(keep, key=lambda w: (len(w), repr(w))))
    index = {x: i for i, x in enumerate(elems)}
    rels = comonad.relation_tuples(base, elems, index)
    carrier = Structure.build(base.signature, len(elems), rels, index[pv] if pv is not None else None)
    return ComonadInstance(comonad, base, elems, carrier, index)


def build(
    kind: str | Comonad,
    base: Structure,
    k: int | None = None,
    trunc: int | None = None,
    guard: int = DEFAULT_GUARD,
) -> ComonadInstance:
    comonad = kind if isinstance(kind, Comonad) else make_comonad(kind, k, trunc)
    return _build_cached(comonad, base, guard)


def counit(C: ComonadInstance) -> StructureMap:
    last = C.comonad.last
    return StructureMap(C.carrier, C.base, tuple(last(x) for x in C.elems))


def coextend(C: ComonadInstance, f: StructureMap, guard: int = DEFAULT_GUARD) -> StructureMap:
    """``f*`` for a Kleisli morphism ``f: C(A) -> B`` as a map into ``C(B)``."""
    if f.source != C.carrier:
        raise StructureError("Kleisli morphism does not start at this carrier")
    target = build(C.comonad, f.target, guard=guard)
    table = []
    for x in C.elems:
        y = C.comonad.coext(lambda u: f.table[C.index[u]], x)
        if C.comonad.length(y) != C.comonad.length(x):
            raise AssertionError("coextension changed a length")
        table.append(target.index[y])
    return StructureMap(C.carrier, target.carrier, tuple(table))


def comultiplication(C: ComonadInstance, guard: int = DEFAULT_GUARD) -> StructureMap:
    """``delta = (id)*`` into the carrier built over the carrier."""
    return coextend(C, identity_map(C.carrier), guard=guard)


def fmap(C: ComonadInstance, g: StructureMap, guard: int = DEFAULT_GUARD) -> StructureMap:
    """``C(g) = (g . counit)*``: letterwise application."""
    if g.source != C.base:
        raise StructureError("map does not start at the comonad's base")
    return coextend(C, counit(C).then(g), guard=guard)


def kleisli_compose(C: ComonadInstance, f: StructureMap, g: StructureMap) -> StructureMap:
    """Kleisli composite ``g . f*`` of ``f: C(A) -> B`` and ``g: C(B) -> D``."""
    return coextend(C, f).then(g)


# ---------------------------------------------------------------------------
# law checking


@dataclass
class LawResult:
    name: str
    checked: int = 0
    failures: int = 0
    counterexample: Any = None

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def record(self, ok: bool, witness: Any) -> None:
        self.checked += 1
        if not ok:
            self.failures += 1
            if self.counterexample is None:
                self.counterexample = witness

    def as_dict(self) -> dict:
        return {
            "equation": self.name,
            "checked": self.checked,
            "passed": self.passed,
            "counterexample": None if self.counterexample is None else repr(self.counterexample),
        }


@dataclass
class LawReport:
    comonad: dict
    base: Structure
    results: dict[str, LawResult]
    sampled_morphisms: int
    notices: list[str]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def as_dict(self) -> dict:
        return {
            "comonad": self.comonad,
            "base_size": self.base.size,
            "sampled_morphisms": self.sampled_morphisms,
            "passed": self.passed,
            "equations": [r.as_dict() for r in self.results.values()],
            "notices": self.notices,
        }


LAW_NAMES = (
    "counit* = id",
    "counit . f* = f",
    "(g . f*)* = g* . f*",
    "counit . delta = id",
    "C(counit) . delta = id",
    "delta . delta = C(delta) . delta",
    "f* = C(f) . delta",
    "f* is a homomorphism",
)


def _sample_kleisli(C: ComonadInstance, targets: Sequence[Structure], rng: random.Random):
    """A random homomorphism out of C's carrier into one of ``targets``."""
    order = list(range(len(targets)))
    rng.shuffle(order)
    for i in order:
        B = targets[i]
        if B.signature != C.base.signature or B.pointed != C.base.pointed:
            continue
        try:
            f = find_homomorphism(C.carrier, B, rng=rng, budget=20_000)
        except SearchBudgetExceeded:
            continue
        if f is not None:
            return f
    return None


def check_comonad_laws(
    C: ComonadInstance,
    sample_targets: Sequence[Structure],
    seed: int = 0,
    samples: int = 10,
) -> LawReport:
    """Check the Kleisli-form and comonoid-form laws elementwise."""
    cm = C.comonad
    rng = random.Random(seed)
    results = {name: LawResult(name) for name in LAW_NAMES}
    notices: list[str] = []
    for x in C.elems:
        results["counit* = id"].record(cm.coext(cm.last, x) == x, x)
        d = cm.delta(x)
        results["counit . delta = id"].record(cm.last(d) == x, x)
        results["C(counit) . delta = id"].record(cm.fmap(cm.last, d) == x, x)
        results["delta . delta = C(delta) . delta"].record(cm.delta(d) == cm.fmap(cm.delta, d), x)

    sampled = 0
    for _ in range(samples):
        f = _sample_kleisli(C, sample_targets, rng)
        if f is None:
            notices.append("no homomorphism from the carrier into any sample target")
            break
        CB = build(cm, f.target)
        g = _sample_kleisli(CB, sample_targets, rng)
        if g is None:
            notices.append("no homomorphism out of C(B) for a sampled B; skipped g-law")
        sampled += 1
        fv = lambda u: f.table[C.index[u]]  # noqa: E731
        for x in C.elems:
            fx = cm.coext(fv, x)
            results["counit . f* = f"].record(cm.last(fx) == fv(x), (x, f.table))
            results["f* = C(f) . delta"].record(cm.fmap(fv, cm.delta(x)) == fx, (x, f.table))
            results["f* is a homomorphism"].record(fx in CB.index, (x, f.table))
            if g is not None:
                gv = lambda u: g.table[CB.index[u]]  # noqa: E731
                lhs = cm.coext(lambda u: gv(cm.coext(fv, u)), x)
                rhs = cm.coext(gv, fx)
                results["(g . f*)* = g* . f*"].record(lhs == rhs, (x, f.table, g.table))
        fstar = coextend(C, f)
        results["f* is a homomorphism"].record(fstar.is_homomorphism, f.table)
    return LawReport(cm.describe(), C.base, results, sampled, notices)


# ---------------------------------------------------------------------------
# JSON form of element values (words nest tuples; JSON only has lists)


def value_to_json(v: Value) -> Any:
    if isinstance(v, tuple):
        return [value_to_json(x) for x in v]
    return v


def value_from_json(v: Any) -> Value:
    if isinstance(v, list):
        return tuple(value_from_json(x) for x in v)
    return v


def legend(C: ComonadInstance) -> list:
    """Element legend of a carrier: position ``i`` holds the value of element ``i``."""
    return [value_to_json(x) for x in C.elems]

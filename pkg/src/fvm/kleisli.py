"""Kleisli laws and comonad morphisms as executable maps, with an axiom checker.

A law for an n-ary operation H has an outer comonad D (applied to the
composite) and inner comonads C_i (applied to the operands). Its component
at operands A_1..A_n sends elements of D(H(A)) to elements of H(C_1 A_1, ...).
Everything here is computed on element *values*: operands carry value lists
(plain indices for bases, words for carriers) and H builds tagged values
from them, so one law function serves every operand.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

from .comonads import EF, Comonad, Cos, Modal, Pebble, PointedPebble, build, fmap as comonad_fmap
from .search import SearchBudgetExceeded, find_homomorphism
from .structures import (
    Structure,
    StructureError,
    StructureMap,
    canonical_form,
    disjoint_union,
    enumerate_structures,
    merge_R,
    product,
    product_coords,
    projection,
)

STAR = "*"


# ---------------------------------------------------------------------------
# operations on values


@dataclass(frozen=True)
class Operation:
    name: str
    arity: int

    def apply(self, structs: Sequence[Structure]) -> Structure:
        raise NotImplementedError

    def values(self, structs: Sequence[Structure], vals: Sequence[Sequence]) -> list:
        """Value of each element of ``apply(structs)`` given operand values."""
        raise NotImplementedError

    def map(self, fs: Sequence[Callable], v: Any) -> Any:
        raise NotImplementedError

    def holds(self, name: str, xs: Sequence, operand_holds: Sequence[Callable]) -> bool:
        """Relation predicate on composite values from operand predicates."""
        raise NotImplementedError


@dataclass(frozen=True)
class Identity(Operation):
    name: str = "identity"
    arity: int = 1

    def apply(self, structs):
        return structs[0]

    def values(self, structs, vals):
        return list(vals[0])

    def map(self, fs, v):
        return fs[0](v)

    def holds(self, name, xs, operand_holds):
        return operand_holds[0](name, tuple(xs))


@dataclass(frozen=True)
class DisjointUnion(Operation):
    name: str = "disjoint-union"
    arity: int = 2

    def apply(self, structs):
        return disjoint_union(structs[0], structs[1])

    def values(self, structs, vals):
        return [(0, v) for v in vals[0]] + [(1, v) for v in vals[1]]

    def map(self, fs, v):
        return (v[0], fs[v[0]](v[1]))

    def holds(self, name, xs, operand_holds):
        tags = {x[0] for x in xs}
        if len(tags) != 1:
            return False
        (i,) = tags
        return operand_holds[i](name, tuple(x[1] for x in xs))


@dataclass(frozen=True)
class Product(Operation):
    name: str = "product"
    arity: int = 2

    def apply(self, structs):
        return product(list(structs))

    def values(self, structs, vals):
        sizes = [S.size for S in structs]
        total = 1
        for n in sizes:
            total *= n
        return [tuple(vals[i][c] for i, c in enumerate(product_coords(sizes, x))) for x in range(total)]

    def map(self, fs, v):
        return tuple(f(x) for f, x in zip(fs, v))

    def holds(self, name, xs, operand_holds):
        return all(h(name, tuple(x[i] for x in xs)) for i, h in enumerate(operand_holds))


@dataclass(frozen=True)
class Merge(Operation):
    relation: str = "E"
    name: str = "merge"
    arity: int = 2

    def apply(self, structs):
        return merge_R(structs[0], structs[1], self.relation)

    def values(self, structs, vals):
        return [STAR] + [(0, v) for v in vals[0]] + [(1, v) for v in vals[1]]

    def map(self, fs, v):
        if v == STAR:
            return STAR
        return (v[0], fs[v[0]](v[1]))

    def holds(self, name, xs, operand_holds, points=None):
        raise NotImplementedError("merge targets are materialized")


# ---------------------------------------------------------------------------
# laws


@dataclass(frozen=True)
class KleisliLaw:
    name: str
    op: Operation
    outer: Comonad
    inner: tuple[Comonad, ...]
    kappa: Callable[[Any], Any] = field(compare=False)
    citation: str = ""

    @property
    def arity(self) -> int:
        return self.op.arity

    @property
    def truncated(self) -> bool:
        return any(isinstance(c, (Pebble, Cos)) for c in (self.outer, *self.inner))

    def describe(self) -> dict:
        return {
            "law": self.name,
            "operation": self.op.name,
            "outer": self.outer.describe(),
            "inner": [c.describe() for c in self.inner],
        }


def _kappa_coproduct(outer: Comonad) -> Callable:
    def kappa(x):
        tag = outer.letter_elem(x[-1])[0]
        nu = tuple(outer.letter_with(l, outer.letter_elem(l)[1]) for l in x if outer.letter_elem(l)[0] == tag)
        return (tag, nu)

    return kappa


def _kappa_merge(x):
    if len(x) == 1:
        return STAR
    i, a0 = x[1][1]
    path = (("", a0),) + tuple((lab, v[1]) for lab, v in x[2:])
    return (i, path)


def _kappa_product(outer: Comonad, n: int) -> Callable:
    def kappa(x):
        return tuple(outer.fmap(lambda v, i=i: v[i], x) for i in range(n))

    return kappa


def _kappa_ef_to_pebble(x):
    return tuple((j, a) for j, a in enumerate(x))


def _kappa_modal_to_p2(x):
    return tuple((j % 2, letter[1]) for j, letter in enumerate(x))


def _kappa_cos_to_p3(x):
    walk, i = x
    return tuple((2 if j == 0 else j % 2, walk[j]) for j in range(i + 1))


def kappa_coproduct_law(kind: str, k: int, trunc: int | None = None) -> KleisliLaw:
    if kind == "ef":
        cm: Comonad = EF(k)
    elif kind == "pebble":
        cm = Pebble(k, trunc if trunc is not None else 2 * k)
    else:
        raise StructureError("coproduct laws exist for EF and Pebble")
    return KleisliLaw(f"coproduct-{kind}", DisjointUnion(), cm, (cm, cm), _kappa_coproduct(cm), "coproducts")


def kappa_merge_law(k: int, R: str = "E") -> KleisliLaw:
    return KleisliLaw("merge-modal", Merge(R), Modal(k + 1), (Modal(k), Modal(k)), _kappa_merge, "merge with choice")


def kappa_product_law(kind: str, k: int, n: int = 2, trunc: int | None = None) -> KleisliLaw:
    if kind == "ef":
        cm: Comonad = EF(k)
    elif kind == "pebble":
        cm = Pebble(k, trunc if trunc is not None else 2 * k)
    elif kind == "modal":
        cm = Modal(k)
    else:
        raise StructureError(f"unknown kind {kind!r}")
    return KleisliLaw(f"product-{kind}", Product(arity=n), cm, (cm,) * n, _kappa_product(cm, n), "products")


def morphism_ef_to_pebble_law(k: int, trunc: int | None = None) -> KleisliLaw:
    t = trunc if trunc is not None else k
    if t < k:
        raise StructureError("target truncation must be at least k")
    return KleisliLaw("ef-to-pebble", Identity(), EF(k), (Pebble(k, t),), _kappa_ef_to_pebble, "comonad morphism")


def morphism_modal_to_p2_law(k: int) -> KleisliLaw:
    return KleisliLaw("modal-to-p2", Identity(), Modal(k), (PointedPebble(2, k + 1),), _kappa_modal_to_p2, "comonad morphism")


def morphism_cos_to_p3_law(trunc: int = 4) -> KleisliLaw:
    return KleisliLaw("cos-to-p3", Identity(), Cos(trunc), (Pebble(3, trunc),), _kappa_cos_to_p3, "comonad morphism")


LAW_REGISTRY: dict[str, Callable[..., KleisliLaw]] = {
    "coproduct-ef": lambda k, trunc=None: kappa_coproduct_law("ef", k),
    "coproduct-pebble": lambda k, trunc=None: kappa_coproduct_law("pebble", k, trunc),
    "merge-modal": lambda k, trunc=None: kappa_merge_law(k),
    "product-ef": lambda k, trunc=None: kappa_product_law("ef", k),
    "product-pebble": lambda k, trunc=None: kappa_product_law("pebble", k, trunc=trunc),
    "product-modal": lambda k, trunc=None: kappa_product_law("modal", k),
    "ef-to-pebble": lambda k, trunc=None: morphism_ef_to_pebble_law(k, trunc),
    "modal-to-p2": lambda k, trunc=None: morphism_modal_to_p2_law(k),
    "cos-to-p3": lambda k=None, trunc=None: morphism_cos_to_p3_law(trunc if trunc is not None else 4),
}


def get_law(name: str, k: int = 1, trunc: int | None = None) -> KleisliLaw:
    if name not in LAW_REGISTRY:
        raise StructureError(f"unknown law {name!r}; known: {sorted(LAW_REGISTRY)}")
    return LAW_REGISTRY[name](k, trunc)


def with_swapped_outputs(law: KleisliLaw, x1: Any, x2: Any) -> KleisliLaw:
    """A deliberately broken copy of ``law`` exchanging two outputs."""
    base = law.kappa

    def kappa(x):
        if x == x1:
            return base(x2)
        if x == x2:
            return base(x1)
        return base(x)

    return replace(law, kappa=kappa, name=law.name + "+fault")


# ---------------------------------------------------------------------------
# components


@dataclass(frozen=True, eq=False)
class LawInstance:
    """A law evaluated at concrete operands."""

    law: KleisliLaw
    bases: tuple[Structure, ...]
    composite: Structure
    composite_values: list
    source: Any  # ComonadInstance of outer over the composite
    source_values: list
    inner: tuple

    def kappa_value(self, i: int) -> Any:
        return self.law.kappa(self.source_values[i])


def instantiate(law: KleisliLaw, bases: Sequence[Structure]) -> LawInstance:
    if len(bases) != law.arity:
        raise StructureError(f"{law.name} takes {law.arity} operands")
    bases = tuple(bases)
    H = law.op.apply(bases)
    hv = law.op.values(bases, [list(range(b.size)) for b in bases])
    D = build(law.outer, H)
    sv = [law.outer.fmap(lambda i: hv[i], x) for x in D.elems]
    inner = tuple(build(c, b) for c, b in zip(law.inner, bases))
    return LawInstance(law, bases, H, hv, D, sv, inner)


def target_structure(inst: LawInstance) -> tuple[Structure, dict]:
    """Materialized H(C_1 A_1, ...) and its value index."""
    carriers = [C.carrier for C in inst.inner]
    T = inst.law.op.apply(carriers)
    vals = inst.law.op.values(carriers, [list(C.elems) for C in inst.inner])
    return T, {v: i for i, v in enumerate(vals)}


def component(law: KleisliLaw, bases: Sequence[Structure]) -> StructureMap:
    """The component of the law at ``bases`` as a map of materialized structures."""
    inst = instantiate(law, bases)
    T, index = target_structure(inst)
    table = tuple(index[inst.kappa_value(i)] for i in range(len(inst.source_values)))
    return StructureMap(inst.source.carrier, T, table)


def law_bases(kind: str, max_size: int) -> list[Structure]:
    """Isomorphism-class representatives on {E:2}, pointed where the comonad needs it."""
    pointed = kind in ("modal", "pebble-pointed")
    return list(enumerate_structures({"E": 2}, max_size, up_to_iso=True, pointed=pointed))


def operand_pool(law: KleisliLaw, max_size: int) -> list[Structure]:
    """Operands for a law sweep; loopless undirected graphs for closed walks."""
    from .spectra import undirected_graphs

    kinds = [c.kind for c in (law.outer, *law.inner)]
    if "cos" not in kinds:
        return law_bases(law.inner[0].kind, max_size)
    seen, pool = set(), []
    for g in undirected_graphs(max_size):
        key = canonical_form(g)
        if key not in seen:
            seen.add(key)
            pool.append(g)
    return pool


def kappa_coproduct(kind: str, k: int, A1: Structure, A2: Structure, trunc: int | None = None) -> StructureMap:
    return component(kappa_coproduct_law(kind, k, trunc), [A1, A2])


def kappa_merge(k: int, A1: Structure, A2: Structure, R: str = "E") -> StructureMap:
    return component(kappa_merge_law(k, R), [A1, A2])


def kappa_product(kind: str, k: int, family: Sequence[Structure], trunc: int | None = None) -> StructureMap:
    return component(kappa_product_law(kind, k, len(family), trunc), family)


def morphism_ef_to_pebble(k: int, A: Structure, trunc: int | None = None) -> StructureMap:
    return component(morphism_ef_to_pebble_law(k, trunc), [A])


def morphism_modal_to_p2(k: int, A: Structure) -> StructureMap:
    return component(morphism_modal_to_p2_law(k), [A])


def morphism_cos_to_p3(G: Structure, trunc: int = 4) -> StructureMap:
    return component(morphism_cos_to_p3_law(trunc), [G])


def _operand_holds(C) -> Callable:
    base = C.base

    def base_holds(name, t):
        return tuple(t) in base.rel(name)

    def h(name, xs):
        return C.comonad.holds(base_holds, name, base.signature.arity(name), xs)

    return h


def component_is_homomorphism(inst: LawInstance) -> tuple[bool, Any]:
    """Relation preservation of the component, without materializing large targets."""
    if isinstance(inst.law.op, Merge):
        T, index = target_structure(inst)
        f = StructureMap(inst.source.carrier, T, tuple(index[inst.kappa_value(i)] for i in range(len(inst.source_values))))
        return f.is_homomorphism, None if f.is_homomorphism else "merge component"
    holds = [_operand_holds(C) for C in inst.inner]
    kv = [inst.kappa_value(i) for i in range(len(inst.source_values))]
    for name, _, table in inst.source.carrier.relation_items():
        for t in table:
            if not inst.law.op.holds(name, [kv[i] for i in t], holds):
                return False, (name, [inst.source_values[i] for i in t])
    # point preservation for pointed comonads
    if inst.source.carrier.pointed:
        pv = [c.point_value(b) for c, b in zip(inst.law.inner, inst.bases)]
        hp = inst.composite_values[inst.composite.point]
        want = inst.law.op.map([(lambda _, p=p: p) for p in pv], hp)
        got = kv[inst.source.carrier.point]
        if got != want:
            return False, ("point", got)
    return True, None


# ---------------------------------------------------------------------------
# FVM witness composition


def fvm_compose_witness(law: KleisliLaw, fs: Sequence[StructureMap], bases: Sequence[Structure]) -> StructureMap:
    """``H(f_1, ..., f_n) . kappa`` for Kleisli morphisms ``f_i: C_i(A_i) -> B_i``."""
    inst = instantiate(law, bases)
    if len(fs) != law.arity:
        raise StructureError("operand mismatch")
    for f, C in zip(fs, inst.inner):
        if f.source != C.carrier:
            raise StructureError("operand mismatch: morphism does not start at the operand carrier")
    targets = [f.target for f in fs]
    HB = law.op.apply(targets)
    hb_vals = law.op.values(targets, [list(range(t.size)) for t in targets])
    hb_index = {v: i for i, v in enumerate(hb_vals)}
    fns = [(lambda w, f=f, C=C: f.table[C.index[w]]) for f, C in zip(fs, inst.inner)]
    table = tuple(hb_index[law.op.map(fns, inst.kappa_value(i))] for i in range(len(inst.source_values)))
    out = StructureMap(inst.source.carrier, HB, table)
    if not out.is_homomorphism:
        raise AssertionError("composed witness is not a homomorphism")
    return out


# ---------------------------------------------------------------------------
# axiom checking


@dataclass
class AxiomTally:
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
            "axiom": self.name,
            "checked": self.checked,
            "passed": self.passed,
            "counterexample": None if self.counterexample is None else repr(self.counterexample),
        }


AXIOMS = (
    "homomorphism",
    "naturality",
    "K1",
    "K2",
    "kleisli-counit",
    "kleisli-coextension",
    "projections",
)


@dataclass
class LawReport:
    law: dict
    operand_tuples: int
    tallies: dict[str, AxiomTally]
    truncated: bool
    notices: list[str]

    @property
    def comonoid_form_passed(self) -> bool:
        return all(self.tallies[a].passed for a in ("naturality", "K1", "K2"))

    @property
    def kleisli_form_passed(self) -> bool:
        return all(self.tallies[a].passed for a in ("kleisli-counit", "kleisli-coextension"))

    @property
    def forms_agree(self) -> bool:
        return self.comonoid_form_passed == self.kleisli_form_passed

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.tallies.values())

    def as_dict(self) -> dict:
        return {
            "law": self.law,
            "operand_tuples": self.operand_tuples,
            "truncated_verification": self.truncated,
            "passed": self.passed,
            "comonoid_form_passed": self.comonoid_form_passed,
            "kleisli_form_passed": self.kleisli_form_passed,
            "forms_agree": self.forms_agree,
            "axioms": [t.as_dict() for t in self.tallies.values()],
            "notices": self.notices,
        }


def _random_hom(
    source: Structure, pool: Sequence[Structure], rng: random.Random, budget: int = 20_000
) -> StructureMap | None:
    order = list(range(len(pool)))
    rng.shuffle(order)
    for i in order:
        B = pool[i]
        if B.signature != source.signature or B.pointed != source.pointed:
            continue
        try:
            f = find_homomorphism(source, B, rng=rng, budget=budget)
        except SearchBudgetExceeded:
            continue
        if f is not None:
            return f
    return None


def _random_kleisli(C, pool: Sequence[Structure], rng: random.Random) -> StructureMap | None:
    """A random morphism out of a carrier, falling back to a base map after the counit."""
    f = _random_hom(C.carrier, pool, rng)
    if f is not None:
        return f
    g = _random_hom(C.base, pool, rng)
    if g is None:
        return None
    return C.counit().then(g)


# a corrupted law can produce values outside the structures it is applied to
_EVAL_ERRORS = (IndexError, KeyError, TypeError, ValueError)


def _agree(lhs: Callable[[], Any], rhs: Callable[[], Any]) -> bool:
    """Equality of two evaluations; an evaluation that blows up counts as disagreement."""
    try:
        return lhs() == rhs()
    except _EVAL_ERRORS:
        return False


def check_kleisli_law(
    law: KleisliLaw,
    operand_tuples: Sequence[Sequence[Structure]],
    seed: int = 0,
    targets: Sequence[Structure] | None = None,
    samples: int = 2,
) -> LawReport:
    """Check naturality, K1, K2 and the Kleisli-form equations elementwise."""
    rng = random.Random(seed)
    tallies = {a: AxiomTally(a) for a in AXIOMS}
    notices: list[str] = []
    D = law.outer
    op = law.op
    kappa = law.kappa
    for bases in operand_tuples:
        inst = instantiate(law, bases)
        try:
            ok, where = component_is_homomorphism(inst)
        except _EVAL_ERRORS as exc:
            ok, where = False, f"component undefined: {exc!r}"
        tallies["homomorphism"].record(ok, where)
        pool = list(targets) if targets is not None else list(bases)
        counits = [c.last for c in law.inner]
        deltas = [c.delta for c in law.inner]
        for x in inst.source_values:
            # K1: H(counits) . kappa = counit
            k1 = _agree(lambda: op.map(counits, kappa(x)), lambda: D.last(x))
            tallies["K1"].record(k1, x)
            # K2: kappa . D(kappa) . delta = H(deltas) . kappa
            tallies["K2"].record(_agree(lambda: kappa(D.fmap(kappa, D.delta(x))), lambda: op.map(deltas, kappa(x))), x)
            # Kleisli form: the counit equation again, and
            # kappa . (H(f) . kappa)* = H(f*) . kappa with f the identity family
            tallies["kleisli-counit"].record(k1, x)
            ids = [(lambda w, c=c: c.coext(lambda u: u, w)) for c in law.inner]
            tallies["kleisli-coextension"].record(
                _agree(lambda: kappa(D.coext(kappa, x)), lambda: op.map(ids, kappa(x))), x
            )
        if isinstance(op, Product):
            for i in range(op.arity):
                proj = projection(list(bases), i)
                Cpi = comonad_fmap(inst.source, proj)
                Ci = inst.inner[i]
                for j, x in enumerate(inst.source_values):
                    ok = _agree(lambda: kappa(x)[i], lambda: Ci.elems[Cpi.table[j]])
                    tallies["projections"].record(ok, x)
        for _ in range(samples):
            gs = [_random_hom(b, pool, rng) for b in bases]
            if any(g is None for g in gs):
                notices.append("no base homomorphism for a naturality sample")
            else:
                gfn = [(lambda a, g=g: g.table[a]) for g in gs]
                gmaps = [(lambda w, c=c, g=g: c.fmap(g, w)) for c, g in zip(law.inner, gfn)]
                for x in inst.source_values:
                    ok = _agree(
                        lambda: kappa(D.fmap(lambda v: op.map(gfn, v), x)),
                        lambda: op.map(gmaps, kappa(x)),
                    )
                    tallies["naturality"].record(ok, (x, [g.table for g in gs]))
            fs = [_random_kleisli(C, pool, rng) for C in inst.inner]
            if any(f is None for f in fs):
                notices.append("no Kleisli morphism for a coextension sample")
                continue
            ffn = [(lambda w, f=f, C=C: f.table[C.index[w]]) for f, C in zip(fs, inst.inner)]
            fext = [(lambda w, c=c, f=f: c.coext(f, w)) for c, f in zip(law.inner, ffn)]
            for x in inst.source_values:
                ok = _agree(
                    lambda: kappa(D.coext(lambda u: op.map(ffn, kappa(u)), x)),
                    lambda: op.map(fext, kappa(x)),
                )
                tallies["kleisli-coextension"].record(ok, (x, [f.table for f in fs]))
    if not isinstance(op, Product):
        del tallies["projections"]
    return LawReport(law.describe(), len(operand_tuples), tallies, law.truncated, notices)

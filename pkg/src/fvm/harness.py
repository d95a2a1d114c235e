"""Property harness for composition theorems.

A case fixes an operation, a comonad kind, a fragment and resource indices.
Operand tuples are sampled so that each pair ``(A_i, B_i)`` satisfies the
premise relation; the harness then decides the same relation on the
composites. Registered theorems must survive every sample; registered
counterexamples must be found.
"""

from __future__ import annotations

import functools
import itertools
import json
import random
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Iterator, Sequence

from . import structures as st
from .games import BIJECTIVE_PEBBLE_LIMIT, count_equiv, decide
from .structures import Signature, Structure, StructureError

THEOREM = "THEOREM"
COUNTEREXAMPLE = "COUNTEREXAMPLE-EXPECTED"

OPERATIONS = ("disjoint-union", "pointed-coproduct", "product", "merge", "vee", "reduct")
TRANSLATIONS = ("equality", "connectivity", "global", "weak")

EF_SIG = (("E", 2),)
MODAL_SIG = (("E", 2), ("P", 1))
WEAK_SIG = (("E", 2), ("S", 2))
REDUCT_SIG = (("E", 2), ("P", 1))


class HarnessError(StructureError):
    pass


@dataclass(frozen=True)
class Registered:
    status: str
    statement: str
    bump: int = 0  # k_out - k_in


def _theorem(statement: str, bump: int = 0) -> Registered:
    return Registered(THEOREM, statement, bump)


_DU = "disjoint union preserves {rel} componentwise"
_PR = "binary product preserves {rel} componentwise"

_REL = {
    "pe": "one-way homomorphic preservation (positive existential)",
    "exist": "one-way embedding preservation (existential)",
    "count": "counting equivalence",
    "full": "full equivalence",
}

REGISTRY: dict[tuple[str, str, str, str | None], Registered] = {}
for _kind in ("ef", "pebble"):
    for _frag in ("pe", "exist", "count", "full"):
        REGISTRY[("disjoint-union", _kind, _frag, None)] = _theorem(_DU.format(rel=_REL[_frag]))
        REGISTRY[("product", _kind, _frag, None)] = _theorem(_PR.format(rel=_REL[_frag]))
for _frag in ("pe", "count", "full"):
    REGISTRY[("product", "modal", _frag, None)] = _theorem(_PR.format(rel=_REL[_frag]))
    REGISTRY[("merge", "modal", _frag, None)] = _theorem(
        f"merging two pointed structures under a fresh root preserves {_REL[_frag]} with depth raised by one", 1
    )
for _frag in ("pe", "count"):
    REGISTRY[("vee", "modal", _frag, None)] = _theorem(
        f"a fresh root copying both roots' transitions preserves {_REL[_frag]}"
    )
for _frag in ("pe", "exist", "count", "full"):
    REGISTRY[("reduct", "ef", _frag, None)] = _theorem(f"forgetting relations preserves {_REL[_frag]}")
REGISTRY[("pointed-coproduct", "modal", "pe", None)] = Registered(
    COUNTEREXAMPLE,
    "gluing two pointed structures at their points does not preserve positive modal preservation; "
    "the glued point can combine properties that no single component has",
)
for _frag in ("pe", "exist", "count", "full"):
    REGISTRY[("disjoint-union", "ef", _frag, "equality")] = _theorem(
        f"adding equality as a relation commutes with disjoint union, so {_REL[_frag]} with equality is preserved"
    )
    REGISTRY[("disjoint-union", "ef", _frag, "connectivity")] = _theorem(
        f"the connectivity relation of a disjoint union is the union of connectivity relations, "
        f"so {_REL[_frag]} with connectivity is preserved"
    )
for _frag in ("pe", "count", "full"):
    REGISTRY[("product", "modal", _frag, "global")] = _theorem(
        f"the global relation of a product is the product of global relations, so {_REL[_frag]} "
        f"with a global modality is preserved"
    )
REGISTRY[("merge", "modal", "pe", "weak")] = _theorem(
    "weak transitions of a silent-step merge are the transitions of the root-copying combination "
    "of the weak translations, so weak simulation is preserved"
)


def registered(operation: str, kind: str, fragment: str, translation: str | None = None) -> Registered:
    key = (operation, kind, fragment, translation)
    if key not in REGISTRY:
        raise HarnessError(f"no registered case for {key}")
    return REGISTRY[key]


# ---------------------------------------------------------------------------
# cases


@dataclass(frozen=True)
class FvmCase:
    operation: str
    kind: str
    fragment: str
    k_in: int
    k_out: int | None = None
    translation: str | None = None
    sizes: int | None = None
    signature: tuple[tuple[str, int], ...] | None = None
    samples: int = 200
    seed: int = 0
    relation: str | None = None  # merged relation, or the silent one for the weak translation
    budget: int | None = None  # attempts; defaults to 25 per requested premise hit
    wl: bool = False

    def __post_init__(self):
        if self.operation not in OPERATIONS:
            raise HarnessError(f"unknown operation {self.operation!r}; known: {list(OPERATIONS)}")
        if self.translation is not None and self.translation not in TRANSLATIONS:
            raise HarnessError(f"unknown translation {self.translation!r}")
        reg = registered(self.operation, self.kind, self.fragment, self.translation)
        if self.k_out is None:
            object.__setattr__(self, "k_out", self.k_in + reg.bump)
        elif self.k_out != self.k_in + reg.bump:
            raise HarnessError(f"this case needs k_out = k_in + {reg.bump}")
        if self.signature is None:
            object.__setattr__(self, "signature", default_signature(self.operation, self.kind, self.translation))
        else:
            object.__setattr__(self, "signature", tuple((n, int(a)) for n, a in self.signature))
        if self.sizes is None:
            object.__setattr__(self, "sizes", default_sizes(self.operation, self.translation))
        if self.relation is None:
            object.__setattr__(self, "relation", "S" if self.translation == "weak" else "E")
        if self.k_in < 1 or self.sizes < 1 or self.samples < 0:
            raise HarnessError("k, sizes and samples must be positive")

    @property
    def registered(self) -> Registered:
        return registered(self.operation, self.kind, self.fragment, self.translation)

    @property
    def arity(self) -> int:
        return 1 if self.operation == "reduct" else 2

    @property
    def pointed(self) -> bool:
        return self.kind == "modal"

    def describe(self) -> dict:
        d = asdict(self)
        d["status"] = self.registered.status
        d["statement"] = self.registered.statement
        return d


def default_sizes(operation: str, translation: str | None) -> int:
    """Products square the universe and two binary relations blow up enumeration, so both stop at 2."""
    return 2 if operation == "product" or translation == "weak" else 3


def default_signature(operation: str, kind: str, translation: str | None) -> tuple:
    if translation == "weak":
        return WEAK_SIG
    if operation == "reduct":
        return REDUCT_SIG
    return MODAL_SIG if kind == "modal" else EF_SIG


def _reduct_target(sig: Signature) -> Signature:
    """Drop the last relation."""
    if len(sig.relations) < 2:
        raise HarnessError("reduct cases need at least two relations")
    return Signature(sig.relations[:-1])


def apply_operation(case: FvmCase, operands: Sequence[Structure]) -> Structure:
    op = case.operation
    if op == "disjoint-union":
        return st.disjoint_union(*operands)
    if op == "pointed-coproduct":
        return st.pointed_coproduct(*operands)
    if op == "product":
        return st.product(list(operands))
    if op == "merge":
        return st.merge_R(operands[0], operands[1], case.relation)
    if op == "vee":
        return st.vee(*operands)
    if op == "reduct":
        return st.reduct(operands[0], _reduct_target(operands[0].signature))
    raise HarnessError(op)


def translate(case: FvmCase, A: Structure) -> Structure:
    t = case.translation
    if t is None:
        return A
    if t == "equality":
        return st.translate_equality(A)
    if t == "connectivity":
        return st.translate_connectivity(A)
    if t == "global":
        return st.translate_global(A)
    if t == "weak":
        return st.translate_weak(A, case.relation, silent="drop")
    raise HarnessError(t)


def translated_operation(case: FvmCase, operands: Sequence[Structure]) -> Structure:
    """The operation acting on translated operands; the weak translation swaps merge for vee."""
    if case.translation == "weak":
        return st.vee(*operands)
    return apply_operation(case, operands)


def relation_holds(case: FvmCase, A: Structure, B: Structure, k: int) -> bool:
    if case.fragment == "count" and case.kind == "pebble" and (case.wl or A.size > BIJECTIVE_PEBBLE_LIMIT):
        return count_equiv("pebble", A, B, k, wl=True).result
    return decide(case.fragment, case.kind, A, B, k).result


def premise(case: FvmCase, As: Sequence[Structure], Bs: Sequence[Structure]) -> bool:
    return all(relation_holds(case, translate(case, a), translate(case, b), case.k_in) for a, b in zip(As, Bs))


def conclusion(case: FvmCase, As: Sequence[Structure], Bs: Sequence[Structure]) -> bool:
    if case.translation is None:
        HA, HB = apply_operation(case, As), apply_operation(case, Bs)
    else:
        HA = translated_operation(case, [translate(case, a) for a in As])
        HB = translated_operation(case, [translate(case, b) for b in Bs])
    return relation_holds(case, HA, HB, case.k_out)


def square_holds(case: FvmCase, As: Sequence[Structure]) -> bool:
    """The translation commutes with the operation up to isomorphism."""
    lhs = translated_operation(case, [translate(case, a) for a in As])
    rhs = translate(case, apply_operation(case, As))
    return lhs == rhs or st.find_isomorphism(lhs, rhs) is not None


# ---------------------------------------------------------------------------
# operand generation


@functools.lru_cache(maxsize=64)
def operand_pool(signature: tuple, sizes: int, pointed: bool) -> tuple[Structure, ...]:
    """Isomorphism-class representatives of sizes ``1..sizes``."""
    return tuple(st.enumerate_structures(dict(signature), sizes, up_to_iso=True, pointed=pointed, override=True))


def relabel(A: Structure, perm: Sequence[int]) -> Structure:
    rels = tuple(frozenset(tuple(perm[x] for x in t) for t in table) for table in A.rels)
    return Structure(A.signature, A.size, rels, None if A.point is None else perm[A.point])


def toggle(A: Structure, rng: random.Random) -> Structure:
    """Add or remove one tuple."""
    slots = st.tuple_space(A.signature, A.size)
    r, t = rng.choice(slots)
    rels = list(A.rels)
    rels[r] = rels[r] ^ {t}
    return Structure(A.signature, A.size, tuple(rels), A.point)


def add_twin(A: Structure, x: int) -> Structure:
    """New element behaving exactly like ``x`` in every position of every tuple."""
    n = A.size
    rels = []
    for table in A.rels:
        out = set(table)
        for t in table:
            pos = [i for i, y in enumerate(t) if y == x]
            for r in range(1, len(pos) + 1):
                for chosen in itertools.combinations(pos, r):
                    out.add(tuple(n if i in chosen else y for i, y in enumerate(t)))
        rels.append(frozenset(out))
    return Structure(A.signature, n + 1, tuple(rels), A.point)


def perturb(A: Structure, pool: Sequence[Structure], max_size: int, rng: random.Random) -> Structure:
    """A relabelled copy, usually nudged; sometimes an unrelated pool member."""
    mode = rng.random()
    if mode < 0.25:
        return rng.choice(pool)
    B = A
    if mode < 0.55:
        B = toggle(B, rng)
    elif mode < 0.8 and B.size < max_size:
        B = add_twin(B, rng.randrange(B.size))
    perm = list(range(B.size))
    rng.shuffle(perm)
    return relabel(B, perm)


def _sample_rng(seed: int, index: int) -> random.Random:
    return random.Random(f"{seed}/{index}")


def sample_operands(case: FvmCase, index: int) -> tuple[list[Structure], list[Structure]]:
    """Deterministic in ``(case.seed, index)`` alone."""
    rng = _sample_rng(case.seed, index)
    pool = operand_pool(case.signature, case.sizes, case.pointed)
    As = [rng.choice(pool) for _ in range(case.arity)]
    Bs = [perturb(a, pool, case.sizes, rng) for a in As]
    return As, Bs


# ---------------------------------------------------------------------------
# reports


@dataclass
class Report:
    case: FvmCase
    samples: int = 0
    premise_hits: int = 0
    violations: list[dict] = field(default_factory=list)
    square_failures: list[dict] = field(default_factory=list)
    searched: bool = False
    elapsed_ms: float | None = None
    # per attempt: 0 premise failed, 1 premise held, 2 premise held and conclusion failed
    trace: list[int] = field(default_factory=list, repr=False)

    @property
    def status(self) -> str:
        expected = self.case.registered.status
        if expected == COUNTEREXAMPLE:
            return "pass" if self.violations else ("inconclusive" if not self.premise_hits else "fail")
        if self.violations or self.square_failures:
            return "fail"
        return "pass" if self.premise_hits else "inconclusive"

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def as_dict(self, timing: bool = True) -> dict:
        return {
            "case": self.case.describe(),
            "samples": self.samples,
            "premise_hits": self.premise_hits,
            "violations": self.violations,
            "square_failures": self.square_failures,
            "searched": self.searched,
            "status": self.status,
            "seed": self.case.seed,
            "elapsed_ms": round(self.elapsed_ms, 3) if timing and self.elapsed_ms is not None else None,
        }

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.as_dict(timing), indent=2, sort_keys=True)


def witness_obj(As: Sequence[Structure], Bs: Sequence[Structure]) -> dict:
    out = {}
    for i, (a, b) in enumerate(zip(As, Bs), start=1):
        out[f"A{i}"] = st.structure_to_obj(a)
        out[f"B{i}"] = st.structure_to_obj(b)
    return out


def witness_operands(w: dict) -> tuple[list[Structure], list[Structure]]:
    n = sum(1 for key in w if key.startswith("A"))
    As = [st.structure_from_obj(w[f"A{i}"]) for i in range(1, n + 1)]
    Bs = [st.structure_from_obj(w[f"B{i}"]) for i in range(1, n + 1)]
    return As, Bs


def replay(case: FvmCase, w: dict) -> bool:
    """True when the recorded operands still satisfy the premise and break the conclusion."""
    As, Bs = witness_operands(w)
    return premise(case, As, Bs) and not conclusion(case, As, Bs)


# ---------------------------------------------------------------------------
# runs


def run_fvm(case: FvmCase, *, search_fallback: bool = True, max_violations: int = 10) -> Report:
    """Sample until ``case.samples`` premise hits or the attempt budget is spent.

    For a registered counterexample the exhaustive search runs when sampling
    came back clean, so the outcome does not hinge on luck.
    """
    start = time.perf_counter()
    report = Report(case)
    budget = case.budget if case.budget is not None else 25 * max(case.samples, 1)
    index = 0
    while report.premise_hits < case.samples and index < budget:
        As, Bs = sample_operands(case, index)
        index += 1
        if not premise(case, As, Bs):
            report.trace.append(0)
            continue
        report.premise_hits += 1
        if case.translation is not None and not square_holds(case, As):
            report.square_failures.append({"sample": index - 1, **witness_obj(As, As)})
        if conclusion(case, As, Bs):
            report.trace.append(1)
            continue
        report.trace.append(2)
        if len(report.violations) < max_violations:
            report.violations.append({"sample": index - 1, **witness_obj(As, Bs)})
    report.samples = index
    if search_fallback and case.registered.status == COUNTEREXAMPLE and not report.violations:
        w = search_counterexample(case)
        report.searched = True
        if w is not None:
            report.violations.append({"sample": None, **w})
    report.elapsed_ms = (time.perf_counter() - start) * 1000
    return report


def run_translated_fvm(case: FvmCase, **kw) -> Report:
    if case.translation is None:
        raise HarnessError("case has no translation")
    return run_fvm(case, **kw)


def search_counterexample(case: FvmCase, max_checks: int | None = None) -> dict | None:
    """First premise-true, conclusion-false operand tuple in a fixed order.

    Operands range over isomorphism-class representatives of size at most
    ``case.sizes``. Tuples are visited by increasing largest operand, so the
    first witness found is also among the smallest, and larger operands are
    never examined once one turns up.
    """
    pool = operand_pool(case.signature, case.sizes, case.pointed)
    translated = [translate(case, a) for a in pool]
    pairs: list[tuple[Structure, Structure]] = []
    checks = 0
    for m in range(1, case.sizes + 1):
        new = []
        for i, a in enumerate(pool):
            for j, b in enumerate(pool):
                if max(a.size, b.size) == m and relation_holds(case, translated[i], translated[j], case.k_in):
                    new.append((a, b))
        pairs.extend(new)
        for combo in itertools.product(pairs, repeat=case.arity):
            if max(max(a.size, b.size) for a, b in combo) != m:
                continue
            As = [a for a, _ in combo]
            Bs = [b for _, b in combo]
            checks += 1
            if max_checks is not None and checks > max_checks:
                return None
            if not conclusion(case, As, Bs):
                return witness_obj(As, Bs)
    return None


def sweep(cases: Sequence[FvmCase], run: Callable[[FvmCase], Report] = run_fvm) -> list[Report]:
    return [run(c) for c in cases]


def case_from_args(**kw: Any) -> FvmCase:
    return FvmCase(**{key: v for key, v in kw.items() if v is not None})

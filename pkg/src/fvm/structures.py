"""Finite relational signatures, structures, maps and the operations on them.

Universes are always ``range(n)``. Every operation that builds a new
universe documents its index encoding so results are reproducible.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

Tuple = tuple[int, ...]

RESERVED_EQUALITY = "I"
RESERVED_CONNECTIVITY = "Con"
RESERVED_GLOBAL = "G"


class StructureError(ValueError):
    """Raised for invalid structures or incompatible operands."""


class StructureParseError(StructureError):
    """Raised by :func:`parse_structure`; ``where`` locates the problem."""

    def __init__(self, message: str, where: str):
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass(frozen=True)
class Signature:
    relations: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [name for name, _ in self.relations]
        if len(set(names)) != len(names):
            raise StructureError(f"duplicate relation names in {names}")
        for name, arity in self.relations:
            if not isinstance(arity, int) or arity < 1:
                raise StructureError(f"relation {name!r} has invalid arity {arity!r}")

    @classmethod
    def of(cls, spec: Mapping[str, int] | Iterable[tuple[str, int]]) -> "Signature":
        items = spec.items() if isinstance(spec, Mapping) else spec
        return cls(tuple((str(n), int(a)) for n, a in items))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.relations)

    @property
    def is_modal(self) -> bool:
        return all(a in (1, 2) for _, a in self.relations)

    def arity(self, name: str) -> int:
        for n, a in self.relations:
            if n == name:
                return a
        raise StructureError(f"relation {name!r} not in signature")

    def __contains__(self, name: object) -> bool:
        return any(n == name for n, _ in self.relations)

    def binary(self) -> tuple[str, ...]:
        return tuple(n for n, a in self.relations if a == 2)

    def extend(self, name: str, arity: int) -> "Signature":
        if name in self:
            raise StructureError(f"name clash: {name!r} already in signature")
        return Signature(self.relations + ((name, arity),))

    def as_dict(self) -> dict[str, int]:
        return dict(self.relations)


@dataclass(frozen=True)
class Structure:
    """A finite sigma-structure on ``range(size)``.

    ``rels`` is aligned with ``signature.relations``.
    """

    signature: Signature
    size: int
    rels: tuple[frozenset, ...]
    point: int | None = None

    def __post_init__(self):
        if self.size < 0:
            raise StructureError("negative universe size")
        if len(self.rels) != len(self.signature.relations):
            raise StructureError("relation tables do not match the signature")
        for (name, arity), table in zip(self.signature.relations, self.rels):
            for t in table:
                if len(t) != arity:
                    raise StructureError(f"tuple {t} of {name!r} has arity {len(t)}, expected {arity}")
                if any(not (0 <= x < self.size) for x in t):
                    raise StructureError(f"tuple {t} of {name!r} leaves the universe 0..{self.size - 1}")
        if self.point is not None and not (0 <= self.point < self.size):
            raise StructureError(f"point {self.point} outside universe of size {self.size}")

    @classmethod
    def build(
        cls,
        signature: Signature | Mapping[str, int],
        size: int,
        relations: Mapping[str, Iterable[Sequence[int]]] | None = None,
        point: int | None = None,
    ) -> "Structure":
        if not isinstance(signature, Signature):
            signature = Signature.of(signature)
        relations = relations or {}
        unknown = set(relations) - set(signature.names)
        if unknown:
            raise StructureError(f"relations {sorted(unknown)} not in signature")
        rels = tuple(frozenset(tuple(t) for t in relations.get(name, ())) for name in signature.names)
        return cls(signature, size, rels, point)

    @property
    def pointed(self) -> bool:
        return self.point is not None

    def rel(self, name: str) -> frozenset:
        return self.rels[self.signature.names.index(name)]

    def relation_items(self) -> Iterator[tuple[str, int, frozenset]]:
        for (name, arity), table in zip(self.signature.relations, self.rels):
            yield name, arity, table

    def holds(self, name: str, t: Sequence[int]) -> bool:
        return tuple(t) in self.rel(name)

    def as_dict(self) -> dict[str, list[list[int]]]:
        return {name: sorted(list(t) for t in table) for name, _, table in self.relation_items()}

    def with_point(self, point: int | None) -> "Structure":
        return Structure(self.signature, self.size, self.rels, point)

    def __repr__(self) -> str:
        body = ", ".join(f"{n}={sorted(t)}" for n, _, t in self.relation_items())
        pt = f", point={self.point}" if self.pointed else ""
        return f"Structure(n={self.size}, {body}{pt})"


@dataclass(frozen=True)
class StructureMap:
    source: Structure
    target: Structure
    table: tuple[int, ...]

    def __post_init__(self):
        if len(self.table) != self.source.size:
            raise StructureError("map table length differs from source size")
        if any(not (0 <= v < self.target.size) for v in self.table):
            raise StructureError("map value outside the target universe")

    def __call__(self, x: int) -> int:
        return self.table[x]

    def then(self, other: "StructureMap") -> "StructureMap":
        """Composite ``other ∘ self``."""
        return StructureMap(self.source, other.target, tuple(other.table[v] for v in self.table))

    @property
    def is_homomorphism(self) -> bool:
        return is_homomorphism(self)

    @property
    def is_embedding(self) -> bool:
        return is_embedding(self)


def identity_map(A: Structure) -> StructureMap:
    return StructureMap(A, A, tuple(range(A.size)))


def _check_signatures(A: Structure, B: Structure) -> None:
    if A.signature != B.signature:
        raise StructureError("incompatible signatures")


def is_homomorphism(f: StructureMap) -> bool:
    A, B = f.source, f.target
    _check_signatures(A, B)
    if A.pointed and B.pointed and f.table[A.point] != B.point:
        return False
    t = f.table
    for table_a, table_b in zip(A.rels, B.rels):
        for tup in table_a:
            if tuple(t[x] for x in tup) not in table_b:
                return False
    return True


def is_embedding(f: StructureMap) -> bool:
    if not is_homomorphism(f):
        return False
    if len(set(f.table)) != len(f.table):
        return False
    inverse = {v: i for i, v in enumerate(f.table)}
    for table_a, table_b in zip(f.source.rels, f.target.rels):
        for tup in table_b:
            if all(x in inverse for x in tup) and tuple(inverse[x] for x in tup) not in table_a:
                return False
    return True


def induced_substructure(A: Structure, elements: Sequence[int]) -> tuple[Structure, StructureMap]:
    """Substructure on ``elements`` (renumbered in the given order) and its inclusion."""
    pos = {x: i for i, x in enumerate(elements)}
    rels = {}
    for name, _, table in A.relation_items():
        rels[name] = [tuple(pos[x] for x in t) for t in table if all(x in pos for x in t)]
    point = pos.get(A.point) if A.pointed else None
    sub = Structure.build(A.signature, len(elements), rels, point)
    return sub, StructureMap(sub, A, tuple(elements))


# ---------------------------------------------------------------------------
# isomorphism and canonical forms


def _relabel(A: Structure, perm: Sequence[int]) -> tuple:
    """Image of A under ``x -> perm[x]`` as a sortable key."""
    key = []
    for table in A.rels:
        key.append(tuple(sorted(tuple(perm[x] for x in t) for t in table)))
    point = perm[A.point] if A.pointed else -1
    return (A.size, point, tuple(key))


def canonical_form(A: Structure) -> tuple:
    """Lexicographically least relabelling; brute force over all permutations."""
    if A.size > 7:
        raise StructureError("canonical_form is brute force; size > 7 refused")
    return min(_relabel(A, p) for p in itertools.permutations(range(A.size)))


def find_isomorphism(A: Structure, B: Structure) -> StructureMap | None:
    """Backtracking search for an isomorphism A -> B."""
    if A.signature != B.signature or A.size != B.size or A.pointed != B.pointed:
        return None
    if any(len(ta) != len(tb) for ta, tb in zip(A.rels, B.rels)):
        return None
    n = A.size
    assign: dict[int, int] = {}
    used: set[int] = set()
    if A.pointed:
        assign[A.point] = B.point
        used.add(B.point)
    order = [x for x in range(n) if x not in assign]

    def consistent() -> bool:
        for ta, tb in zip(A.rels, B.rels):
            for t in ta:
                if all(x in assign for x in t) and tuple(assign[x] for x in t) not in tb:
                    return False
        inv = {v: k for k, v in assign.items()}
        for ta, tb in zip(A.rels, B.rels):
            for t in tb:
                if all(y in inv for y in t) and tuple(inv[y] for y in t) not in ta:
                    return False
        return True

    if not consistent():
        return None

    def search(i: int) -> bool:
        if i == len(order):
            return True
        x = order[i]
        for y in range(n):
            if y in used:
                continue
            assign[x] = y
            used.add(y)
            if consistent() and search(i + 1):
                return True
            del assign[x]
            used.discard(y)
        return False

    if not search(0):
        return None
    return StructureMap(A, B, tuple(assign[x] for x in range(n)))


def is_isomorphic(A: Structure, B: Structure) -> bool:
    return find_isomorphism(A, B) is not None


# ---------------------------------------------------------------------------
# composition operations


def disjoint_union(A: Structure, B: Structure) -> Structure:
    """A's elements keep their indices; B's are shifted by ``|A|``."""
    _check_signatures(A, B)
    if A.pointed or B.pointed:
        raise StructureError("pointed operands: use pointed_coproduct")
    off = A.size
    rels = tuple(
        frozenset(ta) | frozenset(tuple(x + off for x in t) for t in tb) for ta, tb in zip(A.rels, B.rels)
    )
    return Structure(A.signature, A.size + B.size, rels)


def pointed_coproduct_maps(A: Structure, B: Structure) -> tuple[list[int], list[int]]:
    """Index of each element of A and of B inside the pointed coproduct.

    The merged point is 0, then A's other elements in order, then B's.
    """
    _check_signatures(A, B)
    if not (A.pointed and B.pointed):
        raise StructureError("pointed_coproduct needs two pointed structures")
    ia, nxt = [], 1
    for x in range(A.size):
        if x == A.point:
            ia.append(0)
        else:
            ia.append(nxt)
            nxt += 1
    ib = []
    for x in range(B.size):
        if x == B.point:
            ib.append(0)
        else:
            ib.append(nxt)
            nxt += 1
    return ia, ib


def pointed_coproduct(A: Structure, B: Structure) -> Structure:
    """Disjoint union with the two points identified (merged point is 0).

    Relations are the images of the summand relations, so unary predicates
    of the two points are combined by union.
    """
    ia, ib = pointed_coproduct_maps(A, B)
    rels = tuple(
        frozenset(tuple(ia[x] for x in t) for t in ta) | frozenset(tuple(ib[x] for x in t) for t in tb)
        for ta, tb in zip(A.rels, B.rels)
    )
    return Structure(A.signature, A.size + B.size - 1, rels, 0)


def product_index(sizes: Sequence[int], coords: Sequence[int]) -> int:
    """Row-major index of a coordinate tuple."""
    idx = 0
    for n, c in zip(sizes, coords):
        idx = idx * n + c
    return idx


def product_coords(sizes: Sequence[int], idx: int) -> tuple[int, ...]:
    out = []
    for n in reversed(sizes):
        idx, c = divmod(idx, n)
        out.append(c)
    return tuple(reversed(out))


def product(family: Sequence[Structure]) -> Structure:
    """Cartesian product with row-major encoding of coordinate tuples."""
    if not family:
        raise StructureError("empty product (terminal object) is not supported")
    sig = family[0].signature
    for A in family[1:]:
        _check_signatures(family[0], A)
    pointed = {A.pointed for A in family}
    if len(pointed) > 1:
        raise StructureError("mixed pointedness in product")
    sizes = [A.size for A in family]
    rels = []
    for r, (_, arity) in enumerate(sig.relations):
        table = set()
        for combo in itertools.product(*(sorted(A.rels[r]) for A in family)):
            table.add(tuple(product_index(sizes, [c[j] for c in combo]) for j in range(arity)))
        rels.append(frozenset(table))
    total = 1
    for n in sizes:
        total *= n
    point = product_index(sizes, [A.point for A in family]) if family[0].pointed else None
    return Structure(sig, total, tuple(rels), point)


def projection(family: Sequence[Structure], i: int) -> StructureMap:
    P = product(family)
    sizes = [A.size for A in family]
    return StructureMap(P, family[i], tuple(product_coords(sizes, x)[i] for x in range(P.size)))


def _require_modal_pointed(*structs: Structure) -> None:
    for A in structs:
        if not A.signature.is_modal:
            raise StructureError("operation needs a modal signature (arities 1 and 2 only)")
        if not A.pointed:
            raise StructureError("operation needs pointed structures")


def merge_R(A: Structure, B: Structure, R: str) -> Structure:
    """New point 0 with R-edges to both old points; A then B after it."""
    _check_signatures(A, B)
    _require_modal_pointed(A, B)
    if A.signature.arity(R) != 2:
        raise StructureError(f"merge_R needs a binary relation, {R!r} is unary")
    oa, ob = 1, 1 + A.size
    rels = []
    for name, ta, tb in zip(A.signature.names, A.rels, B.rels):
        table = {tuple(x + oa for x in t) for t in ta} | {tuple(x + ob for x in t) for t in tb}
        if name == R:
            table |= {(0, A.point + oa), (0, B.point + ob)}
        rels.append(frozenset(table))
    return Structure(A.signature, 1 + A.size + B.size, tuple(rels), 0)


def vee(A: Structure, B: Structure) -> Structure:
    """New point 0 copying every binary transition out of both old points."""
    _check_signatures(A, B)
    _require_modal_pointed(A, B)
    oa, ob = 1, 1 + A.size
    rels = []
    for (name, arity), ta, tb in zip(A.signature.relations, A.rels, B.rels):
        table = {tuple(x + oa for x in t) for t in ta} | {tuple(x + ob for x in t) for t in tb}
        if arity == 2:
            table |= {(0, y + oa) for x, y in ta if x == A.point}
            table |= {(0, y + ob) for x, y in tb if x == B.point}
        rels.append(frozenset(table))
    return Structure(A.signature, 1 + A.size + B.size, tuple(rels), 0)


def reduct(A: Structure, tau: Signature | Mapping[str, int]) -> Structure:
    if not isinstance(tau, Signature):
        tau = Signature.of(tau)
    for name, arity in tau.relations:
        if name not in A.signature or A.signature.arity(name) != arity:
            raise StructureError(f"{name}/{arity} is not part of the structure's signature")
    return Structure(tau, A.size, tuple(A.rel(name) for name in tau.names), A.point)


# ---------------------------------------------------------------------------
# translations


def _extended(A: Structure, name: str, arity: int, table: Iterable[Tuple]) -> Structure:
    sig = A.signature.extend(name, arity)
    return Structure(sig, A.size, A.rels + (frozenset(table),), A.point)


def translate_equality(A: Structure) -> Structure:
    """Add a binary relation ``I`` interpreted as equality."""
    return _extended(A, RESERVED_EQUALITY, 2, ((x, x) for x in range(A.size)))


def gaifman_components(A: Structure) -> list[int]:
    """Component label (smallest member) for each element."""
    parent = list(range(A.size))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for table in A.rels:
        for t in table:
            for x in t[1:]:
                a, b = find(t[0]), find(x)
                if a != b:
                    parent[max(a, b)] = min(a, b)
    return [find(x) for x in range(A.size)]


def translate_connectivity(A: Structure) -> Structure:
    """Add equality ``I`` and ``Con`` relating elements of one Gaifman component."""
    comp = gaifman_components(A)
    con = [(x, y) for x in range(A.size) for y in range(A.size) if comp[x] == comp[y]]
    return _extended(translate_equality(A), RESERVED_CONNECTIVITY, 2, con)


def translate_global(A: Structure) -> Structure:
    """Add ``G`` interpreted as the full square (global modality)."""
    _require_modal_pointed(A)
    return _extended(A, RESERVED_GLOBAL, 2, itertools.product(range(A.size), repeat=2))


def reflexive_transitive_closure(n: int, edges: Iterable[tuple[int, int]]) -> list[set[int]]:
    succ = [set() for _ in range(n)]
    for x, y in edges:
        succ[x].add(y)
    reach = []
    for x in range(n):
        seen, stack = {x}, [x]
        while stack:
            u = stack.pop()
            for v in succ[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        reach.append(seen)
    return reach


SILENT_MODES = ("close", "raw", "drop")


def translate_weak(A: Structure, S: str, silent: str = "close") -> Structure:
    """Replace each binary R by S* ; R ; S*, with S* the reflexive-transitive closure of S.

    ``silent`` chooses what happens to S itself: ``close`` treats it like any
    other binary relation, ``raw`` keeps it untouched, ``drop`` removes it
    from the signature so only the weak observable transitions remain.
    """
    _require_modal_pointed(A)
    if silent not in SILENT_MODES:
        raise StructureError(f"silent must be one of {SILENT_MODES}")
    if S not in A.signature or A.signature.arity(S) != 2:
        raise StructureError(f"silent relation {S!r} must be a binary relation of the signature")
    star = reflexive_transitive_closure(A.size, A.rel(S))
    relations = []
    rels = []
    for (name, arity), table in zip(A.signature.relations, A.rels):
        if arity == 1 or (name == S and silent == "raw"):
            relations.append((name, arity))
            rels.append(table)
            continue
        if name == S and silent == "drop":
            continue
        closed = set()
        for x, y in table:
            for x0 in range(A.size):
                if x in star[x0]:
                    for y1 in star[y]:
                        closed.add((x0, y1))
        relations.append((name, arity))
        rels.append(frozenset(closed))
    return Structure(Signature(tuple(relations)), A.size, tuple(rels), A.point)


# ---------------------------------------------------------------------------
# enumeration

DEFAULT_ENUM_GUARD = 4


def tuple_space(sig: Signature, n: int) -> list[tuple[int, Tuple]]:
    """All (relation position, tuple) slots for universe size n, in a fixed order."""
    slots = []
    for r, (_, arity) in enumerate(sig.relations):
        for t in itertools.product(range(n), repeat=arity):
            slots.append((r, t))
    return slots


def enumerate_structures(
    sig: Signature | Mapping[str, int],
    max_size: int,
    *,
    min_size: int = 1,
    up_to_iso: bool = False,
    pointed: bool = False,
    guard: int = DEFAULT_ENUM_GUARD,
    override: bool = False,
) -> Iterator[Structure]:
    """All structures of sizes ``min_size..max_size`` in a deterministic order.

    With ``pointed`` every choice of point is produced. With ``up_to_iso``
    only the first member of each isomorphism class is yielded.
    """
    if not isinstance(sig, Signature):
        sig = Signature.of(sig)
    if max_size > guard and not override:
        raise StructureError(f"enumeration size {max_size} exceeds guard {guard}; pass override=True")
    for n in range(max(min_size, 1 if pointed else min_size), max_size + 1):
        slots = tuple_space(sig, n)
        seen: set = set()
        for mask in range(1 << len(slots)):
            tables: list[set] = [set() for _ in sig.relations]
            for i, (r, t) in enumerate(slots):
                if mask >> i & 1:
                    tables[r].add(t)
            base = Structure(sig, n, tuple(frozenset(t) for t in tables))
            points = range(n) if pointed else (None,)
            for p in points:
                A = base.with_point(p) if pointed else base
                if up_to_iso:
                    key = canonical_form(A)
                    if key in seen:
                        continue
                    seen.add(key)
                yield A


# ---------------------------------------------------------------------------
# serialization


def structure_to_obj(A: Structure) -> dict:
    obj = {
        "signature": A.signature.as_dict(),
        "universe": A.size,
        "relations": A.as_dict(),
    }
    if A.pointed:
        obj["point"] = A.point
    return obj


def serialize_structure(A: Structure) -> bytes:
    return json.dumps(structure_to_obj(A), sort_keys=False, separators=(", ", ": ")).encode()


def structure_from_obj(obj: object, where: str = "$") -> Structure:
    if not isinstance(obj, dict):
        raise StructureParseError("expected a JSON object", where)
    for key in ("signature", "universe"):
        if key not in obj:
            raise StructureParseError(f"missing key {key!r}", where)
    sig_obj = obj["signature"]
    if not isinstance(sig_obj, dict):
        raise StructureParseError("signature must be an object", f"{where}.signature")
    for name, arity in sig_obj.items():
        if not isinstance(arity, int) or isinstance(arity, bool) or arity < 1:
            raise StructureParseError(f"arity must be a positive integer, got {arity!r}", f"{where}.signature.{name}")
    sig = Signature.of(sig_obj)
    n = obj["universe"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise StructureParseError("universe must be a natural number", f"{where}.universe")
    rel_obj = obj.get("relations", {})
    if not isinstance(rel_obj, dict):
        raise StructureParseError("relations must be an object", f"{where}.relations")
    rels = {}
    for name, tuples in rel_obj.items():
        loc = f"{where}.relations.{name}"
        if name not in sig:
            raise StructureParseError("relation not declared in signature", loc)
        if not isinstance(tuples, list):
            raise StructureParseError("expected a list of tuples", loc)
        arity = sig.arity(name)
        parsed = []
        for i, t in enumerate(tuples):
            tloc = f"{loc}[{i}]"
            if not isinstance(t, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in t):
                raise StructureParseError("tuple must be a list of integers", tloc)
            if len(t) != arity:
                raise StructureParseError(f"arity mismatch: expected {arity}, got {len(t)}", tloc)
            for j, x in enumerate(t):
                if not (0 <= x < n):
                    raise StructureParseError(f"element {x} out of range 0..{n - 1}", f"{tloc}[{j}]")
            parsed.append(tuple(t))
        rels[name] = parsed
    point = obj.get("point")
    if point is not None and (not isinstance(point, int) or not (0 <= point < n)):
        raise StructureParseError(f"point {point!r} out of range", f"{where}.point")
    return Structure.build(sig, n, rels, point)


def parse_structure(data: bytes | str) -> Structure:
    if isinstance(data, bytes):
        data = data.decode()
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise StructureParseError(f"malformed JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from exc
    return structure_from_obj(obj)


def load_structure(path: str) -> Structure:
    with open(path, "rb") as fh:
        return parse_structure(fh.read())

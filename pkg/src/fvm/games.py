"""Model-comparison games for logic without equality.

A position is a set of pairs ``(a, b)``. It is *safe* for the forth-only
positive game when every relation tuple over the a-side is also present on
the b-side (preservation), and safe for the other games when presence agrees
in both directions. Positions never impose functionality or injectivity.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .comonads import ComonadInstance, build
from .search import find_homomorphism
from .structures import Structure, StructureError, StructureMap

FRAGMENTS = ("pe", "exist", "count", "full")
KINDS = ("ef", "pebble", "modal")
BIJECTIVE_PEBBLE_LIMIT = 6


@dataclass
class Verdict:
    fragment: str
    kind: str
    k: int
    result: bool
    witness: Any = None
    backend: str = ""

    def as_dict(self) -> dict:
        return {
            "fragment": self.fragment,
            "kind": self.kind,
            "k": self.k,
            "result": self.result,
            "backend": self.backend,
            "witness": self.witness,
        }

    def __bool__(self) -> bool:
        return self.result


def _same_signature(A: Structure, B: Structure) -> None:
    if A.signature != B.signature:
        raise StructureError("incompatible signatures")


class _Atoms:
    """Incremental atomic-type checks between two structures."""

    def __init__(self, A: Structure, B: Structure, two_way: bool):
        _same_signature(A, B)
        self.A, self.B = A, B
        self.two_way = two_way
        self.items = [(arity, ta, tb) for (_, arity), ta, tb in zip(A.signature.relations, A.rels, B.rels)]

    def _agree(self, ta_in: bool, tb_in: bool) -> bool:
        return ta_in == tb_in if self.two_way else (not ta_in or tb_in)

    def extend_ok(self, pairs: Sequence[tuple[int, int]], new: tuple[int, int]) -> bool:
        """Tuples using ``new`` at least once, over ``pairs + [new]``."""
        if new in pairs:
            return True
        allp = list(pairs) + [new]
        last = len(allp) - 1
        for arity, ta, tb in self.items:
            for combo in itertools.product(range(len(allp)), repeat=arity):
                if last not in combo:
                    continue
                a = tuple(allp[i][0] for i in combo)
                b = tuple(allp[i][1] for i in combo)
                if not self._agree(a in ta, b in tb):
                    return False
        return True

    def safe(self, pairs: Sequence[tuple[int, int]]) -> bool:
        for arity, ta, tb in self.items:
            for combo in itertools.product(range(len(pairs)), repeat=arity):
                a = tuple(pairs[i][0] for i in combo)
                b = tuple(pairs[i][1] for i in combo)
                if not self._agree(a in ta, b in tb):
                    return False
        return True


def _perfect_matching(allowed: Sequence[Iterable[int]], m: int) -> list[int] | None:
    """Kuhn's augmenting paths; ``allowed[a]`` lists admissible partners."""
    n = len(allowed)
    if n != m:
        return None
    match_b: list[int | None] = [None] * m
    adj = [sorted(s) for s in allowed]

    def augment(a: int, seen: set[int]) -> bool:
        for b in adj[a]:
            if b in seen:
                continue
            seen.add(b)
            if match_b[b] is None or augment(match_b[b], seen):
                match_b[b] = a
                return True
        return False

    for a in range(n):
        if not augment(a, set()):
            return None
    out = [0] * n
    for b, a in enumerate(match_b):
        out[a] = b  # type: ignore[index]
    return out


def _lex_first_matching(allowed: Sequence[set[int]], m: int) -> list[int] | None:
    """Lexicographically least perfect matching, or None."""
    chosen: list[int] = []
    used: set[int] = set()
    for a in range(len(allowed)):
        for b in sorted(allowed[a] - used):
            rest_b = sorted(set(range(m)) - used - {b})
            pos = {y: i for i, y in enumerate(rest_b)}
            rest = [{pos[y] for y in allowed[x] if y in pos} for x in range(a + 1, len(allowed))]
            if _perfect_matching(rest, len(rest_b)) is not None:
                chosen.append(b)
                used.add(b)
                break
        else:
            return None
    return chosen


# ---------------------------------------------------------------------------
# EF games


def _ef_game(A: Structure, B: Structure, k: int, mode: str):
    """Return the memoized ``win(position, remaining)`` for one game mode.

    ``mode`` is ``pe`` (forth, preservation), ``exist`` (forth, agreement),
    ``full`` (back and forth) or ``count`` (bijective).
    """
    atoms = _Atoms(A, B, two_way=mode != "pe")
    nA, nB = A.size, B.size

    @functools.lru_cache(maxsize=None)
    def win(S: frozenset, rem: int) -> bool:
        if rem == 0:
            return True
        pairs = sorted(S)

        def ok(a: int, b: int) -> bool:
            return atoms.extend_ok(pairs, (a, b)) and win(S | {(a, b)}, rem - 1)

        if mode == "count":
            allowed = [{b for b in range(nB) if ok(a, b)} for a in range(nA)]
            return _perfect_matching(allowed, nB) is not None
        for a in range(nA):
            if not any(ok(a, b) for b in range(nB)):
                return False
        if mode == "full":
            for b in range(nB):
                if not any(ok(a, b) for a in range(nA)):
                    return False
        return True

    return win, atoms


def _ef_strategy(A: Structure, B: Structure, k: int, win, atoms) -> StructureMap:
    """Read a forth strategy off the memo table as a map ``E_k(A) -> B``."""
    C = build("ef", A, k)
    table = []
    cache: dict[tuple, tuple] = {(): ()}

    def responses(word: tuple) -> tuple:
        if word in cache:
            return cache[word]
        prev = responses(word[:-1])
        pairs = sorted(set(zip(word[:-1], prev)))
        S = frozenset(pairs)
        a = word[-1]
        for b in range(B.size):
            if atoms.extend_ok(pairs, (a, b)) and win(S | {(a, b)}, k - len(word)):
                cache[word] = prev + (b,)
                return cache[word]
        raise AssertionError("strategy lookup left the winning region")

    for w in C.elems:
        table.append(responses(w)[-1])
    return StructureMap(C.carrier, B, tuple(table))


def _ef_bijection_tree(A: Structure, B: Structure, k: int, win, atoms) -> dict:
    """First winning bijection at each reachable a-sequence, keyed by the sequence."""
    tree: dict[str, list[int]] = {}

    def walk(seq: tuple, bs: tuple, rem: int) -> None:
        if rem == 0:
            return
        pairs = sorted(set(zip(seq, bs)))
        S = frozenset(pairs)
        allowed = [
            {b for b in range(B.size) if atoms.extend_ok(pairs, (a, b)) and win(S | {(a, b)}, rem - 1)}
            for a in range(A.size)
        ]
        pi = _lex_first_matching(allowed, B.size)
        assert pi is not None
        tree[",".join(map(str, seq))] = pi
        for a in range(A.size):
            walk(seq + (a,), bs + (pi[a],), rem - 1)

    walk((), (), k)
    return tree


def _check_k(k: int) -> None:
    if k < 1:
        raise StructureError("resource k must be a positive integer")


# ---------------------------------------------------------------------------
# pebble games (greatest fixpoints)


class _PebbleArena:
    """Safe positions with at most k pairs, encoded as bitmasks over pairs."""

    def __init__(self, A: Structure, B: Structure, k: int, two_way: bool):
        self.A, self.B, self.k = A, B, k
        self.nA, self.nB = A.size, B.size
        self.atoms = _Atoms(A, B, two_way)
        self.pairs = [(a, b) for a in range(self.nA) for b in range(self.nB)]
        self.states: set[int] = set()
        self._enumerate()

    def bit(self, a: int, b: int) -> int:
        return 1 << (a * self.nB + b)

    def decode(self, mask: int) -> list[tuple[int, int]]:
        out = []
        i = 0
        while mask:
            if mask & 1:
                out.append(self.pairs[i])
            mask >>= 1
            i += 1
        return out

    def _enumerate(self) -> None:
        level = [(0, -1, [])]
        self.states.add(0)
        for _ in range(self.k):
            nxt = []
            for mask, top, pairs in level:
                for i in range(top + 1, len(self.pairs)):
                    p = self.pairs[i]
                    if self.atoms.extend_ok(pairs, p):
                        m2 = mask | (1 << i)
                        self.states.add(m2)
                        nxt.append((m2, i, pairs + [p]))
            level = nxt

    def subpositions(self, mask: int) -> list[int]:
        """Positions Spoiler may leave before placing a pebble."""
        subs = []
        m, i = mask, 0
        count = 0
        while m:
            if m & 1:
                subs.append(mask & ~(1 << i))
                count += 1
            m >>= 1
            i += 1
        if count < self.k:
            subs.append(mask)
        return subs

    def solve(self, mode: str) -> set[int]:
        """Greatest fixpoint of Duplicator's winning positions."""
        W = set(self.states)
        small = [s for s in self.states if bin(s).count("1") <= self.k - 1]
        nA, nB = self.nA, self.nB
        while True:
            good = {}
            for T in small:
                if T not in W:
                    good[T] = False
                    continue
                nxt = [[(T | self.bit(a, b)) in W for b in range(nB)] for a in range(nA)]
                if mode == "count":
                    allowed = [{b for b in range(nB) if nxt[a][b]} for a in range(nA)]
                    good[T] = _perfect_matching(allowed, nB) is not None
                else:
                    g = all(any(row) for row in nxt)
                    if g and mode == "full":
                        g = all(any(nxt[a][b] for a in range(nA)) for b in range(nB))
                    good[T] = g
            newW = {S for S in W if all(good.get(T, False) for T in self.subpositions(S))}
            if newW == W:
                return W
            W = newW


def _pebble_start(A: Structure, B: Structure, arena: _PebbleArena) -> int | None:
    """Starting position: empty, or the pair of points for pointed inputs."""
    if A.pointed and B.pointed:
        if not arena.atoms.safe([(A.point, B.point)]):
            return None
        return arena.bit(A.point, B.point)
    return 0


def _pebble_decide(A: Structure, B: Structure, k: int, mode: str, witness: bool):
    _check_k(k)
    arena = _PebbleArena(A, B, k, two_way=mode != "pe")
    start = _pebble_start(A, B, arena)
    if start is None:
        return False, None
    W = arena.solve(mode)
    result = start in W
    wit = None
    if witness and result:
        wit = sorted([list(map(list, arena.decode(m))) for m in W])
    return result, wit


def verify_pebble_witness(A: Structure, B: Structure, k: int, mode: str, positions: list) -> bool:
    """Replay a winning-position set: safe, contains the start, closed under Duplicator replies."""
    arena = _PebbleArena(A, B, k, two_way=mode != "pe")
    W = set()
    for pos in positions:
        mask = 0
        for a, b in pos:
            mask |= arena.bit(a, b)
        if mask not in arena.states:
            return False
        W.add(mask)
    start = _pebble_start(A, B, arena)
    if start is None or start not in W:
        return False
    nA, nB = arena.nA, arena.nB
    for S in W:
        for T in arena.subpositions(S):
            nxt = [[(T | arena.bit(a, b)) in W for b in range(nB)] for a in range(nA)]
            if mode == "count":
                allowed = [{b for b in range(nB) if nxt[a][b]} for a in range(nA)]
                if _perfect_matching(allowed, nB) is None:
                    return False
            else:
                if not all(any(row) for row in nxt):
                    return False
                if mode == "full" and not all(any(nxt[a][b] for a in range(nA)) for b in range(nB)):
                    return False
    return True


# ---------------------------------------------------------------------------
# Weisfeiler-Leman


def _tuple_types(A: Structure, d: int) -> dict[tuple, tuple]:
    """Atomic type (without equality) of every d-tuple."""
    out = {}
    for u in itertools.product(range(A.size), repeat=d):
        bits = []
        for (_, arity), table in zip(A.signature.relations, A.rels):
            for combo in itertools.product(range(d), repeat=arity):
                bits.append(tuple(u[i] for i in combo) in table)
        out[u] = tuple(bits)
    return out


def _extension_types(A: Structure, d: int) -> dict[tuple, tuple]:
    """Atomic facts of ``(u, w)`` that mention the new entry ``w``."""
    out = {}
    for u in itertools.product(range(A.size), repeat=d):
        for w in range(A.size):
            v = u + (w,)
            bits = []
            for (_, arity), table in zip(A.signature.relations, A.rels):
                for combo in itertools.product(range(d + 1), repeat=arity):
                    if d in combo:
                        bits.append(tuple(v[i] for i in combo) in table)
            out[(u, w)] = tuple(bits)
    return out


def wl_colorings(A: Structure, B: Structure, k: int) -> tuple[dict, dict]:
    """Stable (k-1)-dimensional WL colourings of A and B over a shared palette."""
    if k < 2:
        raise StructureError("the WL backend needs k >= 2")
    _same_signature(A, B)
    d = k - 1
    structs = (A, B)
    ext = [_extension_types(S, d) for S in structs]
    palette: dict = {}
    colors = []
    for S in structs:
        types = _tuple_types(S, d)
        colors.append({u: palette.setdefault(("init", t), len(palette)) for u, t in types.items()})
    n_classes = len(set(colors[0].values()) | set(colors[1].values()))
    while True:
        palette = {}
        new_colors = []
        for S, col, ex in zip(structs, colors, ext):
            nc = {}
            for u in col:
                multiset = []
                for w in range(S.size):
                    entry = (ex[(u, w)],) + tuple(col[u[:i] + (w,) + u[i + 1:]] for i in range(d))
                    multiset.append(entry)
                multiset.sort()
                sig = (col[u], tuple(multiset))
                nc[u] = palette.setdefault(sig, len(palette))
            new_colors.append(nc)
        count = len(set(new_colors[0].values()) | set(new_colors[1].values()))
        colors = new_colors
        if count == n_classes:
            return colors[0], colors[1]
        n_classes = count


def wl_equivalent(A: Structure, B: Structure, k: int) -> bool:
    if A.size != B.size:
        return False
    ca, cb = wl_colorings(A, B, k)
    d = k - 1
    if A.pointed and B.pointed:
        return ca[(A.point,) * d] == cb[(B.point,) * d] and _wl_histogram(A, ca, d) == _wl_histogram(B, cb, d)
    return _wl_histogram(A, ca, d) == _wl_histogram(B, cb, d)


def _wl_histogram(A: Structure, col: dict, d: int) -> list:
    return sorted(col[(a,) * d] for a in range(A.size))


# ---------------------------------------------------------------------------
# modal games


def _modal_successors(A: Structure) -> dict[str, list[list[int]]]:
    out = {}
    for name, arity, table in A.relation_items():
        if arity == 2:
            succ: list[list[int]] = [[] for _ in range(A.size)]
            for x, y in table:
                succ[x].append(y)
            out[name] = succ
    return out


def _unary_profile(A: Structure, x: int) -> tuple:
    return tuple((x,) in table for _, arity, table in A.relation_items() if arity == 1)


def _modal_relation(A: Structure, B: Structure, k: int, two_way: bool) -> set[tuple[int, int]]:
    """Depth-k simulation (forth only) or bisimulation as a set of pairs."""
    sa, sb = _modal_successors(A), _modal_successors(B)
    rel = set()
    for x in range(A.size):
        px = _unary_profile(A, x)
        for y in range(B.size):
            py = _unary_profile(B, y)
            if two_way:
                ok = px == py
            else:
                ok = all(q or not p for p, q in zip(px, py))
            if ok:
                rel.add((x, y))
    base = set(rel)
    for _ in range(k):
        nxt = set()
        for x, y in base:
            ok = True
            for name in sa:
                if not all(any((x2, y2) in rel for y2 in sb[name][y]) for x2 in sa[name][x]):
                    ok = False
                    break
                if two_way and not all(any((x2, y2) in rel for x2 in sa[name][x]) for y2 in sb[name][y]):
                    ok = False
                    break
            if ok:
                nxt.add((x, y))
        rel = nxt
    return rel


def _require_pointed(A: Structure, B: Structure) -> None:
    if not (A.pointed and B.pointed):
        raise StructureError("modal games need pointed structures")


# ---------------------------------------------------------------------------
# public deciders


def hom_exists(C: ComonadInstance, B: Structure) -> Verdict:
    """Search for a homomorphism from the comonad carrier into B."""
    if C.kind not in ("ef", "modal"):
        raise StructureError("undecidable via truncated carrier; use pebble_forth")
    _same_signature(C.base, B)
    if C.kind == "modal" and not B.pointed:
        raise StructureError("modal targets must be pointed")
    f = find_homomorphism(C.carrier, B)
    k = getattr(C.comonad, "k", 0)
    return Verdict("pe", C.kind, k, f is not None, None if f is None else list(f.table), "hom-search")


def pe_forth(kind: str, A: Structure, B: Structure, k: int, witness: bool = False) -> Verdict:
    _same_signature(A, B)
    if kind == "ef":
        _check_k(k)
        win, atoms = _ef_game(A, B, k, "pe")
        result = win(frozenset(), k)
        wit = list(_ef_strategy(A, B, k, win, atoms).table) if witness and result else None
        return Verdict("pe", kind, k, result, wit, "ef-forth")
    if kind == "pebble":
        result, wit = _pebble_decide(A, B, k, "pe", witness)
        return Verdict("pe", kind, k, result, wit, "pebble-gfp")
    if kind == "modal":
        _require_pointed(A, B)
        rel = _modal_relation(A, B, k, two_way=False)
        result = (A.point, B.point) in rel
        return Verdict("pe", kind, k, result, sorted(map(list, rel)) if witness and result else None, "simulation")
    raise StructureError(f"unknown kind {kind!r}")


def exist_forth(kind: str, A: Structure, B: Structure, k: int, witness: bool = False) -> Verdict:
    _same_signature(A, B)
    if kind == "ef":
        _check_k(k)
        win, atoms = _ef_game(A, B, k, "exist")
        result = win(frozenset(), k)
        wit = list(_ef_strategy(A, B, k, win, atoms).table) if witness and result else None
        return Verdict("exist", kind, k, result, wit, "ef-forth-agreement")
    if kind == "pebble":
        result, wit = _pebble_decide(A, B, k, "exist", witness)
        return Verdict("exist", kind, k, result, wit, "pebble-gfp")
    raise StructureError("the existential fragment is decided for EF and Pebble only")


def full_equiv(kind: str, A: Structure, B: Structure, k: int, witness: bool = False) -> Verdict:
    _same_signature(A, B)
    if kind == "ef":
        _check_k(k)
        win, _ = _ef_game(A, B, k, "full")
        return Verdict("full", kind, k, win(frozenset(), k), None, "ef-back-and-forth")
    if kind == "pebble":
        result, wit = _pebble_decide(A, B, k, "full", witness)
        return Verdict("full", kind, k, result, wit, "pebble-gfp")
    if kind == "modal":
        _require_pointed(A, B)
        rel = _modal_relation(A, B, k, two_way=True)
        result = (A.point, B.point) in rel
        return Verdict("full", kind, k, result, sorted(map(list, rel)) if witness and result else None, "bisimulation")
    raise StructureError(f"unknown kind {kind!r}")


def count_equiv(
    kind: str,
    A: Structure,
    B: Structure,
    k: int,
    witness: bool = False,
    wl: bool = False,
) -> Verdict:
    _same_signature(A, B)
    if kind == "ef":
        _check_k(k)
        if A.pointed or B.pointed:
            raise StructureError("counting games take unpointed structures")
        if A.size != B.size:
            return Verdict("count", kind, k, False, None, "ef-bijective")
        win, atoms = _ef_game(A, B, k, "count")
        result = win(frozenset(), k)
        wit = _ef_bijection_tree(A, B, k, win, atoms) if witness and result else None
        return Verdict("count", kind, k, result, wit, "ef-bijective")
    if kind == "pebble":
        if A.size != B.size:
            return Verdict("count", kind, k, False, None, "wl" if wl else "pebble-bijective-gfp")
        if wl:
            return Verdict("count", kind, k, wl_equivalent(A, B, k), None, "wl")
        if A.size > BIJECTIVE_PEBBLE_LIMIT:
            raise StructureError(f"bijective fixpoint is limited to {BIJECTIVE_PEBBLE_LIMIT} elements; use the WL backend")
        result, wit = _pebble_decide(A, B, k, "count", witness)
        return Verdict("count", kind, k, result, wit, "pebble-bijective-gfp")
    if kind == "modal":
        _require_pointed(A, B)
        v = kleisli_iso_search(build("modal", A, k), build("modal", B, k))
        return Verdict("count", kind, k, v.result, v.witness if witness else None, "kleisli-iso-search")
    raise StructureError(f"unknown kind {kind!r}")


def decide(fragment: str, kind: str, A: Structure, B: Structure, k: int, **kw) -> Verdict:
    fn = {"pe": pe_forth, "exist": exist_forth, "full": full_equiv, "count": count_equiv}[fragment]
    return fn(kind, A, B, k, **kw)


def equivalent(fragment: str, kind: str, A: Structure, B: Structure, k: int) -> bool:
    """Symmetric relation used as an FVM premise: PE and EXIST are one-directional."""
    return decide(fragment, kind, A, B, k).result


# ---------------------------------------------------------------------------
# Kleisli isomorphism oracle

KLEISLI_ISO_CARRIER_LIMIT = 400


def kleisli_iso_search(CA: ComonadInstance, CB: ComonadInstance, limit: int = KLEISLI_ISO_CARRIER_LIMIT) -> Verdict:
    """Brute-force search for Kleisli-inverse maps f: C(A) -> B, g: C(B) -> A.

    f is enumerated by backtracking in carrier order. Once f is fixed on a
    word and all its prefixes, ``g . f* = counit`` forces g at ``f*(w)``; a
    clash prunes the branch. A complete f is accepted only when g is total,
    a homomorphism, and ``f . g* = counit`` holds.
    """
    if CA.comonad != CB.comonad or CA.kind not in ("ef", "modal"):
        raise StructureError("kleisli_iso_search needs two EF or two Modal instances with equal parameters")
    _same_signature(CA.base, CB.base)
    if len(CA) > limit or len(CB) > limit:
        raise StructureError(f"carriers above {limit} elements exceed the brute-force guard")
    cm = CA.comonad
    k = getattr(cm, "k", 0)
    A, B = CA.base, CB.base
    if len(CA) != len(CB):
        return Verdict("count", CA.kind, k, False, None, "kleisli-iso-search")
    # tuples of C(A) checked when their largest index is assigned
    checks: list[list[tuple[frozenset, tuple]]] = [[] for _ in range(len(CA))]
    for ta, tb in zip(CA.carrier.rels, B.rels):
        for t in ta:
            checks[max(t)].append((tb, t))
    f: list[int] = []
    g: dict[tuple, int] = {}
    images: list[tuple] = []
    fixed_root = CA.kind == "modal"

    def ok_here(i: int) -> bool:
        for tb, t in checks[i]:
            if tuple(f[j] for j in t) not in tb:
                return False
        return True

    def finish() -> tuple | None:
        if len(g) != len(CB):
            return None
        gtable = tuple(g[y] for y in CB.elems)
        gmap = StructureMap(CB.carrier, A, gtable)
        if not gmap.is_homomorphism:
            return None
        for y in CB.elems:
            gy = cm.coext(lambda u: g[u], y)
            if f[CA.index[gy]] != cm.last(y):
                return None
        return tuple(f), gtable

    def search(i: int):
        if i == len(CA):
            return finish()
        w = CA.elems[i]
        choices = [B.point] if fixed_root and i == 0 else range(B.size)
        for b in choices:
            f.append(b)
            if ok_here(i):
                img = cm.coext(lambda u: f[CA.index[u]], w)
                target = cm.last(w)
                prev = g.get(img)
                if img in CB.index and (prev is None or prev == target):
                    if prev is None:
                        g[img] = target
                    res = search(i + 1)
                    if res is not None:
                        return res
                    if prev is None:
                        del g[img]
            f.pop()
        return None

    found = search(0)
    wit = None if found is None else {"f": list(found[0]), "g": list(found[1])}
    return Verdict("count", CA.kind, k, found is not None, wit, "kleisli-iso-search")


def verify_kleisli_iso(CA: ComonadInstance, CB: ComonadInstance, f: Sequence[int], g: Sequence[int]) -> bool:
    """Replay a Kleisli isomorphism witness."""
    cm = CA.comonad
    fm = StructureMap(CA.carrier, CB.base, tuple(f))
    gm = StructureMap(CB.carrier, CA.base, tuple(g))
    if not (fm.is_homomorphism and gm.is_homomorphism):
        return False
    for x in CA.elems:
        if g[CB.index[cm.coext(lambda u: f[CA.index[u]], x)]] != cm.last(x):
            return False
    for y in CB.elems:
        if f[CA.index[cm.coext(lambda u: g[CB.index[u]], y)]] != cm.last(y):
            return False
    return True

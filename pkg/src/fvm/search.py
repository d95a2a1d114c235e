"""Backtracking homomorphism search with forward checking."""

from __future__ import annotations

import random
from typing import Iterator, Mapping

from .structures import Structure, StructureError, StructureMap


class SearchBudgetExceeded(StructureError):
    pass


def _constraints(source: Structure, target: Structure):
    """Per-variable lists of (target table, source tuple)."""
    by_var: list[list[tuple[frozenset, tuple]]] = [[] for _ in range(source.size)]
    for table_a, table_b in zip(source.rels, target.rels):
        for t in table_a:
            c = (table_b, t)
            for x in set(t):
                by_var[x].append(c)
    return by_var


def iter_homomorphisms(
    source: Structure,
    target: Structure,
    *,
    fixed: Mapping[int, int] | None = None,
    rng: random.Random | None = None,
    budget: int | None = None,
) -> Iterator[tuple[int, ...]]:
    """Yield homomorphism tables ``source -> target``.

    Variables are assigned in index order, which for comonad carriers puts
    prefixes before extensions. With ``rng`` the value order is shuffled.
    Pointed structures have their point fixed. ``budget`` caps the number
    of tentative assignments and raises :class:`SearchBudgetExceeded`.
    """
    if source.signature != target.signature:
        raise StructureError("incompatible signatures")
    n, m = source.size, target.size
    fixed = dict(fixed or {})
    if source.pointed and target.pointed:
        if fixed.get(source.point, target.point) != target.point:
            return
        fixed[source.point] = target.point
    domains: list[set[int]] = [set(range(m)) for _ in range(n)]
    for x, v in fixed.items():
        domains[x] &= {v}
    by_var = _constraints(source, target)
    # constraints mentioning a single variable are unary filters
    for x in range(n):
        for table, t in by_var[x]:
            if len(set(t)) == 1:
                domains[x] = {v for v in domains[x] if tuple(v for _ in t) in table}
    if any(not d for d in domains):
        return
    assign: list[int | None] = [None] * n

    def prune(x: int, trail: list) -> bool:
        for table, t in by_var[x]:
            free = {y for y in t if assign[y] is None}
            if not free:
                if tuple(assign[y] for y in t) not in table:
                    return False
            elif len(free) == 1:
                (u,) = free
                keep = set()
                for w in domains[u]:
                    if tuple(w if y == u else assign[y] for y in t) in table:
                        keep.add(w)
                removed = domains[u] - keep
                if removed:
                    trail.append((u, removed))
                    domains[u] = keep
                    if not keep:
                        return False
        return True

    # explicit stack: carriers can have thousands of variables
    stack: list[list] = []
    nodes = 0
    x = 0
    while True:
        if x == n:
            yield tuple(assign)  # type: ignore[arg-type]
        elif not stack or stack[-1][0] != x:
            values = sorted(domains[x])
            if rng is not None:
                rng.shuffle(values)
            stack.append([x, values, 0, None])
        # advance the top frame to its next consistent value, backtracking as needed
        while stack:
            frame = stack[-1]
            y, values, pos, trail = frame
            if trail is not None:
                for u, removed in trail:
                    domains[u] |= removed
                assign[y] = None
                frame[3] = None
            advanced = False
            while pos < len(values):
                v = values[pos]
                pos += 1
                if v not in domains[y]:
                    continue
                nodes += 1
                if budget is not None and nodes > budget:
                    raise SearchBudgetExceeded(budget)
                assign[y] = v
                tr: list = []
                if prune(y, tr):
                    frame[2], frame[3] = pos, tr
                    advanced = True
                    break
                for u, removed in tr:
                    domains[u] |= removed
                assign[y] = None
            if advanced:
                x = y + 1
                break
            stack.pop()
        else:
            return


def find_homomorphism(
    source: Structure,
    target: Structure,
    *,
    fixed: Mapping[int, int] | None = None,
    rng: random.Random | None = None,
    budget: int | None = None,
) -> StructureMap | None:
    for table in iter_homomorphisms(source, target, fixed=fixed, rng=rng, budget=budget):
        return StructureMap(source, target, table)
    return None


def random_homomorphism(source: Structure, target: Structure, rng: random.Random) -> StructureMap | None:
    return find_homomorphism(source, target, rng=rng)


def all_maps(n: int, m: int) -> Iterator[tuple[int, ...]]:
    """Every function ``range(n) -> range(m)`` in lexicographic order."""
    import itertools

    yield from itertools.product(range(m), repeat=n)

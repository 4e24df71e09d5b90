"""Marker bits and the scan operations built on them.

Scans are run as sequential worklist traversals; only the resulting marked
sets matter.  Every scan skips elements that are invisible under the active
context.
"""

from __future__ import annotations

from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator

from .errors import MarkerError, PoolExhausted

if TYPE_CHECKING:
    from .kb import KnowledgeBase

CONTEXT_BIT = 1  # reserved, never handed out by the pool

UP = "up"
DOWN = "down"


@dataclass(frozen=True)
class Marker:
    """One allocated pair: a primary bit and its cancel companion."""

    index: int
    bit: int
    cancel_bit: int


class MarkerPool:
    """Fixed pool of marker pairs.

    Bit 0 is the context marker.  Pair ``i`` owns bits ``2i+1`` and ``2i+2``.
    The pool also stores which elements carry which bit, so clearing a
    marker costs O(marked) rather than O(elements).
    """

    def __init__(self, elements: dict, capacity: int = 14):
        if capacity < 1:
            raise MarkerError("bad-capacity", "need at least one marker pair")
        self.capacity = capacity
        self._elements = elements
        self._free = list(range(capacity - 1, -1, -1))
        self._live: dict[int, Marker] = {}
        self._marked: dict[int, set[int]] = {}
        self.allocations = 0

    @property
    def available(self) -> int:
        return len(self._free)

    @property
    def in_use(self) -> int:
        return self.capacity - len(self._free)

    def alloc(self) -> Marker:
        if not self._free:
            raise PoolExhausted(message=f"all {self.capacity} marker pairs in use")
        index = self._free.pop()
        m = Marker(index, 1 << (2 * index + 1), 1 << (2 * index + 2))
        self._live[index] = m
        self.allocations += 1
        return m

    def free(self, m: Marker) -> None:
        if self._live.get(m.index) != m:
            raise MarkerError("not-allocated", f"marker pair {m.index} is not live")
        self.clear(m.bit)
        self.clear(m.cancel_bit)
        del self._live[m.index]
        self._free.append(m.index)
        # lowest free index is always handed out next
        self._free.sort(reverse=True)

    @contextmanager
    def pair(self) -> Iterator[Marker]:
        m = self.alloc()
        try:
            yield m
        finally:
            self.free(m)

    def mark(self, eid: int, bit: int) -> None:
        el = self._elements[eid]
        if not el.markers & bit:
            el.markers |= bit
            self._marked.setdefault(bit, set()).add(eid)

    def unmark(self, eid: int, bit: int) -> None:
        el = self._elements[eid]
        if el.markers & bit:
            el.markers &= ~bit
            self._marked[bit].discard(eid)

    def is_marked(self, eid: int, bit: int) -> bool:
        return bool(self._elements[eid].markers & bit)

    def marked(self, bit: int) -> list[int]:
        return sorted(self._marked.get(bit, ()))

    def clear(self, bit: int) -> None:
        for eid in self._marked.pop(bit, ()):
            self._elements[eid].markers &= ~bit


# -- traversal ---------------------------------------------------------------


def _step(kb: KnowledgeBase, eid: int, direction: str, raw: bool) -> Iterator[int]:
    els = kb.elements
    links = kb._up[eid] if direction == UP else kb._down[eid]
    for lid in links:
        link = els[lid]
        nxt = link.b if direction == UP else link.a
        if raw or (kb.visible(lid) and kb.visible(nxt)):
            yield nxt
    for lid in kb._eq[eid]:
        link = els[lid]
        nxt = link.b if link.a == eid else link.a
        if raw or (kb.visible(lid) and kb.visible(nxt)):
            yield nxt


def closure(kb: KnowledgeBase, start: int, direction: str, *, blocked=frozenset(), raw=False) -> list[int]:
    """Breadth-first closure from ``start``; result is in discovery order."""
    seen = {start}
    order = [start]
    work = deque([start])
    while work:
        cur = work.popleft()
        for nxt in _step(kb, cur, direction, raw):
            if nxt not in seen and nxt not in blocked:
                seen.add(nxt)
                order.append(nxt)
                work.append(nxt)
    return order


def _cancel_targets(kb: KnowledgeBase, nodes) -> set[int]:
    targets = set()
    for eid in nodes:
        for lid in kb._cancels[eid]:
            link = kb.elements[lid]
            if kb.visible(lid) and kb.visible(link.b):
                targets.add(link.b)
    return targets


def superiors(kb: KnowledgeBase, start: int) -> list[int]:
    """Upward closure honouring cancel-links, without touching markers."""
    if not kb.visible(start):
        return []
    order = closure(kb, start, UP)
    blocked = _cancel_targets(kb, order)
    blocked.discard(start)
    if blocked & set(order):
        order = closure(kb, start, UP, blocked=blocked)
    return order


def inferiors(kb: KnowledgeBase, start: int) -> list[int]:
    """Exact inverse of :func:`superiors`."""
    if not kb.visible(start):
        return []
    order = closure(kb, start, DOWN)
    candidates = set(order)
    if any(kb.elements[lid].b in candidates for eid in kb._cancel_sources for lid in kb._cancels[eid]
           if kb.visible(lid)):
        order = [x for x in order if x == start or start in superiors(kb, x)]
    return order


# -- public scans ------------------------------------------------------------


def upscan(kb: KnowledgeBase, start: int, m: Marker) -> list[int]:
    """Mark ``start`` and every superior with ``m``; returns them bottom-up.

    A cancel-link from any superior to a node T places the cancel companion
    bit on T, and T is then neither marked nor crossed.
    """
    if not kb.visible(start):
        return []
    pool = kb.pool
    order = closure(kb, start, UP)
    blocked = _cancel_targets(kb, order)
    blocked.discard(start)
    if blocked & set(order):
        for t in sorted(blocked):
            pool.mark(t, m.cancel_bit)
        order = closure(kb, start, UP, blocked=blocked)
    for eid in order:
        pool.mark(eid, m.bit)
    return order


def downscan(kb: KnowledgeBase, start: int, m: Marker) -> list[int]:
    order = inferiors(kb, start)
    for eid in order:
        kb.pool.mark(eid, m.bit)
    return order


def context_upscan(kb: KnowledgeBase, context: int) -> None:
    kb.pool.clear(CONTEXT_BIT)
    for eid in closure(kb, context, UP, raw=True):
        kb.pool.mark(eid, CONTEXT_BIT)


def marked_elements(kb: KnowledgeBase, m: Marker) -> list[int]:
    return kb.pool.marked(m.bit)


def restrict_to_proper(kb: KnowledgeBase, m: Marker) -> None:
    for eid in kb.pool.marked(m.bit):
        if not kb.elements[eid].proper:
            kb.pool.unmark(eid, m.bit)


def is_x_a_y(kb: KnowledgeBase, x: int, y: int) -> bool:
    with kb.pool.pair() as m:
        upscan(kb, x, m)
        return kb.pool.is_marked(y, m.bit)


def _scan_set(kb: KnowledgeBase, start: int, direction: str) -> set[int]:
    with kb.pool.pair() as t:
        if direction == UP:
            upscan(kb, start, t)
        else:
            downscan(kb, start, t)
        return set(kb.pool.marked(t.bit))


# -- role and relation scans ---------------------------------------------------
#
# A filler link is a visible is-a link from a non-role element into a role
# element c; it states "a is a (role of c) of owner(c)".  A term given as a
# pattern matches every element below it instead of only itself.


def role_links(kb: KnowledgeBase, role: int, *, filler=None, owner=None,
               filler_pattern=False, owner_pattern=False) -> list[int]:
    """Filler links whose role element is at or below ``role`` and whose
    filler/owner match the given terms."""
    els = kb.elements
    fillers = owners = None
    if filler is not None:
        fillers = _scan_set(kb, filler, DOWN) if filler_pattern else {filler}
    if owner is not None:
        owners = _scan_set(kb, owner, DOWN) if owner_pattern else {owner}
    if owners is not None:
        containers = sorted(c for o in owners for c in kb._roles_of[o] if kb.visible(c))
        links = [lid for c in containers for lid in kb._down[c] if kb.is_filler_link(lid)]
        if fillers is not None:
            links = [lid for lid in links if els[lid].a in fillers]
    elif fillers is not None:
        links = [lid for f in sorted(fillers) for lid in kb._up[f] if kb.is_filler_link(lid)]
    else:
        raise MarkerError("bad-scan", "role_links needs a filler or an owner")

    out = []
    ok_role: dict[int, bool] = {}
    for lid in links:
        c = els[lid].b
        if c not in ok_role:
            ok_role[c] = is_x_a_y(kb, c, role)
        if ok_role[c]:
            out.append(lid)
    return sorted(set(out))


def statements(kb: KnowledgeBase, rel: int, *, a=None, b=None,
               a_pattern=False, b_pattern=False) -> list[int]:
    """Visible statements whose relation is at or below ``rel``.

    A plain endpoint e matches a statement end s when e is at or below s
    (inferiors inherit statements); a pattern K matches when s is at or
    below K.
    """
    els = kb.elements
    a_ok = b_ok = None
    if a is not None:
        a_ok = _scan_set(kb, a, DOWN if a_pattern else UP)
    if b is not None:
        b_ok = _scan_set(kb, b, DOWN if b_pattern else UP)
    out = []
    for r in sorted(_scan_set(kb, rel, DOWN)):
        for sid in kb._statements[r]:
            s = els[sid]
            if not (kb.visible(sid) and kb.visible(s.a) and kb.visible(s.b)):
                continue
            if a_ok is not None and s.a not in a_ok:
                continue
            if b_ok is not None and s.b not in b_ok:
                continue
            out.append(sid)
    return sorted(out)


def mark_role_fillers(kb: KnowledgeBase, role: int, owner: int, m: Marker, pattern=False) -> None:
    """Mark every x such that x is a ``role`` of ``owner``."""
    for lid in role_links(kb, role, owner=owner, owner_pattern=pattern):
        kb.pool.mark(kb.elements[lid].a, m.bit)


def mark_role_owners(kb: KnowledgeBase, role: int, player: int, m: Marker, pattern=False) -> None:
    """Mark every x such that ``player`` is a ``role`` of x."""
    els = kb.elements
    for lid in role_links(kb, role, filler=player, filler_pattern=pattern):
        kb.pool.mark(els[els[lid].b].owner, m.bit)


def mark_rel_b(kb: KnowledgeBase, rel: int, a: int, m: Marker, pattern=False) -> None:
    """Mark every x such that "a rel x" holds."""
    for sid in statements(kb, rel, a=a, a_pattern=pattern):
        for eid in inferiors(kb, kb.elements[sid].b):
            kb.pool.mark(eid, m.bit)


def mark_rel_a(kb: KnowledgeBase, rel: int, b: int, m: Marker, pattern=False) -> None:
    """Mark every x such that "x rel b" holds."""
    for sid in statements(kb, rel, b=b, b_pattern=pattern):
        for eid in inferiors(kb, kb.elements[sid].a):
            kb.pool.mark(eid, m.bit)

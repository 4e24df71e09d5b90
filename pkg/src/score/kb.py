"""The element network: nodes, links, relations, roles and contexts."""

from __future__ import annotations

import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Union

from . import markers
from .errors import KBError
from .markers import CONTEXT_BIT, MarkerPool

log = logging.getLogger(__name__)

Ref = Union[int, str]

TRIGGER_KEY = "rule-triggers"


class Kind(str, Enum):
    TYPE_NODE = "type-node"
    INDV_NODE = "indv-node"
    TYPE_ROLE = "type-role"
    INDV_ROLE = "indv-role"
    IS_A = "is-a-link"
    EQ = "eq-link"
    HAS = "has-link"
    CANCEL = "cancel-link"
    STATEMENT = "statement-link"
    RELATION = "relation"

    def __str__(self) -> str:
        return self.value


ROLE_KINDS = frozenset({Kind.TYPE_ROLE, Kind.INDV_ROLE})
NODE_KINDS = frozenset({Kind.TYPE_NODE, Kind.INDV_NODE}) | ROLE_KINDS
LINK_KINDS = frozenset({Kind.IS_A, Kind.EQ, Kind.HAS, Kind.CANCEL, Kind.STATEMENT})

_LINK_WORDS = {
    Kind.IS_A: "is-a",
    Kind.EQ: "eq",
    Kind.HAS: "has",
    Kind.CANCEL: "is-not-a",
}


@dataclass(slots=True, eq=False)
class Element:
    id: int
    name: Optional[str]
    kind: Kind
    context: int
    a: Optional[int] = None
    b: Optional[int] = None
    owner: Optional[int] = None
    rel: Optional[int] = None  # statement links only
    proper: bool = False
    payload: Union[int, str, None] = None
    properties: dict = field(default_factory=dict)
    markers: int = 0

    @property
    def is_link(self) -> bool:
        return self.kind in LINK_KINDS

    @property
    def is_role(self) -> bool:
        return self.kind in ROLE_KINDS


@dataclass
class Stats:
    trigger_activations: int = 0
    subst_failures: int = 0
    rule_checks: int = 0
    firings: int = 0
    action_errors: int = 0
    max_check_depth: dict = field(default_factory=dict)  # rule id -> deepest recursion seen


class KnowledgeBase:
    """A marker-passing knowledge network with an attached rule engine.

    Public operations accept element ids or element names.  Every link
    creation is reported to the trigger engine, which may fire rules before
    the operation returns.
    """

    def __init__(self, marker_pairs: int = 14, max_chain_depth: int = 1000,
                 tracer: Optional[Callable[[str], None]] = None):
        from .triggers import TriggerEngine

        self.elements: dict[int, Element] = {}
        self._names: dict[str, int] = {}
        self._ids = itertools.count(1)
        self._up: dict[int, list[int]] = defaultdict(list)
        self._down: dict[int, list[int]] = defaultdict(list)
        self._eq: dict[int, list[int]] = defaultdict(list)
        self._cancels: dict[int, list[int]] = defaultdict(list)
        self._cancel_sources: set[int] = set()
        self._roles_of: dict[int, list[int]] = defaultdict(list)
        self._statements: dict[int, list[int]] = defaultdict(list)
        self._copies: dict[tuple[int, int], list[int]] = defaultdict(list)
        self._payloads: dict[object, list[int]] = defaultdict(list)
        self._link_index: dict[tuple, list[int]] = defaultdict(list)
        self.contexts: set[int] = set()
        self.pool = MarkerPool(self.elements, marker_pairs)
        self.stats = Stats()
        self.tracer = tracer
        self.hooks: dict[str, Callable] = {}

        thing = self._new_element("thing", Kind.TYPE_NODE, context=0)
        general = self._new_element("general", Kind.TYPE_NODE, context=0)
        self.elements[thing].context = general
        self.elements[general].context = general
        self.thing, self.general = thing, general
        self.contexts.add(general)
        self.active_context = general
        self._register_link(Kind.IS_A, general, thing)
        markers.context_upscan(self, general)

        self.engine = TriggerEngine(self, max_chain_depth)

    # -- lookup ----------------------------------------------------------------

    def id_of(self, ref: Ref) -> int:
        if isinstance(ref, bool):
            raise KBError("unknown-element", repr(ref))
        if isinstance(ref, int):
            if ref not in self.elements:
                raise KBError("unknown-element", f"no element #{ref}")
            return ref
        try:
            return self._names[ref]
        except KeyError:
            raise KBError("unknown-element", f"no element named {{{ref}}}") from None

    def __getitem__(self, ref: Ref) -> Element:
        return self.elements[self.id_of(ref)]

    def __contains__(self, ref: Ref) -> bool:
        if isinstance(ref, int):
            return ref in self.elements
        return ref in self._names

    def has_name(self, name: str) -> bool:
        return name in self._names

    def name_count(self) -> int:
        return len(self._names)

    def visible(self, eid: int) -> bool:
        return bool(self.elements[self.elements[eid].context].markers & CONTEXT_BIT)

    def label(self, ref: Ref) -> str:
        """Human-readable rendering: ``{name}`` for nodes, a sentence for links."""
        el = self[ref]
        if el.name is not None:
            return "{" + el.name + "}"
        if el.kind is Kind.STATEMENT:
            return "{%s %s %s}" % (self._bare(el.a), self._bare(el.rel), self._bare(el.b))
        if el.kind in _LINK_WORDS:
            return "{%s %s %s}" % (self._bare(el.a), _LINK_WORDS[el.kind], self._bare(el.b))
        return "{#%d}" % el.id

    def _bare(self, eid) -> str:
        return self.label(eid)[1:-1]

    def is_role(self, ref: Ref) -> bool:
        return self[ref].is_role

    def is_filler_link(self, lid: int) -> bool:
        """A visible is-a link from a non-role element into a role element."""
        link = self.elements[lid]
        if link.kind is not Kind.IS_A:
            return False
        a, b = self.elements[link.a], self.elements[link.b]
        return (b.is_role and not a.is_role and self.visible(lid)
                and self.visible(link.a) and self.visible(link.b))

    def roles_of(self, owner: Ref) -> list[int]:
        return list(self._roles_of[self.id_of(owner)])

    def links(self, kind: Optional[Kind] = None) -> list[int]:
        return [e.id for e in self.elements.values() if e.is_link and (kind is None or e.kind is kind)]

    def triggers_on(self, ref: Ref) -> list:
        return list(self[ref].properties.get(TRIGGER_KEY, ()))

    # -- element construction --------------------------------------------------

    def _new_element(self, name, kind, *, context=None, **wires) -> int:
        if name is not None:
            if not isinstance(name, str) or not name:
                raise KBError("bad-name", repr(name))
            if name in self._names:
                raise KBError("duplicate-name", f"{{{name}}} already exists")
        eid = next(self._ids)
        ctx = self.active_context if context is None else context
        self.elements[eid] = Element(eid, name, kind, ctx, **wires)
        if name is not None:
            self._names[name] = eid
        payload = wires.get("payload")
        if payload is not None:
            self._payloads[payload].append(eid)
        return eid

    def _link_key(self, kind, a, b, rel=None):
        if kind is Kind.EQ:
            a, b = min(a, b), max(a, b)
        return (kind, a, b, rel)

    def _existing_link(self, kind, a, b, rel=None) -> Optional[int]:
        for lid in self._link_index.get(self._link_key(kind, a, b, rel), ()):
            if self.visible(lid):
                return lid
        return None

    def _register_link(self, kind, a, b, rel=None) -> int:
        lid = self._new_element(None, kind, a=a, b=b, rel=rel)
        self._link_index[self._link_key(kind, a, b, rel)].append(lid)
        if kind is Kind.IS_A:
            self._up[a].append(lid)
            self._down[b].append(lid)
        elif kind is Kind.EQ:
            self._eq[a].append(lid)
            self._eq[b].append(lid)
        elif kind is Kind.CANCEL:
            self._cancels[a].append(lid)
            self._cancel_sources.add(a)
        elif kind is Kind.STATEMENT:
            self._statements[rel].append(lid)
        return lid

    def _node(self, ref: Ref, what: str = "element") -> int:
        eid = self.id_of(ref)
        if self.elements[eid].is_link:
            raise KBError("not-a-node", f"{self.label(eid)} is a link, expected a {what}")
        return eid

    def _type_parent(self, parent: Ref) -> int:
        try:
            pid = self.id_of(parent)
        except KBError:
            raise KBError("unknown-parent", f"{{{parent}}} does not exist") from None
        if self.elements[pid].kind is not Kind.TYPE_NODE and not self.elements[pid].is_role:
            raise KBError("parent-not-a-type", f"{self.label(pid)} is a {self.elements[pid].kind}")
        return pid

    def new_type(self, name: str, parent: Ref = "thing") -> int:
        pid = self._type_parent(parent)
        eid = self._new_element(name, Kind.TYPE_NODE)
        self.add_is_a(eid, pid)
        return eid

    def new_indv(self, name: str, parent: Ref = "thing", *, payload=None, proper: bool = True) -> int:
        pid = self._type_parent(parent)
        eid = self._new_element(name, Kind.INDV_NODE, proper=proper or payload is not None,
                                payload=payload)
        self.add_is_a(eid, pid)
        return eid

    def _new_role(self, name, owner, parent, kind) -> int:
        try:
            oid = self._node(owner, "owner")
        except KBError:
            raise KBError("unknown-owner", f"{{{owner}}} does not exist") from None
        pid = self._type_parent(parent)
        eid = self._new_element(name, kind, owner=oid)
        self._roles_of[oid].append(eid)
        self._copies[(eid, oid)].append(eid)
        self.add_is_a(eid, pid)
        self._register_link(Kind.HAS, eid, oid)
        return eid

    def new_type_role(self, name: str, owner: Ref, parent: Ref = "thing") -> int:
        return self._new_role(name, owner, parent, Kind.TYPE_ROLE)

    def new_indv_role(self, name: str, owner: Ref, parent: Ref = "thing") -> int:
        return self._new_role(name, owner, parent, Kind.INDV_ROLE)

    def new_relation(self, name: str, a_type: Ref = "thing", b_type: Ref = "thing") -> int:
        a = self._node(a_type)
        b = self._node(b_type)
        return self._new_element(name, Kind.RELATION, a=a, b=b)

    def new_context(self, name: str, parent: Ref = "general") -> int:
        pid = self.id_of(parent)
        if pid not in self.contexts:
            raise KBError("unknown-context", f"{self.label(pid)} is not a context")
        eid = self._new_element(name, Kind.TYPE_NODE)
        self.contexts.add(eid)
        self.add_is_a(eid, pid)
        return eid

    def activate_context(self, ctx: Ref) -> None:
        cid = self.id_of(ctx)
        if cid not in self.contexts:
            raise KBError("unknown-context", f"{self.label(cid)} is not a context")
        self.active_context = cid
        markers.context_upscan(self, cid)

    def number_node(self, value: int) -> int:
        """The proper individual ``{<value>}`` under ``{number}``, created on first use."""
        name = str(value)
        if name in self._names:
            return self._names[name]
        if "number" not in self._names:
            self.new_type("number")
        return self.new_indv(name, "number", payload=value)

    def value_node(self, value) -> int:
        """Element standing for a computed value: the earliest visible proper
        element carrying that payload, else a fresh number node."""
        for eid in self._payloads.get(value, ()):
            el = self.elements[eid]
            if el.proper and self.visible(eid):
                return eid
        if isinstance(value, int) and not isinstance(value, bool):
            return self.number_node(value)
        raise KBError("bad-value", f"no element carries payload {value!r}")

    # -- links -------------------------------------------------------------------

    def _raw_reaches(self, start: int, goal: int) -> bool:
        seen = {start}
        work = [start]
        while work:
            cur = work.pop()
            if cur == goal:
                return True
            for lid in self._up[cur]:
                nxt = self.elements[lid].b
                if nxt not in seen:
                    seen.add(nxt)
                    work.append(nxt)
        return False

    def add_is_a(self, a: Ref, b: Ref) -> int:
        a, b = self._node(a), self._node(b)
        ea, eb = self.elements[a], self.elements[b]
        if eb.kind is Kind.INDV_NODE:
            raise KBError("inferior-of-individual", f"{self.label(b)} is an individual")
        if (ea.kind is Kind.RELATION) != (eb.kind is Kind.RELATION):
            raise KBError("relation-mismatch", "relations only specialize relations")
        existing = self._existing_link(Kind.IS_A, a, b)
        if existing is not None:
            return existing
        if a == b or self._raw_reaches(b, a):
            raise KBError("cycle-detected", f"{self.label(a)} is-a {self.label(b)} closes a cycle")
        lid = self._register_link(Kind.IS_A, a, b)
        self.engine.notify_link(lid)
        return lid

    def add_eq(self, a: Ref, b: Ref) -> int:
        a, b = self._node(a), self._node(b)
        if a == b:
            raise KBError("self-eq", f"{self.label(a)} is trivially itself")
        existing = self._existing_link(Kind.EQ, a, b)
        if existing is not None:
            return existing
        lid = self._register_link(Kind.EQ, a, b)
        self.engine.notify_link(lid)
        return lid

    def add_cancel(self, a: Ref, b: Ref) -> int:
        a, b = self._node(a), self._node(b)
        existing = self._existing_link(Kind.CANCEL, a, b)
        if existing is not None:
            return existing
        return self._register_link(Kind.CANCEL, a, b)

    def new_statement(self, a: Ref, rel: Ref, b: Ref) -> int:
        a, b = self._node(a), self._node(b)
        rid = self.id_of(rel)
        r = self.elements[rid]
        if r.kind is not Kind.RELATION:
            raise KBError("not-a-relation", f"{self.label(rid)} is not a relation")
        if not self.is_x_a_y(a, r.a) or not self.is_x_a_y(b, r.b):
            raise KBError("constraint-violation",
                          f"{self.label(rid)} relates {self.label(r.a)} to {self.label(r.b)}")
        existing = self._existing_link(Kind.STATEMENT, a, b, rid)
        if existing is not None:
            return existing
        lid = self._register_link(Kind.STATEMENT, a, b, rid)
        self.engine.notify_link(lid)
        return lid

    # -- roles and virtual copies -----------------------------------------------

    def _role(self, ref: Ref) -> int:
        rid = self.id_of(ref)
        if not self.elements[rid].is_role:
            raise KBError("not-a-role", f"{self.label(rid)} is not a role")
        return rid

    def _visible_copy(self, role: int, owner: int) -> Optional[int]:
        for cid in self._copies.get((role, owner), ()):
            if self.visible(cid):
                return cid
        return None

    def copy_of(self, role: Ref, owner: Ref) -> int:
        """The (materialized) virtual copy of ``role`` for ``owner``."""
        rid = self._role(role)
        oid = self._node(owner)
        r = self.elements[rid]
        if oid == r.owner:
            return rid
        cid = self._visible_copy(rid, oid)
        if cid is not None:
            return cid
        if not self.is_x_a_y(oid, r.owner):
            raise KBError("owner-mismatch",
                          f"{self.label(oid)} is not a {self.label(r.owner)}")
        base = f"{r.name} of {self.elements[oid].name or '#%d' % oid}"
        name, n = base, 1
        while name in self._names:
            n += 1
            name = f"{base} ({n})"
        cid = self._new_element(name, r.kind, owner=oid)
        self._roles_of[oid].append(cid)
        self._copies[(rid, oid)].append(cid)
        self.add_is_a(cid, rid)
        # inherit from copies already made for the owner's superiors
        for sup in markers.superiors(self, oid)[1:]:
            other = self._visible_copy(rid, sup)
            if other is not None and other != rid:
                self.add_is_a(cid, other)
        self._register_link(Kind.HAS, cid, oid)
        return cid

    def x_is_a_y_of_z(self, x: Ref, role: Ref, z: Ref) -> int:
        xid = self._node(x)
        if self.elements[xid].is_role:
            raise KBError("filler-is-role", f"{self.label(xid)} is a role and cannot fill one")
        cid = self.copy_of(role, z)
        return self.add_is_a(xid, cid)

    x_is_the_y_of_z = x_is_a_y_of_z

    def lookup_the_y_of_z(self, role: Ref, z: Ref, proper_only: bool = True) -> Optional[int]:
        """Existing filler of "the role of z", without any rule checking."""
        rid = self._role(role)
        oid = self._node(z)
        cid = rid if oid == self.elements[rid].owner else self._visible_copy(rid, oid)
        if cid is None:
            return None
        for lid in self._down[cid]:
            if self.is_filler_link(lid):
                filler = self.elements[lid].a
                if self.elements[filler].proper or not proper_only:
                    return filler
        return None

    def the_x_of_y(self, role: Ref, owner: Ref) -> Optional[int]:
        """Requested value: lookup first, then if-needed rules."""
        return self.engine.request_value(self._role(role), self._node(owner))

    # -- queries -----------------------------------------------------------------

    def is_x_a_y(self, x: Ref, y: Ref) -> bool:
        return markers.is_x_a_y(self, self.id_of(x), self.id_of(y))

    def is_x_eq_y(self, x: Ref, y: Ref) -> bool:
        x, y = self.id_of(x), self.id_of(y)
        if x == y:
            return True
        seen, work = {x}, [x]
        while work:
            cur = work.pop()
            for lid in self._eq[cur]:
                link = self.elements[lid]
                nxt = link.b if link.a == cur else link.a
                if self.visible(lid) and nxt not in seen:
                    if nxt == y:
                        return True
                    seen.add(nxt)
                    work.append(nxt)
        return False

    def superiors(self, x: Ref) -> list[int]:
        with self.pool.pair() as m:
            markers.upscan(self, self.id_of(x), m)
            return self.pool.marked(m.bit)

    def inferiors(self, x: Ref) -> list[int]:
        with self.pool.pair() as m:
            markers.downscan(self, self.id_of(x), m)
            return self.pool.marked(m.bit)

    def role_fillers(self, role: Ref, owner: Ref) -> list[int]:
        with self.pool.pair() as m:
            markers.mark_role_fillers(self, self.id_of(role), self.id_of(owner), m)
            return self.pool.marked(m.bit)

    def role_owners(self, role: Ref, player: Ref) -> list[int]:
        with self.pool.pair() as m:
            markers.mark_role_owners(self, self.id_of(role), self.id_of(player), m)
            return self.pool.marked(m.bit)

    def rel_b(self, rel: Ref, a: Ref) -> list[int]:
        with self.pool.pair() as m:
            markers.mark_rel_b(self, self.id_of(rel), self.id_of(a), m)
            return self.pool.marked(m.bit)

    def rel_a(self, rel: Ref, b: Ref) -> list[int]:
        with self.pool.pair() as m:
            markers.mark_rel_a(self, self.id_of(rel), self.id_of(b), m)
            return self.pool.marked(m.bit)

    # -- rules -------------------------------------------------------------------

    def install_rule(self, rule) -> None:
        self.engine.install_rule(rule)

    @property
    def rules(self) -> dict:
        return self.engine.rules

    def register_hook(self, name: str, fn: Callable) -> None:
        """Make ``fn(kb, *elements)`` callable from rule actions as ``(call name ...)``."""
        self.hooks[name] = fn

    def trace(self, line: str) -> None:
        if self.tracer is not None:
            self.tracer(line)

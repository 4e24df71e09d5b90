"""Brute-force reference implementations and random workload generators.

Nothing here reuses the engine's traversal code.  The oracles read a flat
:class:`KbSnapshot` and recompute every answer from the raw wires.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Optional

from .errors import ScoreError

BUDGET = 10 ** 7

ROLE = ("type-role", "indv-role")
LINKS = ("is-a-link", "eq-link", "has-link", "cancel-link", "statement-link")


class BudgetExceeded(ScoreError):
    code = "combinatorial-budget-exceeded"


@dataclass(frozen=True)
class Rec:
    id: int
    name: Optional[str]
    kind: str
    context: int
    a: Optional[int]
    b: Optional[int]
    owner: Optional[int]
    rel: Optional[int]
    proper: bool
    payload: object


@dataclass(frozen=True)
class KbSnapshot:
    records: frozenset
    active_context: int

    def __eq__(self, other) -> bool:
        return (isinstance(other, KbSnapshot) and self.records == other.records
                and self.active_context == other.active_context)

    def __hash__(self) -> int:
        return hash((self.records, self.active_context))

    def fingerprint(self) -> str:
        rows = sorted(repr(tuple(r.__dict__.values())) for r in self.records)
        h = hashlib.sha256("\n".join(rows).encode())
        h.update(str(self.active_context).encode())
        return h.hexdigest()


def snapshot(kb) -> KbSnapshot:
    recs = frozenset(
        Rec(e.id, e.name, str(e.kind), e.context, e.a, e.b, e.owner, e.rel, e.proper, e.payload)
        for e in kb.elements.values())
    return KbSnapshot(recs, kb.active_context)


class Oracle:
    """Answers reachability and satisfaction questions for one snapshot."""

    def __init__(self, snap: KbSnapshot):
        self.snap = snap
        self.by_id = {r.id: r for r in snap.records}
        up, eq, cancels = {}, {}, {}
        for r in snap.records:
            if r.kind == "is-a-link":
                up.setdefault(r.a, []).append(r)
            elif r.kind == "eq-link":
                eq.setdefault(r.a, []).append((r, r.b))
                eq.setdefault(r.b, []).append((r, r.a))
            elif r.kind == "cancel-link":
                cancels.setdefault(r.a, []).append(r)
        self._up, self._eq, self._cancels = up, eq, cancels
        self.visible_ctx = self._raw_reach(snap.active_context)
        self._sup: dict[int, frozenset] = {}
        self._inf: Optional[dict] = None

    def _neighbours(self, x):
        for link in self._up.get(x, ()):
            yield link, link.b
        yield from self._eq.get(x, ())

    def _raw_reach(self, start) -> set:
        seen, stack = {start}, [start]
        while stack:
            for _, nxt in self._neighbours(stack.pop()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    def visible(self, eid) -> bool:
        return self.by_id[eid].context in self.visible_ctx

    def nodes(self) -> list[int]:
        return sorted(r.id for r in self.snap.records if r.kind not in LINKS and self.visible(r.id))

    def _reach(self, start, blocked) -> set:
        seen, stack = {start}, [start]
        while stack:
            for link, nxt in self._neighbours(stack.pop()):
                if nxt in seen or nxt in blocked:
                    continue
                if self.visible(link.id) and self.visible(nxt):
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    def superiors(self, x) -> frozenset:
        if x in self._sup:
            return self._sup[x]
        if not self.visible(x):
            res = frozenset()
        else:
            reach = self._reach(x, set())
            blocked = {c.b for n in reach for c in self._cancels.get(n, ())
                       if self.visible(c.id) and self.visible(c.b)} - {x}
            res = frozenset(self._reach(x, blocked) if blocked & reach else reach)
        self._sup[x] = res
        return res

    def inferiors(self, x) -> frozenset:
        if self._inf is None:
            inf: dict = {}
            for y in self.nodes():
                for s in self.superiors(y):
                    inf.setdefault(s, set()).add(y)
            self._inf = {k: frozenset(v) for k, v in inf.items()}
        return self._inf.get(x, frozenset())

    def below(self, x, y) -> bool:
        return y in self.superiors(x)

    # -- roles and statements --

    def filler_links(self) -> list[Rec]:
        out = []
        for r in self.snap.records:
            if r.kind != "is-a-link":
                continue
            a, b = self.by_id[r.a], self.by_id[r.b]
            if b.kind in ROLE and a.kind not in ROLE and all(map(self.visible, (r.id, r.a, r.b))):
                out.append(r)
        return out

    def statements(self) -> list[Rec]:
        return [r for r in self.snap.records if r.kind == "statement-link"
                and all(map(self.visible, (r.id, r.a, r.b)))]

    def role_fillers(self, role, owner) -> set:
        return {L.a for L in self.filler_links()
                if self.below(L.b, role) and self.by_id[L.b].owner == owner}

    def role_owners(self, role, player) -> set:
        return {self.by_id[L.b].owner for L in self.filler_links()
                if L.a == player and self.below(L.b, role)}

    def rel_b(self, rel, a) -> set:
        out = set()
        for s in self.statements():
            if self.below(s.rel, rel) and self.below(a, s.a):
                out |= self.inferiors(s.b)
        return out

    def rel_a(self, rel, b) -> set:
        out = set()
        for s in self.statements():
            if self.below(s.rel, rel) and self.below(b, s.b):
                out |= self.inferiors(s.a)
        return out

    def _pairs(self, pred, domains) -> set:
        """All (x, z) value pairs that make one predicate true."""
        x, y, z = pred.x, pred.y, pred.z
        xs = domains[x.name] if hasattr(x, "name") else None
        zs = domains[z.name] if hasattr(z, "name") else None
        pairs = set()
        if self.by_id[y].kind in ROLE:
            for L in self.filler_links():
                if not self.below(L.b, y):
                    continue
                owner = self.by_id[L.b].owner
                if xs is None:
                    if not self.below(L.a, x.id):
                        continue
                    xv = x.id
                elif L.a in xs:
                    xv = L.a
                else:
                    continue
                if zs is None:
                    if self.below(owner, z.id):
                        pairs.add((xv, z.id))
                elif owner in zs:
                    pairs.add((xv, owner))
            return pairs
        for s in self.statements():
            if not self.below(s.rel, y):
                continue
            if xs is None:
                xvals = [x.id] if self.below(s.a, x.id) else []
            else:
                xvals = [e for e in xs if self.below(e, s.a)]
            if zs is None:
                zvals = [z.id] if self.below(s.b, z.id) else []
            else:
                zvals = [e for e in zs if self.below(e, s.b)]
            pairs.update((p, q) for p in xvals for q in zvals)
        return pairs

    def satisfying_tuples(self, rule) -> set:
        """Every complete binding of ``rule`` that satisfies all its conditions."""
        names = [v.name for v in rule.variables]
        domains = {}
        for v in rule.variables:
            d = set()
            for e in self.nodes():
                if v.proper and not self.by_id[e].proper:
                    continue
                if v.superior is not None and not self.below(e, v.superior):
                    continue
                d.add(e)
            domains[v.name] = d
        tables = [(p, self._pairs(p, domains)) for p in rule.predicates]
        for p, pairs in tables:
            if not pairs:
                return set()
            if hasattr(p.x, "name"):
                domains[p.x.name] &= {a for a, _ in pairs}
            if hasattr(p.z, "name"):
                domains[p.z.name] &= {b for _, b in pairs}
        size = 1
        for n in names:
            size *= max(1, len(domains[n]))
        if size > BUDGET:
            raise BudgetExceeded(message=f"{size} candidate tuples")

        def val(term, env):
            return env[term.name] if hasattr(term, "name") else term.id

        out = set()

        def extend(k, env):
            if k == len(names):
                out.add(tuple(env[n] for n in names))
                return
            for e in sorted(domains[names[k]]):
                env[names[k]] = e
                ok = True
                for p, pairs in tables:
                    try:
                        pair = (val(p.x, env), val(p.z, env))
                    except KeyError:
                        continue
                    if pair not in pairs:
                        ok = False
                        break
                if ok:
                    extend(k + 1, env)
                del env[names[k]]

        extend(0, {})
        return out


def oracle_superiors(snap: KbSnapshot, x) -> frozenset:
    return Oracle(snap).superiors(x)


def oracle_inferiors(snap: KbSnapshot, x) -> frozenset:
    return Oracle(snap).inferiors(x)


def oracle_satisfying_tuples(snap: KbSnapshot, rule) -> set:
    return Oracle(snap).satisfying_tuples(rule)


# -- generators --------------------------------------------------------------------


@dataclass(frozen=True)
class Op:
    phase: str  # "schema" or "facts"
    kind: str
    args: tuple


def apply_op(kb, op: Op):
    k, a = op.kind, op.args
    if k == "type":
        return kb.new_type(*a)
    if k == "indv":
        name, parent, payload, proper = a
        return kb.new_indv(name, parent, payload=payload, proper=proper)
    if k == "is-a":
        return kb.add_is_a(*a)
    if k == "eq":
        return kb.add_eq(*a)
    if k == "cancel":
        return kb.add_cancel(*a)
    if k == "type-role":
        return kb.new_type_role(*a)
    if k == "indv-role":
        return kb.new_indv_role(*a)
    if k == "relation":
        return kb.new_relation(*a)
    if k == "filler":
        return kb.x_is_a_y_of_z(*a)
    if k == "statement":
        return kb.new_statement(*a)
    raise ValueError(k)


def apply_ops(kb, ops, phase: Optional[str] = None) -> None:
    for op in ops:
        if phase is None or op.phase == phase:
            apply_op(kb, op)


def _try(kb, ops, op) -> bool:
    try:
        apply_op(kb, op)
    except ScoreError:
        return False
    ops.append(op)
    return True


def gen_random_kb(seed: int, size: int, *, eq: bool = False, cancels: bool = False):
    """A layered random KB of roughly ``size`` elements.

    Returns ``(ops, snapshot)``.  Schema ops (types, roles, relations,
    individuals) come first, then facts between individuals.  With
    ``eq`` / ``cancels`` the schema also gets such links between types.
    """
    from .kb import KnowledgeBase

    rng = random.Random(seed)
    kb = KnowledgeBase()
    ops: list[Op] = []
    if size <= 0:
        return ops, snapshot(kb)

    types = ["thing"]
    n_types = max(1, size // 10)
    for i in range(n_types):
        name = f"T{i}"
        _try(kb, ops, Op("schema", "type", (name, rng.choice(types))))
        types.append(name)
        if len(types) > 3 and rng.random() < 0.3:
            _try(kb, ops, Op("schema", "is-a", (name, rng.choice(types[1:-1]))))
    # Action targets (A*) and role value types (V*) are never used as
    # predicate constants: links into them would change which elements
    # match a constant without activating that predicate's trigger.
    values = ["thing"]
    for i in range(2):
        _try(kb, ops, Op("schema", "type", (f"A{i}", "thing")))
        _try(kb, ops, Op("schema", "type", (f"V{i}", "thing")))
        values.append(f"V{i}")
    if len(types) > 3:
        for _ in range(rng.randint(0, 2) if eq else 0):
            _try(kb, ops, Op("schema", "eq", tuple(rng.sample(types[1:], 2))))
        for _ in range(rng.randint(0, 2) if cancels else 0):
            _try(kb, ops, Op("schema", "cancel", tuple(rng.sample(types[1:], 2))))

    roles = []
    for i in range(max(1, size // 25)):
        kind = rng.choice(("type-role", "indv-role"))
        name = f"r{i}"
        if _try(kb, ops, Op("schema", kind, (name, rng.choice(types), rng.choice(values)))):
            roles.append(name)
        if len(roles) > 1 and rng.random() < 0.2:
            _try(kb, ops, Op("schema", "is-a", (name, rng.choice(roles[:-1]))))
    rels = []
    for i in range(max(1, size // 40)):
        name = f"q{i}"
        if _try(kb, ops, Op("schema", "relation", (name, "thing", "thing"))):
            rels.append(name)
        if len(rels) > 1 and rng.random() < 0.3:
            _try(kb, ops, Op("schema", "is-a", (name, rng.choice(rels[:-1]))))

    indvs = []
    for i in range(max(2, size // 6)):
        name = f"i{i}"
        payload = rng.randint(0, 20) if rng.random() < 0.3 else None
        proper = payload is not None or rng.random() < 0.8
        if _try(kb, ops, Op("schema", "indv", (name, rng.choice(types), payload, proper))):
            indvs.append(name)
            if rng.random() < 0.15:
                _try(kb, ops, Op("schema", "is-a", (name, rng.choice(types[1:] or types))))

    attempts = 0
    while len(kb.elements) < size and attempts < 20 * size:
        attempts += 1
        if roles and (not rels or rng.random() < 0.6):
            role = rng.choice(roles)
            owner_type = kb[role].owner
            owners = [o for o in indvs if kb.is_x_a_y(o, owner_type)]
            if not owners:
                continue
            _try(kb, ops, Op("facts", "filler", (rng.choice(indvs), role, rng.choice(owners))))
        else:
            _try(kb, ops, Op("facts", "statement",
                             (rng.choice(indvs), rng.choice(rels), rng.choice(indvs))))
    return ops, snapshot(kb)


def gen_random_rules(seed: int, snap: KbSnapshot, n: int, *, first_id: int = 1) -> list:
    """``n`` connected if-added rules over the snapshot's roles and relations."""
    from .rules import IF_ADDED, Assertion, Const, Predicate, Rule, RuleVariable, Var

    rng = random.Random(seed * 7919 + 17)
    recs = sorted(snap.records, key=lambda r: r.id)
    ys = [r.id for r in recs if r.kind in ROLE or r.kind == "relation"]
    types = [r.id for r in recs if r.kind == "type-node" and r.name != "general"]
    targets = [r.id for r in recs if r.kind == "type-node" and (r.name or "").startswith("A")]
    reserved = {r.id for r in recs if (r.name or "")[:1] in ("A", "V")}
    nodes = [r.id for r in recs if r.kind in ("type-node", "indv-node")
             and r.name not in ("general", "thing") and r.id not in reserved]
    if not ys:
        return []
    rules = []
    for k in range(n):
        nv = rng.randint(1, 4)
        names = ["abcd"[i] for i in range(nv)]
        preds = []
        for i in range(1, nv):
            j = rng.randrange(i)
            ends = [Var(names[i]), Var(names[j])]
            rng.shuffle(ends)
            preds.append(Predicate(ends[0], rng.choice(ys), ends[1]))
        if nv == 1 or rng.random() < 0.3:
            v = Var(rng.choice(names))
            ends = [v, Const(rng.choice(nodes))]
            rng.shuffle(ends)
            preds.append(Predicate(ends[0], rng.choice(ys), ends[1]))
        if nv > 2 and rng.random() < 0.2:
            a, b = rng.sample(names, 2)
            preds.append(Predicate(Var(a), rng.choice(ys), Var(b)))
        variables = []
        for nm in names:
            sup = rng.choice(types) if rng.random() < 0.3 else None
            variables.append(RuleVariable(nm, sup, rng.random() < 0.3))
        action = ()
        if rng.random() < 0.3 and targets:
            action = (Assertion("new-is-a", (Var(rng.choice(names)), Const(rng.choice(targets)))),)
        rules.append(Rule(f"R{first_id + k}", IF_ADDED, tuple(variables), tuple(preds), action))
    return rules

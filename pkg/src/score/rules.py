"""Rule structure, validation, variable substitution and action execution."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Union

from . import markers
from .errors import ActionError, KBError, RuleError
from .kb import Kind

if TYPE_CHECKING:
    from .kb import KnowledgeBase

IF_ADDED = "if-added"
IF_NEEDED = "if-needed"


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    """A fixed element used as a predicate endpoint or action argument."""

    id: int


@dataclass(frozen=True)
class Num:
    value: Union[int, str]


Term = Union[Var, Const]


@dataclass(frozen=True)
class RuleVariable:
    name: str
    superior: Optional[int] = None
    proper: bool = False


@dataclass(frozen=True)
class Predicate:
    """(X Y Z): "X is a Y of Z" when Y is a role, "X Y Z" when Y is a relation."""

    x: Term
    y: int
    z: Term


@dataclass(frozen=True)
class Compute:
    op: str
    args: tuple


@dataclass(frozen=True)
class Assertion:
    op: str
    args: tuple


@dataclass(frozen=True)
class When:
    test: Compute
    body: tuple


@dataclass(frozen=True)
class NeededAction:
    """If-needed action: compute a value and make it "the role of owner"."""

    compute: object
    role: int
    owner: Var


ASSERTION_ARITY = {
    "new-is-a": 2,
    "new-eq": 2,
    "x-is-a-y-of-z": 3,
    "x-is-the-y-of-z": 3,
    "new-statement": 3,
}


def _subtract(a, b):
    return a - b


def _add(a, b):
    return a + b


BUILTINS = {
    "scone-subtract": (_subtract, 2),
    "scone-add": (_add, 2),
    "scone-less?": (lambda a, b: a < b, 2),
    "scone-greater?": (lambda a, b: a > b, 2),
    "scone-equal?": (lambda a, b: a == b, 2),
}


@dataclass(frozen=True)
class Rule:
    id: str
    kind: str
    variables: tuple[RuleVariable, ...]
    predicates: tuple[Predicate, ...]
    action: Union[tuple, NeededAction] = ()
    _index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {v.name: i for i, v in enumerate(self.variables)})

    def var_index(self, name: str) -> int:
        return self._index[name]

    def variable(self, name: str) -> RuleVariable:
        return self.variables[self._index[name]]

    def start(self) -> "Match":
        return Match(self, (None,) * len(self.variables))


@dataclass(frozen=True)
class Match:
    """A rule with some of its variables bound; never mutated."""

    rule: Rule
    values: tuple

    @property
    def complete(self) -> bool:
        return all(v is not None for v in self.values)

    def get(self, name: str) -> Optional[int]:
        return self.values[self.rule.var_index(name)]

    def value(self, term) -> Optional[int]:
        if isinstance(term, Const):
            return term.id
        return self.values[self.rule.var_index(term.name)]

    def bind(self, name: str, eid: int) -> "Match":
        vals = list(self.values)
        vals[self.rule.var_index(name)] = eid
        return Match(self.rule, tuple(vals))

    def items(self):
        return [(v.name, self.values[i]) for i, v in enumerate(self.rule.variables)]


# -- validation ------------------------------------------------------------------


def _vars_in(obj) -> set[str]:
    if isinstance(obj, Var):
        return {obj.name}
    if isinstance(obj, (Compute, Assertion)):
        return set().union(*(_vars_in(a) for a in obj.args)) if obj.args else set()
    if isinstance(obj, When):
        return _vars_in(obj.test).union(*(_vars_in(f) for f in obj.body))
    if isinstance(obj, NeededAction):
        return _vars_in(obj.compute) | {obj.owner.name}
    if isinstance(obj, tuple):
        return set().union(*(_vars_in(f) for f in obj)) if obj else set()
    return set()


def _check_compute(c: Compute) -> None:
    if c.op not in BUILTINS:
        raise RuleError("bad-action-shape", f"unknown computation {c.op}")
    if len(c.args) != BUILTINS[c.op][1]:
        raise RuleError("bad-action-shape", f"{c.op} takes {BUILTINS[c.op][1]} arguments")
    for a in c.args:
        if isinstance(a, Compute):
            _check_compute(a)


def _check_body(body) -> None:
    for form in body:
        if isinstance(form, When):
            _check_compute(form.test)
            _check_body(form.body)
        elif isinstance(form, Assertion):
            if form.op == "call":
                if not form.args or not isinstance(form.args[0], str):
                    raise RuleError("bad-action-shape", "call needs a hook name")
            elif form.op not in ASSERTION_ARITY:
                raise RuleError("bad-action-shape", f"unknown assertion {form.op}")
            elif len(form.args) != ASSERTION_ARITY[form.op]:
                raise RuleError("bad-action-shape", f"{form.op} takes {ASSERTION_ARITY[form.op]} arguments")
            for a in form.args:
                if isinstance(a, Compute):
                    _check_compute(a)
        else:
            raise RuleError("bad-action-shape", f"not an action form: {form!r}")


def _connected(rule: Rule) -> bool:
    def key(t):
        return ("v", t.name) if isinstance(t, Var) else ("c", t.id)

    vertices = set()
    adj: dict = {}
    for p in rule.predicates:
        a, b = key(p.x), key(p.z)
        vertices |= {a, b}
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    if rule.kind == IF_NEEDED:
        vertices.add(("v", rule.action.owner.name))
    if len(vertices) <= 1:
        return True
    start = next(iter(sorted(vertices)))
    seen, work = {start}, [start]
    while work:
        for nxt in adj.get(work.pop(), ()):
            if nxt not in seen:
                seen.add(nxt)
                work.append(nxt)
    return seen == vertices


def validate_rule(rule: Rule, kb: KnowledgeBase) -> None:
    """Raise :class:`RuleError` unless the rule is well formed."""
    names = [v.name for v in rule.variables]
    if len(set(names)) != len(names):
        raise RuleError("duplicate-variable", f"rule {rule.id} declares a variable twice")
    if rule.kind not in (IF_ADDED, IF_NEEDED):
        raise RuleError("bad-rule-kind", rule.kind)
    for v in rule.variables:
        if v.superior is not None and v.superior not in kb.elements:
            raise RuleError("unknown-element", f"type constraint #{v.superior}")
    used = set()
    for p in rule.predicates:
        y = kb.elements.get(p.y)
        if y is None or not (y.is_role or y.kind is Kind.RELATION):
            raise RuleError("y-not-role-or-relation",
                            f"{kb.label(p.y) if y else p.y} is neither a role nor a relation")
        for t in (p.x, p.z):
            if isinstance(t, Var):
                if t.name not in rule._index:
                    raise RuleError("unknown-variable", f"{t.name} is not declared")
                used.add(t.name)
            elif t.id not in kb.elements:
                raise RuleError("unknown-element", f"#{t.id}")

    if rule.kind == IF_NEEDED:
        act = rule.action
        if not isinstance(act, NeededAction):
            raise RuleError("bad-action-shape", "if-needed action must be (computation role owner)")
        if kb.elements.get(act.role) is None or kb.elements[act.role].kind is not Kind.INDV_ROLE:
            raise RuleError("bad-action-shape", "if-needed action role must be an individual role")
        if act.owner.name not in rule._index:
            raise RuleError("bad-action-shape", f"owner {act.owner.name} is not a rule variable")
        if isinstance(act.compute, Compute):
            _check_compute(act.compute)
        used.add(act.owner.name)
    else:
        if not isinstance(rule.action, tuple):
            raise RuleError("bad-action-shape", "if-added action must be a list of forms")
        if not rule.predicates:
            raise RuleError("empty-rule", "an if-added rule needs at least one x-y-z predicate")
        _check_body(rule.action)

    unused = set(names) - used
    if unused:
        raise RuleError("unused-variable", f"{', '.join(sorted(unused))} appear in no predicate")
    stray = _vars_in(rule.action) - set(names)
    if stray:
        raise RuleError("unknown-variable", f"action uses undeclared {', '.join(sorted(stray))}")
    if not _connected(rule):
        raise RuleError("disconnected-predicates", f"rule {rule.id}: predicate graph is not connected")


# -- predicate evaluation ----------------------------------------------------------


def mark_candidates(kb: KnowledgeBase, pred: Predicate, match: Match, m) -> str:
    """Mark every E satisfying ``pred`` with E at its single unbound end.

    Returns the name of the open variable.
    """
    x, z = match.value(pred.x), match.value(pred.z)
    is_role = kb.elements[pred.y].is_role
    if x is not None and z is None:
        pattern = isinstance(pred.x, Const)
        if is_role:
            markers.mark_role_owners(kb, pred.y, x, m, pattern=pattern)
        else:
            markers.mark_rel_b(kb, pred.y, x, m, pattern=pattern)
        return pred.z.name
    if z is not None and x is None:
        pattern = isinstance(pred.z, Const)
        if is_role:
            markers.mark_role_fillers(kb, pred.y, z, m, pattern=pattern)
        else:
            markers.mark_rel_a(kb, pred.y, z, m, pattern=pattern)
        return pred.x.name
    raise RuleError("no-checkable-predicate", "predicate needs exactly one bound end")


def predicate_holds(kb: KnowledgeBase, pred: Predicate, match: Match) -> bool:
    x, z = match.value(pred.x), match.value(pred.z)
    xp, zp = isinstance(pred.x, Const), isinstance(pred.z, Const)
    if kb.elements[pred.y].is_role:
        return bool(markers.role_links(kb, pred.y, filler=x, owner=z,
                                       filler_pattern=xp, owner_pattern=zp))
    return bool(markers.statements(kb, pred.y, a=x, b=z, a_pattern=xp, b_pattern=zp))


def substitute(kb: KnowledgeBase, match: Match, name: str, eid: int) -> Optional[Match]:
    """Bind ``name`` to ``eid``; None when the binding violates the rule."""
    current = match.get(name)
    if current is not None:
        return match if current == eid else None
    var = match.rule.variable(name)
    if not kb.visible(eid):
        return None
    if var.proper and not kb.elements[eid].proper:
        return None
    if var.superior is not None and not kb.is_x_a_y(eid, var.superior):
        return None
    new = match.bind(name, eid)
    for p in match.rule.predicates:
        touches = (isinstance(p.x, Var) and p.x.name == name) or (isinstance(p.z, Var) and p.z.name == name)
        if touches and new.value(p.x) is not None and new.value(p.z) is not None:
            if not predicate_holds(kb, p, new):
                return None
    return new


def ground_predicates_hold(kb: KnowledgeBase, rule: Rule) -> bool:
    m = rule.start()
    return all(predicate_holds(kb, p, m) for p in rule.predicates
               if isinstance(p.x, Const) and isinstance(p.z, Const))


# -- actions -------------------------------------------------------------------------


def _payload(kb: KnowledgeBase, eid: int):
    p = kb.elements[eid].payload
    if p is None:
        raise ActionError(message=f"{kb.label(eid)} carries no value")
    return p


def _evaluate(kb: KnowledgeBase, term, match: Match):
    """Resolve a term to an element id or, for computations, a raw value."""
    if isinstance(term, Var):
        v = match.get(term.name)
        if v is None:
            raise ActionError("unbound-variable", f"{term.name} is unbound")
        return v
    if isinstance(term, Const):
        return term.id
    if isinstance(term, Num):
        return term
    if isinstance(term, Compute):
        fn, _ = BUILTINS[term.op]
        args = []
        for a in term.args:
            val = _evaluate(kb, a, match)
            if isinstance(val, Num):
                args.append(val.value)
            else:
                args.append(_payload(kb, val))
        try:
            return Num(fn(*args))
        except TypeError as exc:
            raise ActionError(message=f"{term.op}: {exc}") from None
    if isinstance(term, str):
        return term
    raise ActionError("bad-term", repr(term))


def _plan(kb: KnowledgeBase, body, match: Match, out: list) -> None:
    """Evaluate every term first so a failing computation leaves the KB untouched."""
    for form in body:
        if isinstance(form, When):
            test = _evaluate(kb, form.test, match)
            if test.value:
                _plan(kb, form.body, match, out)
        else:
            out.append((form.op, [_evaluate(kb, a, match) for a in form.args]))


def _as_element(kb: KnowledgeBase, val) -> int:
    if isinstance(val, Num):
        return kb.value_node(val.value)
    return val


def fire_action(kb: KnowledgeBase, match: Match, target_role: Optional[int] = None) -> list[int]:
    """Run the rule's action for a complete match; returns created/affected ids.

    For if-needed rules the returned list holds the filler element first.
    """
    if not match.complete:
        raise RuleError("incomplete-bindings", f"rule {match.rule.id} still has unbound variables")
    rule = match.rule
    if rule.kind == IF_NEEDED:
        act = rule.action
        val = _evaluate(kb, act.compute, match)
        owner = match.get(act.owner.name)
        try:
            filler = _as_element(kb, val)
            kb.x_is_the_y_of_z(filler, target_role if target_role is not None else act.role, owner)
        except KBError as exc:
            raise ActionError(message=str(exc)) from None
        return [filler]

    steps: list = []
    _plan(kb, rule.action, match, steps)
    created = []
    for op, args in steps:
        try:
            if op == "call":
                name, *rest = args
                hook = kb.hooks.get(name)
                if hook is None:
                    raise ActionError("unknown-hook", name)
                hook(kb, *[a.value if isinstance(a, Num) else a for a in rest])
                continue
            els = [_as_element(kb, a) for a in args]
            if op == "new-is-a":
                created.append(kb.add_is_a(*els))
            elif op == "new-eq":
                created.append(kb.add_eq(*els))
            elif op in ("x-is-a-y-of-z", "x-is-the-y-of-z"):
                created.append(kb.x_is_a_y_of_z(*els))
            elif op == "new-statement":
                created.append(kb.new_statement(*els))
        except KBError as exc:
            raise ActionError(message=str(exc)) from None
    return created

"""Rule triggers, link events, the recursive rule check and the fire queue."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

from . import markers
from .errors import ActionError, ChainDepthExceeded, RuleError
from .kb import TRIGGER_KEY, Kind
from .rules import (IF_ADDED, IF_NEEDED, Const, Match, Rule, Var, fire_action,
                    ground_predicates_hold, mark_candidates, substitute, validate_rule)

if TYPE_CHECKING:
    from .kb import KnowledgeBase

log = logging.getLogger(__name__)

ISA = "isa"
XYZ = "xyz"
NEEDED = "if-needed"


@dataclass(frozen=True)
class Trigger:
    """``(R X)``, ``(R X Z)`` or ``(R Z)`` attached to an element."""

    kind: str
    rule: str
    x: object = None
    z: object = None

    def terms(self) -> list:
        return [t for t in (self.x, self.z) if t is not None]

    def describe(self, kb: KnowledgeBase) -> str:
        parts = [self.rule]
        for t in self.terms():
            parts.append(t.name if isinstance(t, Var) else kb.label(t.id))
        return "(" + " ".join(parts) + ")"


class TriggerEngine:
    def __init__(self, kb: KnowledgeBase, max_chain_depth: int = 1000):
        self.kb = kb
        self.max_chain_depth = max_chain_depth
        self.rules: dict[str, Rule] = {}
        self.fired: list[tuple[str, tuple]] = []
        self.last_firings = 0
        self._pending: deque[int] = deque()
        self._queue: deque[Match] = deque()
        self._queued: set = set()
        self._done: set = set()
        self._busy = False

    # -- installation ----------------------------------------------------------

    def next_rule_id(self) -> str:
        n = len(self.rules) + 1
        while f"R{n}" in self.rules:
            n += 1
        return f"R{n}"

    def _attach(self, eid: int, trig: Trigger) -> None:
        self.kb.elements[eid].properties.setdefault(TRIGGER_KEY, []).append(trig)

    def install_rule(self, rule: Rule) -> None:
        if rule.id in self.rules:
            raise RuleError("duplicate-rule-id", f"rule {rule.id} already installed")
        validate_rule(rule, self.kb)
        self.rules[rule.id] = rule
        if rule.kind == IF_NEEDED:
            self._attach(rule.action.role, Trigger(NEEDED, rule.id, z=rule.action.owner))
            return
        for v in rule.variables:
            if v.superior is not None:
                self._attach(v.superior, Trigger(ISA, rule.id, x=Var(v.name)))
        for p in rule.predicates:
            self._attach(p.y, Trigger(XYZ, rule.id, x=p.x, z=p.z))

    # -- event handling ----------------------------------------------------------

    def notify_link(self, lid: int) -> int:
        """Entry point for every new link; returns the number of firings."""
        if not self.rules:
            return 0
        self._pending.append(lid)
        if self._busy:
            return 0
        return self._drain()

    def _drain(self) -> int:
        fired = 0
        self._busy = True
        try:
            while self._pending or self._queue:
                if self._pending:
                    self._on_link(self._pending.popleft())
                    continue
                match = self._queue.popleft()
                fired += 1
                if fired > self.max_chain_depth:
                    raise ChainDepthExceeded(
                        "chain-depth-exceeded",
                        f"more than {self.max_chain_depth} firings from one change")
                self._fire(match)
        finally:
            self._pending.clear()
            self._queue.clear()
            self._queued.clear()
            self._busy = False
            self.last_firings = fired
        return fired

    def _triggers_above(self, start: int, kinds) -> list[tuple[int, Trigger]]:
        """Triggers on ``start`` and its superiors, bottom-up in upscan order."""
        kb = self.kb
        with kb.pool.pair() as m:
            order = markers.upscan(kb, start, m)
        found = []
        for eid in order:
            for trig in kb.elements[eid].properties.get(TRIGGER_KEY, ()):
                if trig.kind in kinds and trig.rule in self.rules:
                    found.append((eid, trig))
        return found

    def _on_link(self, lid: int) -> None:
        kb = self.kb
        link = kb.elements[lid]
        if not kb.visible(lid):
            return
        if link.kind is Kind.IS_A:
            self._isa_event(link.a, link.b)
            if kb.is_filler_link(lid):
                self._xyz_event(link.a, link.b, kb.elements[link.b].owner)
        elif link.kind is Kind.EQ:
            self._isa_event(link.a, link.b)
            self._isa_event(link.b, link.a)
        elif link.kind is Kind.STATEMENT:
            self._xyz_event(link.a, link.rel, link.b)

    def _activate(self, eid: int, trig: Trigger) -> None:
        self.kb.stats.trigger_activations += 1
        self.kb.trace(f"TRIGGER {trig.kind} {self.kb.label(eid)} {trig.describe(self.kb)}")

    def _bind(self, match: Optional[Match], term, value: int) -> Optional[Match]:
        if match is None or not isinstance(term, Var):
            return match
        new = substitute(self.kb, match, term.name, value)
        if new is None:
            self.kb.stats.subst_failures += 1
            self.kb.trace(f"SUBST-FAIL {match.rule.id} {term.name} {self.kb.label(value)}")
        return new

    def _isa_event(self, a: int, b: int) -> None:
        for eid, trig in self._triggers_above(b, (ISA,)):
            self._activate(eid, trig)
            rule = self.rules[trig.rule]
            match = self._bind(rule.start(), trig.x, a)
            if match is not None:
                self.check_rule(match)

    def _xyz_event(self, a: int, y: int, c: int) -> None:
        kb = self.kb
        for eid, trig in self._triggers_above(y, (XYZ,)):
            # constants are screened before the trigger counts as activated
            if isinstance(trig.x, Const) and not kb.is_x_a_y(a, trig.x.id):
                continue
            if isinstance(trig.z, Const) and not kb.is_x_a_y(c, trig.z.id):
                continue
            self._activate(eid, trig)
            rule = self.rules[trig.rule]
            match = self._bind(rule.start(), trig.x, a)
            match = self._bind(match, trig.z, c)
            if match is not None:
                self.check_rule(match)

    # -- rule checking -------------------------------------------------------------

    def check_rule(self, match: Match, depth: int = 0, sink: Optional[list] = None) -> None:
        """Extend ``match`` to every complete binding; each goes to ``sink`` or the fire queue."""
        kb = self.kb
        rule = match.rule
        kb.stats.rule_checks += 1
        if depth > kb.stats.max_check_depth.get(rule.id, 0):
            kb.stats.max_check_depth[rule.id] = depth
        if match.complete:
            if ground_predicates_hold(kb, rule):
                if sink is not None:
                    sink.append(match)
                else:
                    self._enqueue(match)
            return
        pred = None
        for p in rule.predicates:
            if (match.value(p.x) is None) != (match.value(p.z) is None):
                pred = p
                break
        if pred is None:
            raise RuleError("no-checkable-predicate", f"rule {rule.id}: no predicate has one bound end")
        with kb.pool.pair() as m:
            var = mark_candidates(kb, pred, match, m)
            if rule.variable(var).proper:
                markers.restrict_to_proper(kb, m)
            for e in kb.pool.marked(m.bit):
                new = self._bind(match, Var(var), e)
                if new is not None:
                    self.check_rule(new, depth + 1, sink)

    def _key(self, match: Match) -> tuple:
        return (match.rule.id, match.values, self.kb.active_context)

    def _enqueue(self, match: Match) -> None:
        key = self._key(match)
        if key in self._done or key in self._queued:
            return
        self._queued.add(key)
        self._queue.append(match)

    def _trace_fire(self, match: Match) -> None:
        kb = self.kb
        binds = " ".join(f"{n}={kb.label(v)}" for n, v in match.items())
        kb.trace(f"FIRE {match.rule.id} {{{binds}}}")

    def _fire(self, match: Match, target_role: Optional[int] = None) -> list[int]:
        kb = self.kb
        key = self._key(match)
        self._queued.discard(key)
        self._done.add(key)
        kb.stats.firings += 1
        self.fired.append((match.rule.id, match.values))
        self._trace_fire(match)
        try:
            return fire_action(kb, match, target_role)
        except ActionError as exc:
            kb.stats.action_errors += 1
            log.warning("rule %s skipped: %s", match.rule.id, exc)
            return []

    # -- lazy values ---------------------------------------------------------------

    def request_value(self, role: int, owner: int) -> Optional[int]:
        """The filler of "the role of owner", computing it with if-needed rules when absent."""
        kb = self.kb
        found = kb.lookup_the_y_of_z(role, owner)
        if found is not None or not self.rules:
            return found
        for eid, trig in self._triggers_above(role, (NEEDED,)):
            self._activate(eid, trig)
            rule = self.rules[trig.rule]
            match = self._bind(rule.start(), trig.z, owner)
            if match is None:
                continue
            results: list[Match] = []
            self.check_rule(match, sink=results)
            if not results:
                continue
            # only the first satisfied binding is used for one request
            created = self._run_needed(results[0], role)
            if created:
                return created[0]
            break
        return kb.lookup_the_y_of_z(role, owner)

    def _run_needed(self, match: Match, role: int) -> list[int]:
        if self._busy:
            return self._fire(match, role)
        self._busy = True
        try:
            created = self._fire(match, role)
        finally:
            self._busy = False
        if self._pending:
            self._drain()
        return created

    # -- maintenance -----------------------------------------------------------------

    def recheck_rule(self, rule_id: str) -> int:
        """Sweep existing knowledge for an if-added rule installed after the fact."""
        kb = self.kb
        rule = self.rules.get(rule_id)
        if rule is None:
            raise RuleError("unknown-rule", rule_id)
        if rule.kind != IF_ADDED:
            return 0
        pred = rule.predicates[0]
        term = pred.x if isinstance(pred.x, Var) else pred.z
        if not isinstance(term, Var):
            return 0
        candidates = [e.id for e in kb.elements.values() if not e.is_link and kb.visible(e.id)]
        self._busy = True
        try:
            for e in sorted(candidates):
                match = substitute(kb, rule.start(), term.name, e)
                if match is not None:
                    self.check_rule(match)
        except BaseException:
            self._queue.clear()
            self._queued.clear()
            self._busy = False
            raise
        self._busy = False
        return self._drain() if self._queue or self._pending else 0

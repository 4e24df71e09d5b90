"""The .kdef definition language: reader, printer and evaluator."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

from .errors import EvalError, ParseError, ScoreError
from .kb import KnowledgeBase
from .rules import (ASSERTION_ARITY, BUILTINS, IF_ADDED, IF_NEEDED, Assertion, Compute,
                    Const, NeededAction, Num, Predicate, Rule, RuleVariable, Var, When)

FIXTURES = Path(__file__).parent / "fixtures"


@dataclass(frozen=True)
class SourceLocation:
    file: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Symbol:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Keyword:
    name: str


@dataclass(frozen=True)
class ElementRef:
    name: str
    loc: Optional[SourceLocation] = field(default=None, compare=False, repr=False)


class Form(list):
    """A parenthesised list; ``loc`` points at its opening paren."""

    def __init__(self, items=(), loc: Optional[SourceLocation] = None):
        super().__init__(items)
        self.loc = loc

    @property
    def head(self):
        return self[0] if self else None


Atom = Union[Symbol, Keyword, ElementRef, str, int]

_INT = re.compile(r"[+-]?\d+\Z")
_DELIMS = set("(){}\";") | {" ", "\t", "\n", "\r"}


def parse(text: str, filename: str = "<input>") -> list:
    """Read every top-level datum in ``text``."""
    out: list = []
    stack: list[Form] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def here() -> SourceLocation:
        return SourceLocation(filename, line, col)

    def emit(obj) -> None:
        (stack[-1] if stack else out).append(obj)

    def advance(k: int) -> None:
        nonlocal i, line, col
        for ch in text[i:i + k]:
            if ch == "\n":
                line, col = line + 1, 1
            else:
                col += 1
        i += k

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance(1)
        elif ch == ";":
            j = text.find("\n", i)
            advance((n if j < 0 else j) - i)
        elif ch == "(":
            stack.append(Form(loc=here()))
            advance(1)
        elif ch == ")":
            if not stack:
                raise ParseError("unbalanced-parens", "unexpected )", here())
            form = stack.pop()
            advance(1)
            emit(form)
        elif ch == "{":
            start = here()
            j = text.find("}", i + 1)
            if j < 0:
                raise ParseError("unterminated-brace", "element name never closed", start)
            name = text[i + 1:j]
            if not name.strip() or "{" in name:
                raise ParseError("bad-atom", f"bad element name {{{name}}}", start)
            advance(j + 1 - i)
            emit(ElementRef(name, start))
        elif ch == "}":
            raise ParseError("bad-atom", "unexpected }", here())
        elif ch == '"':
            start = here()
            buf, j = [], i + 1
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    j += 1
                buf.append(text[j])
                j += 1
            if j >= n:
                raise ParseError("bad-atom", "unterminated string", start)
            advance(j + 1 - i)
            emit("".join(buf))
        else:
            start = here()
            j = i
            while j < n and text[j] not in _DELIMS:
                j += 1
            tok = text[i:j]
            advance(j - i)
            emit(_atom(tok, start))
    if stack:
        raise ParseError("unbalanced-parens", "form is never closed", stack[-1].loc)
    return out


def _atom(tok: str, loc: SourceLocation) -> Atom:
    if _INT.match(tok):
        return int(tok)
    if tok.startswith(":"):
        if len(tok) == 1:
            raise ParseError("bad-atom", "empty keyword", loc)
        return Keyword(tok[1:].lower())
    if "'" in tok or "`" in tok or "," in tok:
        raise ParseError("bad-atom", f"unsupported token {tok!r}", loc)
    return Symbol(tok.lower())


def to_text(obj) -> str:
    """Print a datum so that :func:`parse` reads it back unchanged."""
    if isinstance(obj, Form):
        return "(" + " ".join(to_text(x) for x in obj) + ")"
    if isinstance(obj, Symbol):
        return obj.name
    if isinstance(obj, Keyword):
        return ":" + obj.name
    if isinstance(obj, ElementRef):
        return "{" + obj.name + "}"
    if isinstance(obj, bool):
        return "t" if obj else "nil"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise TypeError(f"cannot print {obj!r}")


def needs_more(text: str) -> bool:
    """True while ``text`` has an unclosed paren (used for REPL continuation)."""
    try:
        parse(text)
    except ParseError as exc:
        return exc.code == "unbalanced-parens" and exc.message == "form is never closed"
    return False


# -- evaluation ------------------------------------------------------------------


@dataclass
class LoadSummary:
    forms_evaluated: int = 0
    rules_installed: int = 0
    firings: int = 0


@dataclass(frozen=True)
class Elem:
    """Evaluation result that names an element (as opposed to a boolean)."""

    id: int


NIL = None


class Interpreter:
    def __init__(self, kb: Optional[KnowledgeBase] = None):
        self.kb = kb if kb is not None else KnowledgeBase()
        self._heads: dict[str, Callable] = {
            "new-type": self._new_type,
            "new-indv": self._new_indv,
            "new-is-a": lambda f: Elem(self.kb.add_is_a(self._el(f, 1), self._el(f, 2))),
            "new-eq": lambda f: Elem(self.kb.add_eq(self._el(f, 1), self._el(f, 2))),
            "new-cancel": lambda f: Elem(self.kb.add_cancel(self._el(f, 1), self._el(f, 2))),
            "new-is-not-a": lambda f: Elem(self.kb.add_cancel(self._el(f, 1), self._el(f, 2))),
            "new-type-role": lambda f: self._new_role(f, self.kb.new_type_role),
            "new-indv-role": lambda f: self._new_role(f, self.kb.new_indv_role),
            "new-relation": self._new_relation,
            "new-statement": lambda f: Elem(self.kb.new_statement(
                self._el(f, 1), self._el(f, 2), self._el(f, 3))),
            "x-is-a-y-of-z": lambda f: Elem(self.kb.x_is_a_y_of_z(*self._els(f, 3))),
            "x-is-the-y-of-z": lambda f: Elem(self.kb.x_is_the_y_of_z(*self._els(f, 3))),
            "the-x-of-y": self._the_x_of_y,
            "is-x-a-y?": lambda f: self.kb.is_x_a_y(*self._els(f, 2)),
            "simple-is-x-a-y?": lambda f: self.kb.is_x_a_y(*self._els(f, 2)),
            "is-x-eq-y?": lambda f: self.kb.is_x_eq_y(*self._els(f, 2)),
            "assert": self._assert,
            "new-context": self._new_context,
            "in-context": self._in_context,
            "new-if-added-rule": lambda f: self._new_rule(f, IF_ADDED),
            "new-if-needed-rule": lambda f: self._new_rule(f, IF_NEEDED),
            "recheck-rule": self._recheck,
        }

    # -- plumbing --

    def _arity(self, f: Form, lo: int, hi: Optional[int] = None) -> None:
        hi = lo if hi is None else hi
        n = len(f) - 1
        if not lo <= n <= hi:
            want = str(lo) if lo == hi else f"{lo}-{hi}"
            raise EvalError("arity-error", f"{f.head} takes {want} arguments, got {n}", f.loc)

    def _split(self, f: Form, start: int) -> tuple[list, dict]:
        pos, opts = [], {}
        items = list(f[start:])
        k = 0
        while k < len(items):
            if isinstance(items[k], Keyword):
                if k + 1 >= len(items):
                    raise EvalError("arity-error", f":{items[k].name} needs a value", f.loc)
                opts[items[k].name] = items[k + 1]
                k += 2
            else:
                pos.append(items[k])
                k += 1
        return pos, opts

    def resolve(self, datum, loc=None) -> int:
        """Element id for ``datum``; numeric names create number nodes."""
        if isinstance(datum, Form):
            val = self.eval_form(datum)
            if isinstance(val, Elem):
                return val.id
            raise EvalError("unresolved-element-ref", f"{to_text(datum)} yields no element", datum.loc)
        if isinstance(datum, ElementRef):
            if self.kb.has_name(datum.name):
                return self.kb.id_of(datum.name)
            if _INT.match(datum.name):
                return self.kb.number_node(int(datum.name))
            raise EvalError("unresolved-element-ref", f"{{{datum.name}}} is not defined",
                            datum.loc or loc)
        raise EvalError("bad-argument", f"expected an element, got {to_text(datum)}", loc)

    def _el(self, f: Form, k: int) -> int:
        if k >= len(f):
            raise EvalError("arity-error", f"{f.head} is missing argument {k}", f.loc)
        return self.resolve(f[k], f.loc)

    def _els(self, f: Form, n: int) -> list[int]:
        self._arity(f, n)
        return [self._el(f, k) for k in range(1, n + 1)]

    def _name(self, f: Form, k: int) -> str:
        if k >= len(f) or not isinstance(f[k], ElementRef):
            raise EvalError("bad-argument", f"{f.head} needs a {{name}} as argument {k}", f.loc)
        return f[k].name

    # -- heads --

    def _new_type(self, f: Form) -> Elem:
        self._arity(f, 1, 2)
        parent = self._el(f, 2) if len(f) > 2 else self.kb.thing
        return Elem(self.kb.new_type(self._name(f, 1), parent))

    def _new_indv(self, f: Form) -> Elem:
        pos, opts = self._split(f, 1)
        if not 1 <= len(pos) <= 2:
            raise EvalError("arity-error", "new-indv takes a name and an optional parent", f.loc)
        if not isinstance(pos[0], ElementRef):
            raise EvalError("bad-argument", "new-indv needs a {name}", f.loc)
        parent = self.resolve(pos[1], f.loc) if len(pos) > 1 else self.kb.thing
        value = opts.get("value")
        if value is not None and not isinstance(value, (int, str)):
            raise EvalError("bad-argument", ":value must be an integer or string", f.loc)
        proper = opts.get("proper", Symbol("t")) != Symbol("nil")
        return Elem(self.kb.new_indv(pos[0].name, parent, payload=value, proper=proper))

    def _new_role(self, f: Form, make) -> Elem:
        self._arity(f, 2, 3)
        parent = self._el(f, 3) if len(f) > 3 else self.kb.thing
        return Elem(make(self._name(f, 1), self._el(f, 2), parent))

    def _new_relation(self, f: Form) -> Elem:
        self._arity(f, 1, 3)
        a = self._el(f, 2) if len(f) > 2 else self.kb.thing
        b = self._el(f, 3) if len(f) > 3 else self.kb.thing
        return Elem(self.kb.new_relation(self._name(f, 1), a, b))

    def _the_x_of_y(self, f: Form):
        role, owner = self._els(f, 2)
        found = self.kb.the_x_of_y(role, owner)
        return NIL if found is None else Elem(found)

    def _assert(self, f: Form) -> bool:
        self._arity(f, 1)
        if not isinstance(f[1], Form):
            raise EvalError("bad-argument", "assert needs a form", f.loc)
        if not self.eval_form(f[1]):
            raise EvalError("assertion-failed", to_text(f[1]), f.loc)
        return True

    def _new_context(self, f: Form) -> Elem:
        self._arity(f, 1, 2)
        parent = self._el(f, 2) if len(f) > 2 else self.kb.general
        return Elem(self.kb.new_context(self._name(f, 1), parent))

    def _in_context(self, f: Form) -> Elem:
        (ctx,) = self._els(f, 1)
        self.kb.activate_context(ctx)
        return Elem(ctx)

    def _recheck(self, f: Form) -> int:
        self._arity(f, 1)
        return self.kb.engine.recheck_rule(str(f[1]).upper())

    # -- rules --

    def _bindings(self, bindings, loc) -> list[RuleVariable]:
        if not isinstance(bindings, Form):
            raise EvalError("bad-rule", "bindings must be a list", loc)
        out = []
        for b in bindings:
            if isinstance(b, Symbol):
                out.append(RuleVariable(b.name))
                continue
            if not isinstance(b, Form) or not b or not isinstance(b[0], Symbol):
                raise EvalError("bad-rule", f"bad binding {to_text(b)}", loc)
            _, opts = self._split(b, 1)
            unknown = set(opts) - {"superior", "proper"}
            if unknown:
                raise EvalError("bad-rule", f"unknown binding option :{sorted(unknown)[0]}", loc)
            sup = self.resolve(opts["superior"], loc) if "superior" in opts else None
            proper = opts.get("proper", Symbol("nil")) != Symbol("nil")
            out.append(RuleVariable(b[0].name, sup, proper))
        return out

    def _term(self, datum, loc):
        if isinstance(datum, Symbol):
            return Var(datum.name)
        return Const(self.resolve(datum, loc))

    def _arg(self, datum, loc):
        if isinstance(datum, Symbol):
            return Var(datum.name)
        if isinstance(datum, bool):
            raise EvalError("bad-argument", "booleans are not action arguments", loc)
        if isinstance(datum, int):
            return Num(datum)
        if isinstance(datum, str):
            return datum
        if isinstance(datum, Form) and isinstance(datum.head, Symbol) and datum.head.name in BUILTINS:
            return Compute(datum.head.name, tuple(self._arg(a, loc) for a in datum[1:]))
        if isinstance(datum, ElementRef):
            return Const(self.resolve(datum, loc))
        raise EvalError("bad-action-shape", f"unsupported action argument {to_text(datum)}", loc)

    def _body_form(self, datum, loc):
        if not isinstance(datum, Form) or not isinstance(datum.head, Symbol):
            raise EvalError("bad-action-shape", f"bad action form {to_text(datum)}", loc)
        head = datum.head.name
        if head == "when":
            if len(datum) < 2:
                raise EvalError("bad-action-shape", "when needs a test", loc)
            test = self._arg(datum[1], loc)
            if not isinstance(test, Compute):
                raise EvalError("bad-action-shape", "when test must be a computation", loc)
            return When(test, tuple(self._body_form(x, loc) for x in datum[2:]))
        if head == "call":
            if len(datum) < 2:
                raise EvalError("bad-action-shape", "call needs a hook name", loc)
            hook = datum[1].name if isinstance(datum[1], Symbol) else datum[1]
            return Assertion("call", (hook,) + tuple(self._arg(a, loc) for a in datum[2:]))
        if head in ASSERTION_ARITY:
            return Assertion(head, tuple(self._arg(a, loc) for a in datum[1:]))
        raise EvalError("bad-action-shape", f"unknown action {head}", loc)

    def _new_rule(self, f: Form, kind: str) -> str:
        if len(f) < 3:
            raise EvalError("arity-error", f"{f.head} needs bindings and predicates", f.loc)
        if kind == IF_NEEDED:
            self._arity(f, 3)
        variables = self._bindings(f[1], f.loc)
        if not isinstance(f[2], Form):
            raise EvalError("bad-rule", "predicates must be a list", f.loc)
        preds = []
        for p in f[2]:
            if not isinstance(p, Form) or len(p) != 3:
                raise EvalError("bad-rule", f"predicate {to_text(p)} is not (X Y Z)", f.loc)
            preds.append(Predicate(self._term(p[0], f.loc), self.resolve(p[1], f.loc),
                                   self._term(p[2], f.loc)))
        if kind == IF_NEEDED:
            act = f[3]
            if not isinstance(act, Form) or len(act) != 3 or not isinstance(act[2], Symbol):
                raise EvalError("bad-action-shape", "if-needed action is (computation role owner)", f.loc)
            action = NeededAction(self._arg(act[0], f.loc), self.resolve(act[1], f.loc), Var(act[2].name))
        else:
            action = tuple(self._body_form(x, f.loc) for x in f[3:])
        rule = Rule(self.kb.engine.next_rule_id(), kind, tuple(variables), tuple(preds), action)
        self.kb.install_rule(rule)
        return rule.id

    # -- entry points --

    def eval_form(self, datum):
        """Evaluate one datum; returns an :class:`Elem`, a bool, a rule id or NIL."""
        if isinstance(datum, ElementRef):
            return Elem(self.resolve(datum))
        if not isinstance(datum, Form):
            raise EvalError("bad-form", f"cannot evaluate {to_text(datum)}")
        if not datum or not isinstance(datum.head, Symbol):
            raise EvalError("unknown-head", f"{to_text(datum)} has no operator", datum.loc)
        fn = self._heads.get(datum.head.name)
        if fn is None:
            raise EvalError("unknown-head", f"unknown operator {datum.head.name}", datum.loc)
        try:
            return fn(datum)
        except EvalError as exc:
            if exc.loc is None:
                exc.loc = datum.loc
            raise
        except ScoreError as exc:
            raise EvalError(exc.code, exc.message, datum.loc) from exc

    def render(self, value) -> str:
        if isinstance(value, Elem):
            return self.kb.label(value.id)
        if value is True:
            return "T"
        if value is None or value is False:
            return "NIL"
        return str(value)

    def load_text(self, text: str, filename: str = "<input>") -> LoadSummary:
        summary = LoadSummary()
        before_rules, before_fired = len(self.kb.rules), self.kb.stats.firings
        try:
            for datum in parse(text, filename):
                self.eval_form(datum)
                summary.forms_evaluated += 1
        finally:
            summary.rules_installed = len(self.kb.rules) - before_rules
            summary.firings = self.kb.stats.firings - before_fired
        return summary

    def load_file(self, path) -> LoadSummary:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise EvalError("io-error", f"cannot read {path}: {exc.strerror}",
                            SourceLocation(str(path), 0, 0)) from None
        return self.load_text(text, str(path))


def fixture_path(name: str) -> Path:
    """Path of a bundled fixture; ``name`` may omit the .kdef suffix."""
    stem = name[:-5] if name.endswith(".kdef") else name
    return FIXTURES / f"{stem}.kdef"

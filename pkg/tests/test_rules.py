import pytest

from score.errors import ActionError, RuleError
from score.kb import KnowledgeBase
from score.rules import (IF_ADDED, IF_NEEDED, Assertion, Compute, Const, NeededAction, Predicate,
                         Rule, RuleVariable, Var, fire_action, substitute, validate_rule)


@pytest.fixture
def family():
    kb = KnowledgeBase()
    kb.new_type("person")
    kb.new_indv_role("mother", "person", "person")
    kb.new_relation("likes", "person", "person")
    return kb


def rule(kb, variables, preds, action=(), kind=IF_ADDED):
    vs = tuple(v if isinstance(v, RuleVariable) else RuleVariable(v) for v in variables)
    ps = tuple(Predicate(Var(x) if isinstance(x, str) else x, kb.id_of(y),
                         Var(z) if isinstance(z, str) else z) for x, y, z in preds)
    return Rule("R1", kind, vs, ps, action)


def code_of(kb, r):
    with pytest.raises(RuleError) as exc:
        validate_rule(r, kb)
    return exc.value.code


def test_disconnected_mother_rule_is_rejected(family):
    r = rule(family, "abcd", [("a", "mother", "b"), ("c", "mother", "d")])
    assert code_of(family, r) == "disconnected-predicates"


def test_single_predicate_is_connected(family):
    validate_rule(rule(family, "ab", [("a", "mother", "b")]), family)


def test_shared_variable_connects(family):
    validate_rule(rule(family, "abc", [("a", "mother", "c"), ("b", "likes", "c")]), family)


def test_constant_can_connect_two_components(family):
    ann = Const(family.new_indv("Ann", "person"))
    validate_rule(rule(family, "ab", [("a", "mother", ann), (ann, "likes", "b")]), family)


def test_y_must_be_role_or_relation(family):
    r = rule(family, "ab", [("a", "person", "b")])
    assert code_of(family, r) == "y-not-role-or-relation"


def test_variable_errors(family):
    assert code_of(family, rule(family, "abc", [("a", "mother", "b")])) == "unused-variable"
    assert code_of(family, rule(family, "a", [("a", "mother", "z")])) == "unknown-variable"
    assert code_of(family, rule(family, "aa", [("a", "mother", "a")])) == "duplicate-variable"


def test_if_needed_action_shape(family):
    kb = family
    kb.new_type_role("child", "person", "person")
    ok = NeededAction(Var("a"), kb.id_of("mother"), Var("b"))
    validate_rule(rule(kb, "ab", [("a", "likes", "b")], ok, IF_NEEDED), kb)
    bad_role = NeededAction(Var("a"), kb.id_of("child"), Var("b"))
    assert code_of(kb, rule(kb, "ab", [("a", "likes", "b")], bad_role, IF_NEEDED)) == "bad-action-shape"
    bad_owner = NeededAction(Var("a"), kb.id_of("mother"), Var("q"))
    assert code_of(kb, rule(kb, "ab", [("a", "likes", "b")], bad_owner, IF_NEEDED)) == "bad-action-shape"
    assert code_of(kb, rule(kb, "ab", [("a", "likes", "b")], (), IF_NEEDED)) == "bad-action-shape"


def test_if_added_body_shape(family):
    bad = (Assertion("launch-missiles", (Var("a"),)),)
    assert code_of(family, rule(family, "ab", [("a", "likes", "b")], bad)) == "bad-action-shape"
    wrong_arity = (Assertion("new-is-a", (Var("a"),)),)
    assert code_of(family, rule(family, "ab", [("a", "likes", "b")], wrong_arity)) == "bad-action-shape"
    assert code_of(family, Rule("R1", IF_ADDED, (), (), ())) == "empty-rule"


@pytest.fixture
def travel():
    kb = KnowledgeBase()
    kb.new_type("traveling event")
    kb.new_type("vehicle")
    kb.new_type("airplane", "vehicle")
    kb.new_type("car", "vehicle")
    kb.new_indv_role("travel vehicle", "traveling event", "vehicle")
    kb.new_indv("my trip", "traveling event")
    kb.new_indv("my vehicle", "airplane")
    kb.new_indv("my car", "car")
    r = Rule("R1", IF_ADDED,
             (RuleVariable("a"), RuleVariable("b", kb.id_of("airplane"))),
             (Predicate(Var("b"), kb.id_of("travel vehicle"), Var("a")),), ())
    return kb, r


def test_substitute_checks_type_constraint(travel):
    kb, r = travel
    assert substitute(kb, r.start(), "b", kb.id_of("my vehicle")) is not None
    assert substitute(kb, r.start(), "b", kb.id_of("my car")) is None


def test_substitute_checks_bound_predicates(travel):
    kb, r = travel
    m = substitute(kb, r.start(), "a", kb.id_of("my trip"))
    assert substitute(kb, m, "b", kb.id_of("my vehicle")) is None
    kb.x_is_a_y_of_z("my vehicle", "travel vehicle", "my trip")
    done = substitute(kb, m, "b", kb.id_of("my vehicle"))
    assert done.complete and done.get("b") == kb.id_of("my vehicle")


def test_substitute_never_mutates(travel):
    kb, r = travel
    start = r.start()
    m = substitute(kb, start, "a", kb.id_of("my trip"))
    assert start.values == (None, None)
    assert m.values[0] == kb.id_of("my trip")


def test_proper_variable_rejects_type_node():
    kb = KnowledgeBase()
    kb.new_type("time")
    kb.new_type("meeting")
    kb.new_indv_role("start time", "meeting", "time")
    r = Rule("R1", IF_ADDED, (RuleVariable("a", proper=True), RuleVariable("c")),
             (Predicate(Var("a"), kb.id_of("start time"), Var("c")),), ())
    assert substitute(kb, r.start(), "a", kb.copy_of("start time", "meeting")) is None
    assert substitute(kb, r.start(), "a", kb.id_of("time")) is None


def _meeting_kb():
    kb = KnowledgeBase()
    kb.new_type("time")
    kb.new_indv("10:30 AM", "time", payload=630)
    kb.new_indv("11:30 AM", "time", payload=690)
    kb.new_type("span")
    kb.new_indv("1 hour", "span", payload=60)
    kb.new_type("meeting")
    kb.new_indv_role("start time", "meeting", "time")
    kb.new_indv_role("end time", "meeting", "time")
    kb.new_indv_role("duration", "meeting", "span")
    kb.new_indv("meeting 27", "meeting")
    r = Rule("R1", IF_ADDED,
             (RuleVariable("a", proper=True), RuleVariable("b", proper=True), RuleVariable("c")),
             (Predicate(Var("a"), kb.id_of("start time"), Var("c")),
              Predicate(Var("b"), kb.id_of("end time"), Var("c"))),
             (Assertion("x-is-the-y-of-z", (Compute("scone-subtract", (Var("b"), Var("a"))),
                                           Const(kb.id_of("duration")), Var("c"))),))
    return kb, r


def test_fire_action_asserts_duration():
    kb, r = _meeting_kb()
    m = r.start()
    for name, e in (("a", "10:30 AM"), ("b", "11:30 AM"), ("c", "meeting 27")):
        m = m.bind(name, kb.id_of(e))
    fire_action(kb, m)
    assert kb.lookup_the_y_of_z("duration", "meeting 27") == kb.id_of("1 hour")


def test_fire_action_with_unbound_variable():
    kb, r = _meeting_kb()
    with pytest.raises(RuleError):
        fire_action(kb, r.start().bind("a", kb.id_of("10:30 AM")))


def test_failed_computation_leaves_kb_unchanged():
    kb, r = _meeting_kb()
    kb.new_indv("sometime", "time")
    m = r.start().bind("a", kb.id_of("sometime")).bind("b", kb.id_of("11:30 AM"))
    m = m.bind("c", kb.id_of("meeting 27"))
    before = len(kb.elements)
    with pytest.raises(ActionError):
        fire_action(kb, m)
    assert len(kb.elements) == before


def test_epoch_subtraction():
    kb = KnowledgeBase()
    kb.new_type("meeting")
    kb.new_indv_role("start time", "meeting")
    kb.new_indv_role("end time", "meeting")
    kb.new_indv_role("duration", "meeting")
    kb.new_indv("my meeting", "meeting")
    r = Rule("R1", IF_NEEDED,
             (RuleVariable("a", proper=True), RuleVariable("b", proper=True), RuleVariable("c")),
             (Predicate(Var("a"), kb.id_of("start time"), Var("c")),
              Predicate(Var("b"), kb.id_of("end time"), Var("c"))),
             NeededAction(Compute("scone-subtract", (Var("b"), Var("a"))), kb.id_of("duration"), Var("c")))
    m = r.start().bind("a", kb.number_node(1609459200)).bind("b", kb.number_node(1609462800))
    m = m.bind("c", kb.id_of("my meeting"))
    (filler,) = fire_action(kb, m)
    assert kb[filler].payload == 1609462800 - 1609459200 == 3600
    assert kb.label(filler) == "{3600}"


def test_refiring_adds_no_links():
    kb, r = _meeting_kb()
    m = r.start()
    for name, e in (("a", "10:30 AM"), ("b", "11:30 AM"), ("c", "meeting 27")):
        m = m.bind(name, kb.id_of(e))
    fire_action(kb, m)
    n = len(kb.elements)
    fire_action(kb, m)
    assert len(kb.elements) == n

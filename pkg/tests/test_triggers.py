import pytest

from score.errors import ChainDepthExceeded, EvalError, PoolExhausted, RuleError
from score.kb import KnowledgeBase
from score.kdef import Interpreter
from score.triggers import ISA, NEEDED, XYZ


def test_meeting_rule_triggers_on_both_time_roles(load):
    w = load("prelude", "meeting")
    kinds = {(t.kind, t.rule) for t in w.kb.triggers_on("start time")}
    assert kinds == {(XYZ, "R1")}
    assert [(t.kind, t.rule) for t in w.kb.triggers_on("end time")] == [(XYZ, "R1")]


def test_if_needed_rule_installs_one_trigger(load):
    w = load("prelude", "meeting-lazy")
    (trig,) = w.kb.triggers_on("duration")
    assert trig.kind == NEEDED and trig.z.name == "c"
    assert w.kb.triggers_on("start time") == []


def test_flying_rule_triggers(load):
    w = load("trip")
    assert [t.kind for t in w.kb.triggers_on("airplane")] == [ISA]
    assert [t.kind for t in w.kb.triggers_on("travel vehicle")] == [XYZ]


def test_no_rules_means_no_marker_work(kb):
    kb.new_type("a")
    before = kb.pool.allocations
    kb.new_type("b", "a")
    assert kb.pool.allocations == before
    assert kb.engine.last_firings == 0


def test_start_time_alone_does_not_fire(load):
    w = load("prelude")
    w.ev("""(new-type {meeting})
            (new-indv-role {start time} {meeting} {time})
            (new-indv-role {end time} {meeting} {time})
            (new-indv-role {duration} {meeting} {time span})
            (new-if-added-rule ((a :proper t) (b :proper t) c)
               ((a {start time} c) (b {end time} c))
               (x-is-the-y-of-z (scone-subtract b a) {duration} c))
            (new-indv {meeting 27} {meeting})
            (x-is-the-y-of-z {10:30 AM} {start time} {meeting 27})""")
    assert w.kb.stats.firings == 0
    assert w.kb.stats.trigger_activations == 1
    w.ev("(x-is-the-y-of-z {11:30 AM} {end time} {meeting 27})")
    assert w.kb.stats.firings == 1


def test_two_vehicles_give_two_bindings_one_effect(load):
    w = load("trip")
    before = len(w.kb.elements)
    w.ev("""(new-indv {jet} {airplane})
            (x-is-a-y-of-z {jet} {travel vehicle} {my trip})""")
    assert w.kb.stats.firings == 2
    fired_b = {vals[1] for _, vals in w.kb.engine.fired}
    assert fired_b == {w.id("my vehicle"), w.id("jet")}
    # jet, its is-a link and its filler link; no second flying-event link
    assert len(w.kb.elements) == before + 3


def test_candidate_failing_second_predicate_gives_nothing(load):
    w = load("prelude", "meeting")
    w.ev("""(new-indv {meeting 28} {meeting})
            (new-indv {meeting 29} {meeting})
            (x-is-the-y-of-z {10:30 AM} {start time} {meeting 28})
            (x-is-the-y-of-z {11:30 AM} {end time} {meeting 29})""")
    assert w.kb.stats.firings == 1


def test_check_depth_bounded_by_predicates(load):
    w = load("prelude", "meeting")
    assert 0 < w.kb.stats.max_check_depth["R1"] <= 2


def test_request_value_is_lazy_and_cached(load):
    w = load("prelude", "meeting-lazy")
    kb = w.kb
    assert kb.stats.trigger_activations == 0
    allocs = kb.pool.allocations
    first = kb.the_x_of_y("duration", "meeting 27")
    assert kb.label(first) == "{1 hour}"
    assert kb.pool.allocations > allocs
    checks, allocs = kb.stats.rule_checks, kb.pool.allocations
    assert kb.the_x_of_y("duration", "meeting 27") == first
    assert kb.stats.rule_checks == checks
    assert kb.pool.allocations == allocs


def test_request_without_premises_is_empty(load):
    w = load("prelude", "meeting-lazy")
    w.ev("(new-indv {meeting 30} {meeting})")
    assert w.kb.the_x_of_y("duration", "meeting 30") is None
    assert w.kb.pool.available == w.kb.pool.capacity


def test_request_on_non_role(load):
    w = load("prelude", "meeting-lazy")
    with pytest.raises(Exception) as exc:
        w.kb.the_x_of_y("meeting", "meeting 27")
    assert exc.value.code == "not-a-role"


def _counter_kb(limit):
    kb = KnowledgeBase(max_chain_depth=limit)
    it = Interpreter(kb)
    for d in ("(new-relation {next})",
              "(new-if-added-rule (a (b :proper t)) ((a {next} b))"
              "  (new-statement b {next} (scone-add b 1)))"):
        it.eval_form(__import__("score.kdef").kdef.parse(d)[0])
    return kb


def test_runaway_chain_is_stopped():
    kb = _counter_kb(50)
    with pytest.raises(ChainDepthExceeded):
        kb.new_statement(kb.number_node(0), "next", kb.number_node(1))
    assert kb.stats.firings == 50
    assert kb.pool.available == kb.pool.capacity
    kb.new_type("still usable")


def test_fifteen_chained_predicates_exhaust_the_pool():
    kb = KnowledgeBase()
    it = Interpreter(kb)
    it.load_text("(new-type {p}) (new-relation {likes} {p} {p})")
    names = [f"v{i}" for i in range(16)]
    preds = " ".join(f"({names[i]} {{likes}} {names[i + 1]})" for i in range(15))
    for i in range(16):
        kb.new_indv(f"n{i}", "p")
    for i in range(1, 15):
        kb.new_statement(f"n{i}", "likes", f"n{i + 1}")
    it.load_text(f"(new-if-added-rule ({' '.join(names)}) ({preds}) (new-is-a v0 {{p}}))")
    with pytest.raises(PoolExhausted):
        kb.new_statement("n0", "likes", "n1")
    assert kb.pool.available == kb.pool.capacity


def test_duplicate_rule_id(load):
    w = load("trip")
    rule = w.kb.rules["R1"]
    with pytest.raises(RuleError) as exc:
        w.kb.install_rule(rule)
    assert exc.value.code == "duplicate-rule-id"


def test_action_error_skips_rule(load):
    w = load("prelude", "meeting")
    w.ev("""(new-indv {sometime} {time})
            (new-indv {meeting 31} {meeting})
            (x-is-the-y-of-z {sometime} {start time} {meeting 31})
            (x-is-the-y-of-z {11:30 AM} {end time} {meeting 31})""")
    assert w.kb.stats.action_errors == 1
    assert w.kb.lookup_the_y_of_z("duration", "meeting 31") is None


def test_native_hook(load):
    seen = []
    w = load("prelude")
    w.kb.register_hook("notify", lambda kb, x: seen.append(kb.label(x)))
    w.ev("""(new-type {alarm})
            (new-relation {rings} {thing} {thing})
            (new-if-added-rule (a b) ((a {rings} b)) (call notify a))
            (new-indv {bell} {alarm})
            (new-statement {bell} {rings} {10:30 AM})""")
    assert seen == ["{bell}"]


def test_when_guard(load):
    w = load("prelude")
    w.ev("""(new-type {flag})
            (new-relation {at} {thing} {thing})
            (new-if-added-rule (a (b :proper t)) ((a {at} b))
               (when (scone-greater? b 660) (new-is-a a {flag})))
            (new-indv {early} {thing})
            (new-indv {late} {thing})
            (new-statement {early} {at} {10:30 AM})
            (new-statement {late} {at} {11:30 AM})""")
    assert w.kb.is_x_a_y("late", "flag")
    assert not w.kb.is_x_a_y("early", "flag")


def test_rules_do_not_fire_retroactively_until_rechecked(load):
    w = load("prelude")
    w.ev("""(new-type {meeting})
            (new-indv-role {start time} {meeting} {time})
            (new-indv-role {end time} {meeting} {time})
            (new-indv-role {duration} {meeting} {time span})
            (new-indv {meeting 27} {meeting})
            (x-is-the-y-of-z {10:30 AM} {start time} {meeting 27})
            (x-is-the-y-of-z {11:30 AM} {end time} {meeting 27})
            (new-if-added-rule ((a :proper t) (b :proper t) c)
               ((a {start time} c) (b {end time} c))
               (x-is-the-y-of-z (scone-subtract b a) {duration} c))""")
    assert w.kb.stats.firings == 0
    assert w.ev("(recheck-rule R1)") == 1
    assert w.kb.lookup_the_y_of_z("duration", "meeting 27") == w.id("1 hour")


def test_trace_grammar(load):
    w = load("trip")
    assert w.trace == [
        "TRIGGER isa {airplane} (R1 b)",
        "TRIGGER xyz {travel vehicle} (R1 b a)",
        "FIRE R1 {a={my trip} b={my vehicle}}",
    ]


def test_substitution_failure_is_traced(load):
    w = load("trip")
    w.ev("""(new-indv {my car} {car})
            (x-is-a-y-of-z {my car} {travel vehicle} {my trip})""")
    assert w.trace[-1] == "SUBST-FAIL R1 b {my car}"
    assert w.kb.stats.subst_failures == 1


def test_same_script_same_trace(load):
    names = ("prelude", "meeting")
    assert load(*names).trace == load(*names).trace


def test_unknown_head_in_rule_body(load):
    w = load("trip")
    with pytest.raises(EvalError) as exc:
        w.ev("(new-if-added-rule (a b) ((b {travel vehicle} a)) (explode a))")
    assert exc.value.code == "bad-action-shape"

import pytest

from score.kb import KnowledgeBase
from score.rules import validate_rule
from score.testkit import (BudgetExceeded, Oracle, gen_random_kb, gen_random_rules,
                           oracle_satisfying_tuples, oracle_superiors, snapshot)

GOLDEN_SEED0_SIZE50 = "8462ef31b54accd8cc38790ef2e501e21144db448f8934e49b6ad68982d7c41f"


def test_golden_fingerprint():
    assert gen_random_kb(0, 50)[1].fingerprint() == GOLDEN_SEED0_SIZE50


def test_generator_is_deterministic():
    assert gen_random_kb(7, 80) == gen_random_kb(7, 80)
    assert gen_random_kb(7, 80)[1] != gen_random_kb(8, 80)[1]


def test_size_zero_is_bare_kb():
    ops, snap = gen_random_kb(3, 0)
    assert ops == [] and snap == snapshot(KnowledgeBase())


def test_snapshot_equality_ignores_order():
    a, b = KnowledgeBase(), KnowledgeBase()
    assert snapshot(a) == snapshot(b)
    a.new_type("x")
    assert snapshot(a) != snapshot(b)


def test_generated_rules_validate_over_many_seeds():
    for seed in range(1000):
        kb = KnowledgeBase()
        ops, snap = gen_random_kb(seed, 40)
        from score.testkit import apply_ops
        apply_ops(kb, ops, "schema")
        for rule in gen_random_rules(seed, snapshot(kb), 3):
            validate_rule(rule, kb)


def test_clyde_superiors():
    kb = KnowledgeBase()
    kb.new_type("elephant")
    c = kb.new_indv("Clyde", "elephant")
    snap = snapshot(kb)
    assert oracle_superiors(snap, c) == {c, kb.id_of("elephant"), kb.thing}
    assert oracle_superiors(snap, kb.thing) == {kb.thing}


def test_meeting_has_exactly_one_tuple(load):
    w = load("prelude", "meeting")
    tuples = oracle_satisfying_tuples(snapshot(w.kb), w.kb.rules["R1"])
    assert tuples == {(w.id("10:30 AM"), w.id("11:30 AM"), w.id("meeting 27"))}


def test_premise_free_kb_is_empty(load):
    w = load("prelude", "meeting")
    fresh = load("prelude")
    fresh.ev("""(new-type {meeting})
                (new-indv-role {start time} {meeting} {time})
                (new-indv-role {end time} {meeting} {time})""")
    assert oracle_satisfying_tuples(snapshot(fresh.kb), w.kb.rules["R1"]) == set()


def test_budget(monkeypatch, load):
    import score.testkit as tk
    w = load("prelude", "meeting")
    monkeypatch.setattr(tk, "BUDGET", 0)
    with pytest.raises(BudgetExceeded):
        Oracle(snapshot(w.kb)).satisfying_tuples(w.kb.rules["R1"])


def test_role_and_relation_oracles_match_engine(load):
    w = load("fido")
    o = Oracle(snapshot(w.kb))
    assert o.role_fillers(w.id("pet"), w.id("John")) == set(w.kb.role_fillers("pet", "John"))
    assert o.role_owners(w.id("pet"), w.id("Fido")) == set(w.kb.role_owners("pet", "Fido"))

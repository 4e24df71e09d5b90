"""Marker-passing semantic network with if-added and if-needed rules."""

from .errors import (ActionError, ChainDepthExceeded, EvalError, KBError, MarkerError,
                     ParseError, PoolExhausted, RuleError, ScoreError)
from .kb import Element, Kind, KnowledgeBase
from .rules import (Assertion, Compute, Const, Match, NeededAction, Num, Predicate, Rule,
                    RuleVariable, Var, When, substitute, validate_rule)

__all__ = [
    "ActionError", "Assertion", "ChainDepthExceeded", "Compute", "Const", "Element",
    "EvalError", "KBError", "Kind", "KnowledgeBase", "MarkerError", "Match", "NeededAction",
    "Num", "ParseError", "PoolExhausted", "Predicate", "Rule", "RuleError", "RuleVariable",
    "ScoreError", "Var", "When", "substitute", "validate_rule",
]

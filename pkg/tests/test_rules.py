import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annolog import demos
from annolog.errors import (
    ArityMismatch,
    DisconnectedRule,
    RuleSyntaxError,
    StaticHead,
    UnboundAnnotationVariable,
    UnknownPredicate,
)
from annolog.lattice import Interval
from annolog.model import PredicateRegistry
from annolog.rules import Threshold, format_rule, format_rules, parse_rule, parse_rules
from randprog import _rule

STUDENT_RULE = "friend(S,S') : [1,1] <-2 takes(S,C):[1,1], takes(S',C):[1,1], class(C):[1,1]"


@pytest.fixture
def registry():
    return demos.students().registry


class TestParseRule:
    def test_friendship_rule(self, registry):
        r = parse_rule(STUDENT_RULE, registry)
        assert r.delta_t == 2 and len(r.clauses) == 3
        assert r.head_variables == ("S", "S'")
        assert r.constant_head == Interval(1.0, 1.0)

    def test_self_loop(self):
        r = parse_rule("p(X) : [1,1] <-0 p(X):[1,1]")
        assert r.delta_t == 0 and len(r.clauses) == 1

    def test_unknown_predicate(self):
        reg = PredicateRegistry(unary={"p"})
        with pytest.raises(UnknownPredicate):
            parse_rule("p(X) : [1,1] <-1 q(X):[1,1]", reg)

    def test_default_delay_is_zero(self):
        assert parse_rule("p(X) : [1,1] <- q(X):[1,1]").delta_t == 0

    def test_thresholds(self):
        r = parse_rule("d(B) : [1,1] <-1 forall supplies(S,B):[1,1], exists(50%,prev) d(S):[0.5,1], "
                       "exists(2) e(S,B):[1,1], exists(0.25) f(B,S):[1,1]")
        t = [c.threshold for c in r.clauses]
        assert t[0] == Threshold("fraction", 1.0, "all")
        assert t[1] == Threshold("fraction", 0.5, "prev")
        assert t[2] == Threshold("count", 2)
        assert t[3] == Threshold("fraction", 0.25)

    def test_binder_and_function_head(self):
        r = parse_rule("gpa(S) : [avg(x),1] <-0 exists(2) grade(S,C):[x,1]")
        assert r.clauses[0].binder == "x"
        assert r.lower.fn.name == "avg" and r.constant_head is None

    def test_negation_and_constants(self):
        r = parse_rule('p(X) : [0.5,1] <-0 ~q(X):[1,1], e(X,math):[1,1], e(X,"New York"):[0,1]')
        assert r.clauses[0].negated
        assert not r.clauses[1].args[1].var
        assert r.clauses[2].args[1].name == "New York"

    def test_syntax_error_position(self):
        with pytest.raises(RuleSyntaxError) as exc:
            parse_rule("p(X) : [1,1] <-1 q(X) [1,1]")
        assert exc.value.line == 1 and exc.value.column is not None

    def test_inverted_clause_bound(self):
        with pytest.raises(RuleSyntaxError):
            parse_rule("p(X) : [1,1] <- q(X):[0.8,0.2]")

    def test_disconnected(self):
        with pytest.raises(DisconnectedRule):
            parse_rule("p(X) : [1,1] <- q(X):[1,1], r(Y):[1,1]")

    def test_unbound_annotation_variable(self):
        with pytest.raises(UnboundAnnotationVariable):
            parse_rule("p(X) : [avg(y),1] <- q(X):[x,1]")

    def test_scale_arity(self):
        with pytest.raises(ArityMismatch):
            parse_rule("p(X) : [scale(0.5,x,y),1] <- q(X):[x,1], r(X):[y,1]")

    def test_static_head(self):
        reg = PredicateRegistry(unary={"p", "q"}, static_predicates={"p"})
        with pytest.raises(StaticHead):
            parse_rule("p(X) : [1,1] <- q(X):[1,1]", reg)

    def test_arity_checked_against_registry(self):
        reg = PredicateRegistry(unary={"p"}, binary={"e"})
        with pytest.raises(RuleSyntaxError):
            parse_rule("p(X) : [1,1] <- e(X):[1,1]", reg)

    def test_rel_is_not_derivable(self):
        with pytest.raises(StaticHead):
            parse_rule("rel(X,Y) : [1,1] <- e(X,Y):[1,1]")


class TestRuleFiles:
    def test_bundled_files(self, registry):
        rules = parse_rules(demos.data_text("students.rules"), registry)
        assert [r.id for r in rules] == ["rule_4", "rule_5"]

    def test_header_required(self):
        with pytest.raises(RuleSyntaxError):
            parse_rules("p(X) : [1,1] <- q(X):[1,1]\n")

    def test_comments_and_default_ids(self):
        text = "# annolog-v1\n# a comment\n\np(X) : [1,1] <- q(X):[1,1]  # trailing\nq(X) : [1,1] <- p(X):[1,1]\n"
        assert [r.id for r in parse_rules(text)] == ["rule_1", "rule_2"]

    def test_duplicate_ids(self):
        text = "# annolog-v1\nr :: p(X) : [1,1] <- q(X):[1,1]\nr :: q(X) : [1,1] <- p(X):[1,1]\n"
        with pytest.raises(RuleSyntaxError) as exc:
            parse_rules(text)
        assert exc.value.line == 3

    def test_error_line_numbers(self):
        text = "# annolog-v1\np(X) : [1,1] <- q(X):[1,1]\np(X) : [1,1 <- q(X):[1,1]\n"
        with pytest.raises(RuleSyntaxError) as exc:
            parse_rules(text)
        assert exc.value.line == 3


class TestRoundTrip:
    def test_bundled_rules_print_and_parse(self):
        for name in ("students.rules", "conflict.rules", "disruption.rules", "relevance.rules"):
            rules = parse_rules(demos.data_text(name))
            assert parse_rules(format_rules(rules)) == rules

    @settings(max_examples=300)
    @given(st.integers(min_value=0, max_value=10**9))
    def test_random_rules(self, seed):
        rng = random.Random(seed)
        text = _rule(rng, 1, ["n0", "n1", "n2"])
        rule = parse_rule(text)
        assert parse_rule(format_rule(rule)) == rule

    def test_functions_print_and_parse(self):
        for head in ("[kth(2,x),1]", "[scale(0.6,x),1]", "[t_luk(x,y),s_max(x,y)]", "[x,1]", "[0.25,0.75]"):
            rule = parse_rule(f"p(X) : {head} <- q(X):[x,1], r(X):[y,1]")
            assert parse_rule(format_rule(rule)) == rule

import pytest

from iasm.model import (
    ExternalVocabulary,
    History,
    Query,
    Structure,
    SymbolInfo,
    Template,
    Update as Triple,
    UpdateSet,
    Vocabulary,
)
from iasm.semantics import Evaluator, Verdict, eval_guard, eval_rule, eval_term
from iasm.syntax import (
    App,
    BoolTerm,
    Cond,
    Fail,
    Issue,
    KAnd,
    KNot,
    KOr,
    Par,
    Timing,
    Update,
)
from conftest import BROKER_TEXT, Q0_HAT, Q1_HAT, T_HAT


VOCAB = Vocabulary(
    [
        SymbolInfo("c0", 0, static=True, relational=False),
        SymbolInfo("c1", 0, static=True, relational=False),
        SymbolInfo("g1", 1, static=True, relational=False),
        SymbolInfo("d0", 0, static=False, relational=False),
        SymbolInfo("r0", 0, static=False, relational=True),
    ]
)

EXT = ExternalVocabulary(
    [
        ("e0", Template.of("la")),
        ("e1", Template.of("lb", "#1")),
    ]
)

E0_HAT = Query((("l", "la"),))


def structure(tables=None):
    base = {("c0", 0): {(): "a"}, ("c1", 0): {(): "b"}}
    base.update(tables or {})
    return Structure(VOCAB, {"a", "b"}, base)


def answered(*pairs):
    return History([[(q, v)] for q, v in pairs])


class TestTermClauses:
    def test_closed_state_term(self):
        res = eval_term(structure(), History(), App("true"), EXT)
        assert res.value == "true" and not res.caused and res.qvalue is None

    def test_unvalued_argument_propagates(self):
        res = eval_term(structure(), History(), App("g1", (App("e0"),)), EXT)
        assert res.value is None
        assert res.caused == {E0_HAT}

    def test_external_head_with_unvalued_argument_has_no_qvalue(self):
        res = eval_term(structure(), History(), App("e1", (App("e0"),)), EXT)
        assert res.value is None and res.qvalue is None
        assert res.caused == {E0_HAT}

    def test_answered_query_term(self):
        h = answered((E0_HAT, "b"))
        res = eval_term(structure(), h, App("e0"), EXT)
        assert res.value == "b" and res.qvalue == E0_HAT and not res.caused

    def test_unanswered_query_term_causes_exactly_its_query(self):
        res = eval_term(structure(), History(), App("e0"), EXT)
        assert res.value is None and res.qvalue == E0_HAT
        assert res.caused == {E0_HAT}

    def test_qvalue_feeds_into_state_function(self):
        h = answered((E0_HAT, "a"))
        res = eval_term(structure(), h, App("Equal", (App("e0"), App("c0"))), EXT)
        assert res.value == "true"


class TestGuardClauses:
    def test_boolean_term_guard(self):
        assert eval_guard(structure(), History(), BoolTerm(App("true")), EXT).truth is True
        g = BoolTerm(App("Equal", (App("e0"), App("c0"))))
        res = eval_guard(structure(), History(), g, EXT)
        assert res.truth is None and res.caused == {E0_HAT}

    def test_timing_both_valued_compares_first_defined(self):
        e1a = App("e1", (App("c0"),))
        q_e1a = Query((("l", "lb"), ("e", "a")))
        h = History([[(E0_HAT, "a")], [(q_e1a, "b")]])
        assert eval_guard(structure(), h, Timing(App("e0"), e1a), EXT).truth is True
        assert eval_guard(structure(), h, Timing(e1a, App("e0")), EXT).truth is False
        # simultaneous replies both ways
        h2 = History([[(E0_HAT, "a"), (q_e1a, "b")]])
        assert eval_guard(structure(), h2, Timing(App("e0"), e1a), EXT).truth is True
        assert eval_guard(structure(), h2, Timing(e1a, App("e0")), EXT).truth is True

    def test_timing_left_valued_only_is_true(self):
        h = answered((E0_HAT, "a"))
        g = Timing(App("e0"), App("e1", (App("c0"),)))
        res = eval_guard(structure(), h, g, EXT)
        assert res.truth is True and not res.caused

    def test_timing_right_valued_only_is_false(self):
        h = answered((E0_HAT, "a"))
        g = Timing(App("e1", (App("c0"),)), App("e0"))
        res = eval_guard(structure(), h, g, EXT)
        assert res.truth is False and not res.caused

    def test_timing_neither_valued_causes_both(self):
        g = Timing(App("e0"), App("e1", (App("c0"),)))
        res = eval_guard(structure(), History(), g, EXT)
        assert res.truth is None
        assert res.caused == {E0_HAT, Query((("l", "lb"), ("e", "a")))}

    def test_kleene_and(self):
        t, f = BoolTerm(App("true")), BoolTerm(App("false"))
        u = BoolTerm(App("Equal", (App("e0"), App("c0"))))  # unvalued
        ev = lambda g: eval_guard(structure(), History(), g, EXT)
        assert ev(KAnd(t, t)).truth is True
        assert ev(KAnd(f, u)).truth is False and not ev(KAnd(f, u)).caused
        one_sided = ev(KAnd(t, u))
        assert one_sided.truth is None and one_sided.caused == {E0_HAT}
        both = ev(KAnd(u, u))
        assert both.truth is None and both.caused == {E0_HAT}

    def test_kleene_or(self):
        t, f = BoolTerm(App("true")), BoolTerm(App("false"))
        u = BoolTerm(App("Equal", (App("e0"), App("c0"))))
        ev = lambda g: eval_guard(structure(), History(), g, EXT)
        assert ev(KOr(f, f)).truth is False
        assert ev(KOr(t, u)).truth is True and not ev(KOr(t, u)).caused
        one_sided = ev(KOr(f, u))
        assert one_sided.truth is None and one_sided.caused == {E0_HAT}
        both = ev(KOr(u, u))
        assert both.truth is None and both.caused == {E0_HAT}

    def test_kleene_not(self):
        u = BoolTerm(App("Equal", (App("e0"), App("c0"))))
        ev = lambda g: eval_guard(structure(), History(), g, EXT)
        assert ev(KNot(BoolTerm(App("true")))).truth is False
        assert ev(KNot(BoolTerm(App("false")))).truth is True
        res = ev(KNot(u))
        assert res.truth is None and res.caused == {E0_HAT}


class TestTimingExample:
    """Unary p and nullary q, r external; replies arrive p[0], then q, then r."""

    def setup_method(self):
        self.vocab = Vocabulary([SymbolInfo("zero", 0, static=True, relational=False)])
        self.ext = ExternalVocabulary(
            [
                ("p", Template.of("p", "#1")),
                ("q", Template.of("q")),
                ("r", Template.of("r")),
            ]
        )
        self.state = Structure(self.vocab, {"o", "x", "y"}, {("zero", 0): {(): "o"}})
        self.p0_hat = Query((("l", "p"), ("e", "o")))
        self.q_hat = Query((("l", "q"),))
        self.r_hat = Query((("l", "r"),))
        self.history = History(
            [[(self.p0_hat, "x")], [(self.q_hat, "y")], [(self.r_hat, "o")]]
        )

    def test_values_arrive_at_increasing_prefixes(self):
        ev = Evaluator(self.state, self.history, self.ext)
        p0 = App("p", (App("zero"),))
        pr = App("p", (App("r"),))
        assert ev.first_defined(p0) == 1
        assert ev.first_defined(App("q")) == 2
        assert ev.first_defined(pr) == 3
        # p(0) and p(r) share their value and their ultimate query
        assert ev.term(p0).value == "x" and ev.term(pr).value == "x"
        assert ev.term(p0).qvalue == ev.term(pr).qvalue == self.p0_hat

    def test_both_strict_timing_guards_are_true(self):
        p0 = App("p", (App("zero"),))
        pr = App("p", (App("r"),))
        g1 = KNot(Timing(App("q"), p0))  # p(0) strictly before q
        g2 = KNot(Timing(pr, App("q")))  # q strictly before p(r)
        assert eval_guard(self.state, self.history, g1, self.ext).truth is True
        assert eval_guard(self.state, self.history, g2, self.ext).truth is True


class TestRuleClauses:
    def test_update_all_valued(self):
        out = eval_rule(structure(), History(), Update("d0", (), App("c0")), EXT)
        assert out.final and out.verdict is Verdict.SUCCESS
        assert out.updates == UpdateSet.of(Triple("d0", (), "a"))
        assert not out.caused and not out.clash

    def test_update_with_unvalued_subterm(self):
        out = eval_rule(structure(), History(), Update("d0", (), App("e0")), EXT)
        assert not out.final and out.verdict is Verdict.UNDECIDED
        assert out.caused == {E0_HAT} and len(out.updates) == 0

    def test_issue_fresh_query(self):
        out = eval_rule(structure(), History(), Issue("e0", ()), EXT)
        assert out.final and out.verdict is Verdict.SUCCESS
        assert out.caused == {E0_HAT} and len(out.updates) == 0

    def test_issue_answered_query_is_silent(self):
        h = answered((E0_HAT, "a"))
        out = eval_rule(structure(), h, Issue("e0", ()), EXT)
        assert out.final and out.verdict is Verdict.SUCCESS
        assert not out.caused

    def test_issue_with_unvalued_argument(self):
        out = eval_rule(structure(), History(), Issue("e1", (App("e0"),)), EXT)
        assert not out.final and out.caused == {E0_HAT}

    def test_fail(self):
        out = eval_rule(structure(), History(), Fail(), EXT)
        assert out.final and out.verdict is Verdict.FAIL
        assert not out.caused and len(out.updates) == 0

    def test_conditional_routes_on_truth(self):
        g = BoolTerm(App("r0"))
        rule = Cond(g, Update("d0", (), App("c0")), Fail())
        out_false = eval_rule(structure(), History(), rule, EXT)
        assert out_false.verdict is Verdict.FAIL  # r0 defaults to false
        st = structure({("r0", 0): {(): "true"}})
        out_true = eval_rule(st, History(), rule, EXT)
        assert out_true.verdict is Verdict.SUCCESS

    def test_conditional_undecided_causes_guard_queries(self):
        g = BoolTerm(App("Equal", (App("e0"), App("c0"))))
        rule = Cond(g, Fail(), Fail())
        out = eval_rule(structure(), History(), rule, EXT)
        assert not out.final and out.caused == {E0_HAT}

    def test_empty_par_succeeds(self):
        out = eval_rule(structure(), History(), Par(()), EXT)
        assert out.final and out.verdict is Verdict.SUCCESS and not out.caused

    def test_clashing_par_fails_with_both_triples(self):
        rule = Par((Update("d0", (), App("true")), Update("d0", (), App("false"))))
        out = eval_rule(structure(), History(), rule, EXT)
        assert out.final and out.verdict is Verdict.FAIL and out.clash
        assert out.updates == UpdateSet.of(
            Triple("d0", (), "true"), Triple("d0", (), "false")
        )

    def test_par_unions_queries_and_updates_while_unfinished(self):
        rule = Par((Update("d0", (), App("e0")), Update("r0", (), App("true"))))
        out = eval_rule(structure(), History(), rule, EXT)
        assert not out.final
        assert out.caused == {E0_HAT}
        assert out.updates == UpdateSet.of(Triple("r0", (), "true"))

    def test_par_fails_if_any_component_fails(self):
        rule = Par((Fail(), Update("d0", (), App("c0"))))
        out = eval_rule(structure(), History(), rule, EXT)
        assert out.final and out.verdict is Verdict.FAIL and not out.clash


class TestBrokerGolden:
    def sell_updates(self, client):
        return UpdateSet.of(Triple("sold", (), "true"), Triple("buyer", (), client))

    def test_first_reply_wins(self, broker_program, broker_state):
        h = History([[(Q0_HAT, "yes")]])
        out = eval_rule(broker_state, h, broker_program.rule, broker_program.external)
        assert out.final and out.verdict is Verdict.SUCCESS
        assert out.updates == self.sell_updates("c0")

    def test_client1_wins_when_alone(self, broker_program, broker_state):
        h = History([[(Q1_HAT, "yes")]])
        out = eval_rule(broker_state, h, broker_program.rule, broker_program.external)
        assert out.updates == self.sell_updates("c1")

    def test_simultaneous_tie_prefers_client0(self, broker_program, broker_state):
        h = History([[(Q0_HAT, "yes"), (Q1_HAT, "yes")]])
        out = eval_rule(broker_state, h, broker_program.rule, broker_program.external)
        assert out.updates == self.sell_updates("c0")

    def test_timeout_cancels(self, broker_program, broker_state):
        h = History([[(T_HAT, "ok")]])
        out = eval_rule(broker_state, h, broker_program.rule, broker_program.external)
        assert out.final and out.verdict is Verdict.SUCCESS
        assert out.updates == UpdateSet.of(Triple("cancelled", (), "true"))

    def test_empty_history_causes_all_three_queries(self, broker_program, broker_state):
        out = eval_rule(broker_state, History(), broker_program.rule, broker_program.external)
        assert not out.final
        assert out.caused == {Q0_HAT, Q1_HAT, T_HAT}

    def test_late_timeout_does_not_cancel(self, broker_program, broker_state):
        h = History([[(Q0_HAT, "yes")], [(T_HAT, "ok")]])
        out = eval_rule(broker_state, h, broker_program.rule, broker_program.external)
        assert out.updates == self.sell_updates("c0")

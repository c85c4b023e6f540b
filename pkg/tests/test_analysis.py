import random

import pytest

from iasm.analysis import (
    CheckConfig,
    Witness,
    agree_on_witness,
    bound_guard,
    bound_rule,
    bound_term,
    canonical_vterm,
    check_lemmas,
    enumerate_histories,
    eval_state_term,
    normalize_witness,
    shadow,
    term_subterms,
    term_variables,
    unshadow,
    witness_guard,
    witness_reads,
    witness_rule,
    witness_term,
)
from iasm.engine import issued
from iasm.generators import gen_program, gen_structure, gen_term
from iasm.model import ExternalVocabulary, Structure, Template
from iasm.semantics import Evaluator
from iasm.syntax import (
    App,
    Var,
    desugar,
    desugar_program,
    parse_program,
    parse_rule_text,
    parse_term_text,
    pretty_term,
)

EXT = ExternalVocabulary(
    [
        ("e0", Template.of("la")),
        ("e1", Template.of("lb", "#1")),
        ("e2", Template.of("#1", "la", "#2")),
    ]
)


def rule(text):
    return desugar(parse_rule_text(text))


class TestBounds:
    # ten hand-computed fixtures
    CASES = [
        ("fail", 0),
        ("skip", 0),
        ("issue e0()", 1),
        ("d0() := true()", 1),
        ("if (e0() preceq e0()) then fail else fail endif", 2),
        ("if Equal(e0(), e0()) then fail else fail endif", 3),
        ("par { fail; fail }", 0),
        ("issue e1(e0())", 2),
        ("d1(c0()) := e0()", 2),
        ("if r0() then d0() := true() endif", 2),
    ]

    @pytest.mark.parametrize("text,expected", CASES)
    def test_hand_computed(self, text, expected):
        assert bound_rule(rule(text)) == expected

    def test_terms_and_guards(self):
        assert bound_term(parse_term_text("true")) == 1
        assert bound_term(parse_term_text("g1(e0())")) == 1 + 1
        g = rule("if knot (e0() preceq e1(c0())) then fail endif").guard
        assert bound_guard(g) == 1 + 2

    def test_cond_max_variant_is_tighter(self):
        r = rule("if r0() then issue e0() else par { issue e0(); issue e0() } endif")
        assert bound_rule(r) == 1 + 1 + 2
        assert bound_rule(r, cond_max=True) == 1 + 2

    def test_sum_dominates_max_on_random_rules(self):
        rng = random.Random(3)
        for _ in range(50):
            prog = gen_program(rng)
            r = desugar(prog.rule)
            assert bound_rule(r) >= bound_rule(r, cond_max=True)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_bound_dominates_exhaustive_issued(self, seed):
        rng = random.Random(seed)
        prog = desugar_program(gen_program(rng))
        st = gen_structure(rng, prog, extra=1)
        bound = bound_rule(prog.rule)
        worst = 0
        for h in enumerate_histories(st, prog, ["true", "a0"], max_len=2):
            worst = max(worst, len(issued(st, h, prog)))
        assert worst <= bound


class TestShadow:
    def test_pure_state_term_shadows_to_itself(self):
        t = parse_term_text("true")
        sh, sub = shadow(t, EXT)
        assert sh == t and sub == {}

    def test_whole_external_term_becomes_variable(self):
        sh, sub = shadow(parse_term_text("e0()"), EXT)
        assert sh == Var("v1")
        assert sub == {"v1": App("e0")}

    def test_outermost_occurrences_get_distinct_variables(self):
        t = parse_term_text("And(e0(), Equal(e1(c0()), e0()))")
        sh, sub = shadow(t, EXT)
        assert sh == App("And", (Var("v1"), App("Equal", (Var("v2"), Var("v3")))))
        assert sub == {
            "v1": App("e0"),
            "v2": App("e1", (App("c0"),)),
            "v3": App("e0"),
        }

    def test_nested_externals_stay_inside_the_outermost(self):
        sh, sub = shadow(parse_term_text("e1(e0())"), EXT)
        assert sh == Var("v1")
        assert sub["v1"] == App("e1", (App("e0"),))

    def test_unshadow_inverts(self):
        rng = random.Random(9)
        for _ in range(100):
            t = desugar(gen_term(rng, 3)) if False else gen_term(rng, 3)
            t = desugar(parse_rule_text(f"d0() := {pretty_term(t)}")).rhs
            sh, sub = shadow(t, EXT)
            assert unshadow(sh, sub) == t


class TestWitness:
    def test_fail_witness_is_the_normalization_floor(self):
        w = witness_rule(rule("fail"), EXT)
        assert w.pretty() == ["false", "true", "v1"]

    def test_update_witness_contains_rhs_shadow(self):
        w = witness_rule(rule("d0() := g1(c0())"), EXT)
        assert App("g1", (App("c0"),)) in w.terms
        assert App("c0") in w.terms  # subterm closure

    def test_broker_witness(self, broker_program):
        w = witness_rule(broker_program.rule, broker_program.external)
        names = set(w.pretty())
        assert {"s", "p", "a", "client0", "client1", "true", "false"} <= names

    def test_normalized_shape(self):
        rng = random.Random(21)
        for _ in range(40):
            prog = gen_program(rng)
            w = witness_rule(desugar(prog.rule), prog.external)
            assert App("true") in w.terms and App("false") in w.terms
            assert any(isinstance(t, Var) for t in w.terms)
            for t in w.terms:
                assert term_subterms(t) <= w.terms

    def test_witness_terms_avoid_external_symbols(self):
        w = witness_rule(rule("d0() := e1(e0())"), EXT)
        for t in w.terms:
            for s in term_subterms(t):
                if isinstance(s, App):
                    assert (s.head, len(s.args)) not in EXT


class TestStateTermEvaluation:
    def test_assignment_required(self):
        st = gen_structure(random.Random(0), gen_program(random.Random(0)))
        assert eval_state_term(st, App("true"), {}) == "true"
        assert eval_state_term(st, Var("x"), {"x": "a0"}) == "a0"
        with pytest.raises(Exception):
            eval_state_term(st, Var("x"), {})

    def test_agreement_reflexive(self):
        rng = random.Random(1)
        prog = gen_program(rng)
        st = gen_structure(rng, prog)
        w = witness_rule(desugar(prog.rule), prog.external)
        from iasm.model import History

        assert agree_on_witness(st, st, w, History())


class TestHarnessPasses:
    def test_trivial_program_all_green(self):
        prog = parse_program("rule fail")
        report = check_lemmas(prog, CheckConfig(seed=1, cases=30))
        assert report.ok, report.summary()

    def test_broker_regression(self):
        prog = parse_program(open("tests/fixtures/broker.asm").read())
        report = check_lemmas(prog, CheckConfig(seed=42, cases=500, max_len=3))
        assert report.ok, report.summary()

    def test_report_json_shape(self):
        prog = parse_program("rule fail")
        report = check_lemmas(prog, CheckConfig(seed=1, cases=5))
        js = report.to_json()
        assert {r["check"] for r in js} >= {"value_iff_no_query", "no_repeat"}
        assert all(r["failures"] == [] for r in js)


# ---------------------------------------------------------------------------
# Mutation tests: each law-suite must catch a deliberately seeded bug.
# ---------------------------------------------------------------------------

class MutantPhantomValue(Evaluator):
    """Unanswered queries still 'return' a value: breaks value-iff-no-query."""

    def _external_lookup(self, q, k):
        value, caused = super()._external_lookup(q, k)
        if value is None:
            return "undef", caused
        return value, caused


class MutantReissueAnswered(Evaluator):
    """Issue re-causes queries that already have replies: breaks no-repeat."""

    def _issue_caused(self, q, k):
        return frozenset([q])


class MutantForgetfulReplies(Evaluator):
    """Replies are visible only in the round they arrived: breaks monotonicity
    (term values must persist when the history is extended)."""

    def _external_lookup(self, q, k):
        ridx = self.history.round_of(q)
        if ridx is not None and ridx == k - 1:
            return self.history.reply(q), frozenset()
        return None, frozenset([q])


class MutantClashBlind(Evaluator):
    """Parallel success ignores clashes: breaks success-implies-no-clash."""

    def _par_success(self, successes, clash):
        return all(successes)


class MutantIdOrderLookup(Evaluator):
    """Dynamic nullary lookup leaks the element-id order: breaks equivariance."""

    def _state_value(self, name, args):
        if name == "d0":
            return min(self.structure.elements)
        return super()._state_value(name, args)


class MutantFirstComponentFinal(Evaluator):
    """Parallel finality looks only at the first component: breaks permutation
    invariance."""

    def _par_final(self, finals):
        return finals[0] if finals else True


MUTANT_FOR_CHECK = {
    "value_iff_no_query": MutantPhantomValue,
    "no_repeat": MutantReissueAnswered,
    "monotonicity": MutantForgetfulReplies,
    "no_clash": MutantClashBlind,
    "iso_equivariance": MutantIdOrderLookup,
    "par_permutation": MutantFirstComponentFinal,
}

_MUTANT_DECLS = (
    "static c0/0\nstatic c1/0\nstatic g1/1\ndynamic d0/0\ndynamic d1/1\n"
    "dynamic r0/0 relational\ndynamic r1/1 relational\n"
    "label la, lb\nexternal e0/0 = [la]\nexternal e1/1 = [lb, #1]\n"
)

MUTANT_PROGRAMS = {
    "no_clash": _MUTANT_DECLS + "rule par { d0() := true(); d0() := false() }",
    "par_permutation": _MUTANT_DECLS + "rule par { d0() := e0(); fail }",
    "iso_equivariance": _MUTANT_DECLS + "rule d1(d0()) := true()",
    "monotonicity": _MUTANT_DECLS + "rule d0() := e0()",
}


@pytest.mark.parametrize("check", sorted(MUTANT_FOR_CHECK))
def test_mutation_is_caught(check):
    text = MUTANT_PROGRAMS.get(check)
    if text is not None:
        programs = [parse_program(text)]
    else:
        programs = [gen_program(random.Random(s)) for s in range(4)]
    caught = False
    for prog in programs:
        config = CheckConfig(
            seed=7,
            cases=150,
            checks=[check],
            evaluator_factory=MUTANT_FOR_CHECK[check],
        )
        report = check_lemmas(prog, config)
        if not report.ok:
            caught = True
            break
    assert caught, f"mutant for {check} went undetected"


def test_bound_mutation_is_caught():
    prog = parse_program("label la\nexternal e0/0 = [la]\nrule issue e0()")
    config = CheckConfig(seed=3, cases=30, checks=["bounded_work"], bound_fn=lambda r: 0)
    report = check_lemmas(prog, config)
    assert not report.ok


def test_witness_mutation_is_caught():
    prog = parse_program("static g1/1\nstatic c0/0\ndynamic d0/0\nrule d0() := g1(c0())")
    weak = normalize_witness(set())  # forgets that the rule reads g1(c0)

    config = CheckConfig(
        seed=5, cases=200, checks=["witness_agreement"], witness_fn=lambda r, e: weak
    )
    report = check_lemmas(prog, config)
    assert not report.ok


def test_real_witness_passes_where_mutant_fails():
    prog = parse_program("static g1/1\nstatic c0/0\ndynamic d0/0\nrule d0() := g1(c0())")
    config = CheckConfig(seed=5, cases=200, checks=["witness_agreement"])
    assert check_lemmas(prog, config).ok


def test_failure_reports_carry_shrunk_input():
    prog = parse_program("label la\nexternal e0/0 = [la]\nrule issue e0()")
    config = CheckConfig(seed=3, cases=30, checks=["bounded_work"], bound_fn=lambda r: 0)
    report = check_lemmas(prog, config)
    failure = report.reports[0].failures[0]
    js = failure.to_json()
    assert "history" in js["shrunk_input"]
    assert js["expected"].startswith("|issued| <=")

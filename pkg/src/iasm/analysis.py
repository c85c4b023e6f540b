"""Work bounds, bounded-exploration witnesses, and the law-checking harness.

``bound_*`` computes a syntax-directed upper bound on the number of queries a
term, guard, or rule can cause across all initial segments of any history.
``witness_*`` computes a finite set of state-vocabulary terms (with variables)
such that two states agreeing on it, under the same history, drive the rule to
identical outcomes.  ``check_lemmas`` property-tests these facts together with
the semantic laws (value-iff-no-query, no-repeat, monotonicity, no-clash,
isomorphism equivariance, parallel-permutation invariance) over seeded random
programs, states, and histories.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

from .model import AsmError, ExternalVocabulary, History, Structure, UpdateSet
from .semantics import Evaluator, Verdict
from .syntax import (
    App,
    BoolTerm,
    Cond,
    Fail,
    Guard,
    Issue,
    KAnd,
    KNot,
    KOr,
    Par,
    Program,
    Rule,
    Term,
    Timing,
    Update,
    Var,
    desugar,
    is_core,
    pretty_term,
)
from . import generators as gens
from .model import apply_iso


# ---------------------------------------------------------------------------
# Work bounds
# ---------------------------------------------------------------------------

def bound_term(t: Term) -> int:
    if not isinstance(t, App):
        raise AsmError("bounds are defined for closed core terms")
    return 1 + sum(bound_term(a) for a in t.args)


def bound_guard(g: Guard) -> int:
    if isinstance(g, BoolTerm):
        return bound_term(g.term)
    if isinstance(g, Timing):
        return bound_term(g.s) + bound_term(g.t)
    if isinstance(g, (KAnd, KOr)):
        return bound_guard(g.left) + bound_guard(g.right)
    if isinstance(g, KNot):
        return bound_guard(g.guard)
    raise AsmError(f"bounds need core guards, got {type(g).__name__}")


def bound_rule(r: Rule, cond_max: bool = False) -> int:
    """Upper bound on |issued| for any state and history.

    ``cond_max`` tightens the conditional case from B(R0)+B(R1) to
    max(B(R0), B(R1)); both are sound, and sum >= max always.
    """
    if isinstance(r, Update):
        return sum(bound_term(t) for t in (*r.args, r.rhs))
    if isinstance(r, Issue):
        return 1 + sum(bound_term(t) for t in r.args)
    if isinstance(r, Fail):
        return 0
    if isinstance(r, Cond):
        if r.else_rule is None:
            raise AsmError("bounds need core rules (missing else branch)")
        b0, b1 = bound_rule(r.then_rule, cond_max), bound_rule(r.else_rule, cond_max)
        branches = max(b0, b1) if cond_max else b0 + b1
        return bound_guard(r.guard) + branches
    if isinstance(r, Par):
        return sum(bound_rule(c, cond_max) for c in r.rules)
    raise AsmError(f"bounds need core rules, got {type(r).__name__}")


# ---------------------------------------------------------------------------
# Shadows and witnesses
# ---------------------------------------------------------------------------

def shadow(t: Term, external: ExternalVocabulary) -> tuple[Term, dict[str, Term]]:
    """Replace each outermost externally-headed subterm by a fresh variable.

    Variables are numbered v1, v2, ... left to right; the returned substitution
    inverts the shadowing.
    """
    counter = itertools.count(1)
    subst: dict[str, Term] = {}

    def walk(u: Term) -> Term:
        if not isinstance(u, App):
            raise AsmError("shadows are defined for closed core terms")
        if (u.head, len(u.args)) in external:
            name = f"v{next(counter)}"
            subst[name] = u
            return Var(name)
        return App(u.head, tuple(walk(a) for a in u.args))

    return walk(t), subst


def unshadow(vterm: Term, subst: dict[str, Term]) -> Term:
    if isinstance(vterm, Var):
        return subst[vterm.name]
    assert isinstance(vterm, App)
    return App(vterm.head, tuple(unshadow(a, subst) for a in vterm.args))


def term_variables(t: Term) -> list[str]:
    """Free variables in first-occurrence order."""
    out: list[str] = []

    def walk(u: Term) -> None:
        if isinstance(u, Var):
            if u.name not in out:
                out.append(u.name)
        elif isinstance(u, App):
            for a in u.args:
                walk(a)

    walk(t)
    return out


def canonical_vterm(t: Term) -> Term:
    """Rename variables to v1, v2, ... in first-occurrence order."""
    names = term_variables(t)
    ren = {name: f"v{i + 1}" for i, name in enumerate(names)}

    def walk(u: Term) -> Term:
        if isinstance(u, Var):
            return Var(ren[u.name])
        assert isinstance(u, App)
        return App(u.head, tuple(walk(a) for a in u.args))

    return walk(t)


def term_subterms(t: Term) -> set[Term]:
    out: set[Term] = set()

    def walk(u: Term) -> None:
        out.add(u)
        if isinstance(u, App):
            for a in u.args:
                walk(a)

    walk(t)
    return out


@dataclass(frozen=True)
class Witness:
    """Finite set of state-vocabulary terms with variables.

    Normalized form: closed under subterms and containing ``true``, ``false``,
    and a bare variable.
    """

    terms: frozenset[Term]

    def closed_terms(self) -> list[Term]:
        return sorted((t for t in self.terms if not term_variables(t)), key=pretty_term)

    def open_terms(self) -> list[Term]:
        return sorted((t for t in self.terms if term_variables(t)), key=pretty_term)

    def pretty(self) -> list[str]:
        return sorted(pretty_term(t) for t in self.terms)


_TRUE_TERM = App("true")
_FALSE_TERM = App("false")


def normalize_witness(terms: set[Term]) -> Witness:
    canon = {canonical_vterm(t) for t in terms}
    closed: set[Term] = set()
    for t in canon:
        closed |= term_subterms(t)
    closed |= {_TRUE_TERM, _FALSE_TERM}
    if not any(isinstance(t, Var) for t in closed):
        closed.add(Var("v1"))
    return Witness(frozenset(canonical_vterm(t) for t in closed))


def _witness_term_raw(t: Term, external: ExternalVocabulary) -> set[Term]:
    if not isinstance(t, App):
        raise AsmError("witnesses are defined for closed core terms")
    out = {canonical_vterm(shadow(t, external)[0])}
    for a in t.args:
        out |= _witness_term_raw(a, external)
    return out


def _witness_guard_raw(g: Guard, external: ExternalVocabulary) -> set[Term]:
    if isinstance(g, BoolTerm):
        return _witness_term_raw(g.term, external)
    if isinstance(g, Timing):
        return (
            _witness_term_raw(g.s, external)
            | _witness_term_raw(g.t, external)
            | {_TRUE_TERM, _FALSE_TERM}
        )
    if isinstance(g, (KAnd, KOr)):
        return (
            _witness_guard_raw(g.left, external)
            | _witness_guard_raw(g.right, external)
            | {_TRUE_TERM, _FALSE_TERM}
        )
    if isinstance(g, KNot):
        return _witness_guard_raw(g.guard, external) | {_TRUE_TERM, _FALSE_TERM}
    raise AsmError(f"witnesses need core guards, got {type(g).__name__}")


def _witness_rule_raw(r: Rule, external: ExternalVocabulary) -> set[Term]:
    if isinstance(r, Update):
        out: set[Term] = set()
        for t in (*r.args, r.rhs):
            out |= _witness_term_raw(t, external)
        return out
    if isinstance(r, Issue):
        out = set()
        for t in r.args:
            out |= _witness_term_raw(t, external)
        return out
    if isinstance(r, Fail):
        return set()
    if isinstance(r, Cond):
        if r.else_rule is None:
            raise AsmError("witnesses need core rules (missing else branch)")
        return (
            _witness_guard_raw(r.guard, external)
            | _witness_rule_raw(r.then_rule, external)
            | _witness_rule_raw(r.else_rule, external)
            | {_TRUE_TERM, _FALSE_TERM}
        )
    if isinstance(r, Par):
        out = set()
        for c in r.rules:
            out |= _witness_rule_raw(c, external)
        return out
    raise AsmError(f"witnesses need core rules, got {type(r).__name__}")


def witness_term(t: Term, external: ExternalVocabulary) -> Witness:
    return normalize_witness(_witness_term_raw(t, external))


def witness_guard(g: Guard, external: ExternalVocabulary) -> Witness:
    return normalize_witness(_witness_guard_raw(g, external))


def witness_rule(r: Rule, external: ExternalVocabulary) -> Witness:
    return normalize_witness(_witness_rule_raw(r, external))


# ---------------------------------------------------------------------------
# State-term evaluation and agreement
# ---------------------------------------------------------------------------

def eval_state_term(structure, term: Term, env: dict[str, str]) -> str:
    """Evaluate a variable-bearing state term under an assignment."""
    if isinstance(term, Var):
        try:
            return env[term.name]
        except KeyError:
            raise AsmError(f"no value for variable {term.name}") from None
    if not isinstance(term, App):
        raise AsmError("state terms contain only applications and variables")
    vals = tuple(eval_state_term(structure, a, env) for a in term.args)
    return structure.lookup(term.head, vals)


class _TracingStructure:
    """Delegates lookups and records the locations that were read."""

    def __init__(self, structure: Structure):
        self._structure = structure
        self.reads: set[tuple[str, tuple[str, ...]]] = set()

    def lookup(self, name: str, args: Sequence[str]) -> str:
        self.reads.add((name, tuple(args)))
        return self._structure.lookup(name, args)


def _witness_assignments(term: Term, replies: Sequence[str]):
    names = term_variables(term)
    if not names:
        yield {}
        return
    for combo in itertools.product(replies, repeat=len(names)):
        yield dict(zip(names, combo))


def agree_on_witness(x1: Structure, x2: Structure, witness: Witness, history: History) -> bool:
    """Equal witness-term values in both states, for assignments into the replies."""
    replies = sorted(history.replies())
    for term in witness.terms:
        for env in _witness_assignments(term, replies):
            if eval_state_term(x1, term, env) != eval_state_term(x2, term, env):
                return False
    return True


def witness_reads(
    structure: Structure, witness: Witness, history: History
) -> set[tuple[str, tuple[str, ...]]]:
    """Locations read while evaluating all witness terms under all assignments."""
    tracer = _TracingStructure(structure)
    replies = sorted(history.replies())
    for term in witness.terms:
        for env in _witness_assignments(term, replies):
            eval_state_term(tracer, term, env)
    return tracer.reads


# ---------------------------------------------------------------------------
# Exhaustive small-world history enumeration
# ---------------------------------------------------------------------------

def enumerate_histories(
    structure: Structure,
    program: Program,
    replies: Sequence[str],
    max_len: int,
    stop_at_final: bool = False,
) -> list[History]:
    """All coherent histories up to ``max_len`` rounds over the reply pool.

    Every round answers a nonempty subset of the currently pending queries,
    with each query given one reply from the pool.
    """
    from .engine import pending as pending_of

    rule = _core(program)
    out: list[History] = []
    frontier: list[History] = [History()]
    while frontier:
        h = frontier.pop()
        out.append(h)
        if len(h) >= max_len:
            continue
        if stop_at_final:
            ev = Evaluator(structure, h, program.external)
            if ev.rule(rule).final:
                continue
        pend = sorted(pending_of(structure, h, program))
        for size in range(1, len(pend) + 1):
            for queries in itertools.combinations(pend, size):
                for combo in itertools.product(replies, repeat=size):
                    frontier.append(h.extend(list(zip(queries, combo))))
    return out


def _core(program: Program) -> Rule:
    return program.rule if is_core(program.rule) else desugar(program.rule)


# ---------------------------------------------------------------------------
# The law-checking harness
# ---------------------------------------------------------------------------

@dataclass
class CheckConfig:
    seed: int = 0
    cases: int = 100
    reply_universe: Optional[list[str]] = None
    max_len: int = 3
    evaluator_factory: type = Evaluator
    bound_fn: Callable[[Rule], int] = None  # defaults to bound_rule
    witness_fn: Callable[[Rule, ExternalVocabulary], Witness] = None  # defaults to witness_rule
    checks: Optional[list[str]] = None  # subset of CHECK_NAMES; None means all

    def __post_init__(self):
        if self.bound_fn is None:
            self.bound_fn = bound_rule
        if self.witness_fn is None:
            self.witness_fn = witness_rule


@dataclass
class Failure:
    seed: int
    shrunk_input: dict
    expected: str
    got: str

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "shrunk_input": self.shrunk_input,
            "expected": self.expected,
            "got": self.got,
        }


@dataclass
class CheckReport:
    check: str
    cases: int
    failures: list[Failure] = dc_field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {
            "check": self.check,
            "cases": self.cases,
            "failures": [f.to_json() for f in self.failures],
        }


@dataclass
class Report:
    reports: list[CheckReport]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.reports)

    def to_json(self) -> list:
        return [r.to_json() for r in self.reports]

    def summary(self) -> str:
        lines = []
        for r in self.reports:
            status = "pass" if r.ok else f"FAIL ({len(r.failures)} failures)"
            lines.append(f"{r.check}: {r.cases} cases: {status}")
        return "\n".join(lines)


def _gen_case(rng: random.Random, program: Program, config: CheckConfig):
    structure = gens.gen_structure(rng, program)
    if rng.random() < 0.5:
        history = gens.gen_coherent_history(
            rng, structure, program, config.max_len, config.reply_universe
        )
    else:
        history = gens.gen_arbitrary_history(rng, structure, program, config.max_len)
    return structure, history


def _fmt_outcome(out) -> str:
    return (
        f"caused={sorted(q.pretty() for q in out.caused)} final={out.final} "
        f"verdict={out.verdict.value} updates={out.updates.to_json()} clash={out.clash}"
    )


def _check_value_iff_no_query(ev, rule, structure, history, program, rng):
    for t in gens.subterms_of_rule(rule):
        res = ev.term(t)
        if (res.value is not None) != (not res.caused):
            return ("value defined iff no caused queries", f"term {pretty_term(t)}: {res}")
    for g in gens.subguards_of_rule(rule):
        res = ev.guard(g)
        if (res.truth is not None) != (not res.caused):
            return ("truth defined iff no caused queries", f"guard: {res}")
    return None


def _check_no_repeat(ev, rule, structure, history, program, rng):
    dom = history.domain()
    for t in gens.subterms_of_rule(rule):
        hit = ev.term(t).caused & dom
        if hit:
            return ("caused queries are unanswered", f"term re-caused {sorted(q.pretty() for q in hit)}")
    for g in gens.subguards_of_rule(rule):
        hit = ev.guard(g).caused & dom
        if hit:
            return ("caused queries are unanswered", f"guard re-caused {sorted(q.pretty() for q in hit)}")
    hit = ev.rule(rule).caused & dom
    if hit:
        return ("caused queries are unanswered", f"rule re-caused {sorted(q.pretty() for q in hit)}")
    return None


def _check_monotonicity(ev, rule, structure, history, program, rng):
    full = len(history)
    for k in range(full):
        for t in gens.subterms_of_rule(rule):
            early, late = ev.term(t, k), ev.term(t, full)
            if early.value is not None and early.value != late.value:
                return ("term values persist under extension", f"{pretty_term(t)}: {early.value} -> {late.value}")
            if early.qvalue is not None and early.qvalue != late.qvalue:
                return ("query-values persist under extension", pretty_term(t))
        for g in gens.subguards_of_rule(rule):
            early_g, late_g = ev.guard(g, k), ev.guard(g, full)
            if early_g.truth is not None and early_g.truth != late_g.truth:
                return ("guard truth persists under extension", f"{early_g.truth} -> {late_g.truth}")
        early_r, late_r = ev.rule(rule, k), ev.rule(rule, full)
        if early_r.final and not late_r.final:
            return ("finality persists under extension", "final -> not final")
        if early_r.final and early_r.verdict != late_r.verdict:
            return ("verdicts persist under extension", f"{early_r.verdict} -> {late_r.verdict}")
        if not early_r.updates.issubset(late_r.updates):
            return ("update sets grow under extension", "updates shrank")
    return None


def _subrules(rule: Rule) -> list[Rule]:
    out = [rule]
    if isinstance(rule, Cond):
        out += _subrules(rule.then_rule)
        if rule.else_rule is not None:
            out += _subrules(rule.else_rule)
    elif isinstance(rule, Par):
        for c in rule.rules:
            out += _subrules(c)
    return out


def _check_no_clash(ev, rule, structure, history, program, rng):
    for sub in _subrules(rule):
        out = ev.rule(sub)
        if out.verdict is Verdict.SUCCESS and out.clash:
            return ("success implies no clash", _fmt_outcome(out))
    return None


def _check_iso_equivariance(ev, rule, structure, history, program, rng):
    mapping = gens.gen_bijection(rng, structure)
    mapped_structure = apply_iso(structure, mapping)
    mapped_history = apply_iso(history, mapping)
    factory = type(ev)
    ev2 = factory(mapped_structure, mapped_history, program.external)
    out1, out2 = ev.rule(rule), ev2.rule(rule)
    want_caused = frozenset(apply_iso(q, mapping) for q in out1.caused)
    if want_caused != out2.caused:
        return ("renamed caused set", f"{sorted(q.pretty() for q in out2.caused)}")
    if (out1.final, out1.verdict) != (out2.final, out2.verdict):
        return ("same finality and verdict under renaming", _fmt_outcome(out2))
    if apply_iso(out1.updates, mapping).updates != out2.updates.updates:
        return ("renamed update set", f"{out2.updates.to_json()}")
    return None


def _permute_pars(rule: Rule, rng: random.Random) -> Rule:
    if isinstance(rule, Cond):
        else_rule = _permute_pars(rule.else_rule, rng) if rule.else_rule is not None else None
        return Cond(rule.guard, _permute_pars(rule.then_rule, rng), else_rule)
    if isinstance(rule, Par):
        perm = [_permute_pars(c, rng) for c in rule.rules]
        rng.shuffle(perm)
        return Par(tuple(perm))
    return rule


def _check_par_permutation(ev, rule, structure, history, program, rng):
    permuted = _permute_pars(rule, rng)
    out1 = ev.rule(rule)
    out2 = type(ev)(structure, history, program.external).rule(permuted)
    if (out1.caused, out1.final, out1.verdict, out1.updates.updates, out1.clash) != (
        out2.caused, out2.final, out2.verdict, out2.updates.updates, out2.clash
    ):
        return ("permutation-invariant parallel outcome", _fmt_outcome(out2))
    return None


def _issued_with(ev_factory, structure, history, program, rule) -> frozenset:
    out: set = set()
    ev = ev_factory(structure, history, program.external)
    for m in range(len(history) + 1):
        out |= ev.rule(rule, m).caused
    return frozenset(out)


def _check_bounded_work(ev, rule, structure, history, program, rng, bound_fn):
    bound = bound_fn(rule)
    got = len(_issued_with(type(ev), structure, history, program, rule))
    if got > bound:
        return (f"|issued| <= {bound}", f"|issued| = {got}")
    return None


def _check_witness_agreement(ev, rule, structure, history, program, rng, witness_fn):
    witness = witness_fn(rule, program.external)
    try:
        reads = witness_reads(structure, witness, history)
    except AsmError:
        return None  # witness refers to symbols absent from this vocabulary
    elems = sorted(structure.elements)
    candidates = []
    for sym in program.vocabulary.symbols:
        if sym.name in ("true", "false", "undef", "Boole", "Equal", "And", "Or", "Not"):
            continue
        if sym.arity > 1:
            continue
        tuples = [()] if sym.arity == 0 else [(e,) for e in elems]
        for args in tuples:
            if (sym.name, args) not in reads:
                candidates.append((sym, args))
    if not candidates:
        return None
    sym, args = candidates[rng.randrange(len(candidates))]
    current = structure.lookup(sym.name, args)
    pool = ["true", "false"] if sym.relational else elems
    others = [e for e in pool if e != current]
    if not others:
        return None
    tables = {key: dict(tab) for key, tab in _table_pairs(structure)}
    tables.setdefault((sym.name, sym.arity), {})[args] = rng.choice(others)
    mutated = Structure(structure.vocabulary, structure.elements, tables)
    if not agree_on_witness(structure, mutated, witness, history):
        return None  # the location was witness-visible after all; not an agreeing pair
    out1 = ev.rule(rule)
    out2 = type(ev)(mutated, history, program.external).rule(rule)
    same = (out1.caused, out1.final, out1.verdict, out1.updates.updates) == (
        out2.caused, out2.final, out2.verdict, out2.updates.updates
    )
    if not same:
        return ("agreement on the witness forces identical outcomes", _fmt_outcome(out2))
    return None


def _table_pairs(structure: Structure):
    tables: dict[tuple[str, int], dict[tuple[str, ...], str]] = {}
    for name, arity, args, value in structure.table_items():
        tables.setdefault((name, arity), {})[args] = value
    return list(tables.items())


def collect_agreeing_pairs(
    program: Program,
    seed: int,
    want: int,
    max_len: int = 3,
    witness: Optional[Witness] = None,
) -> list[tuple[Structure, Structure, History]]:
    """Construct state pairs agreeing on the rule's witness under one history.

    Each second state differs from the first at one location the witness never
    reads; agreement is then verified by evaluating every witness term under
    every assignment into the history's replies.
    """
    rule = _core(program)
    core_program = Program(program.vocabulary, program.labels, program.external, rule)
    w = witness if witness is not None else witness_rule(rule, program.external)
    out: list[tuple[Structure, Structure, History]] = []
    rng = random.Random(seed)
    attempts = 0
    while len(out) < want and attempts < want * 40:
        attempts += 1
        structure = gens.gen_structure(rng, core_program)
        history = gens.gen_coherent_history(rng, structure, core_program, max_len)
        reads = witness_reads(structure, w, history)
        elems = sorted(structure.elements)
        candidates = []
        for sym in core_program.vocabulary.symbols:
            if sym.name in ("true", "false", "undef", "Boole", "Equal", "And", "Or", "Not"):
                continue
            if sym.arity > 1:
                continue
            for args in ([()] if sym.arity == 0 else [(e,) for e in elems]):
                if (sym.name, args) not in reads:
                    candidates.append((sym, args))
        if not candidates:
            continue
        sym, args = candidates[rng.randrange(len(candidates))]
        current = structure.lookup(sym.name, args)
        pool = ["true", "false"] if sym.relational else elems
        others = [e for e in pool if e != current]
        if not others:
            continue
        tables = {key: dict(tab) for key, tab in _table_pairs(structure)}
        tables.setdefault((sym.name, sym.arity), {})[args] = rng.choice(others)
        mutated = Structure(structure.vocabulary, structure.elements, tables)
        if agree_on_witness(structure, mutated, w, history):
            out.append((structure, mutated, history))
    return out


CHECK_NAMES = [
    "value_iff_no_query",
    "no_repeat",
    "monotonicity",
    "no_clash",
    "iso_equivariance",
    "par_permutation",
    "bounded_work",
    "witness_agreement",
]


def check_lemmas(program: Program, config: CheckConfig) -> Report:
    """Run every law over ``config.cases`` random cases; report failures.

    Failing cases are shrunk by truncating the history to the shortest failing
    prefix before being reported.
    """
    rule = _core(program)
    core_program = Program(program.vocabulary, program.labels, program.external, rule)

    def run_check(name: str) -> CheckReport:
        report = CheckReport(check=name, cases=config.cases)
        for i in range(config.cases):
            case_seed = (config.seed * 1_000_003 + i) & 0x7FFFFFFF
            rng = random.Random((name, case_seed).__repr__())
            structure, history = _gen_case(rng, core_program, config)
            verdict = _run_one(name, rng, structure, history, core_program, rule, config)
            if verdict is not None:
                expected, got = verdict
                shrunk = _shrink(name, rng, structure, history, core_program, rule, config)
                report.failures.append(
                    Failure(
                        seed=case_seed,
                        shrunk_input={
                            "history": shrunk.to_json(),
                            "elements": sorted(structure.elements),
                        },
                        expected=expected,
                        got=got,
                    )
                )
        return report

    names = config.checks if config.checks is not None else CHECK_NAMES
    return Report([run_check(n) for n in names])


def _run_one(name, rng, structure, history, program, rule, config):
    ev = config.evaluator_factory(structure, history, program.external)
    if name == "value_iff_no_query":
        return _check_value_iff_no_query(ev, rule, structure, history, program, rng)
    if name == "no_repeat":
        return _check_no_repeat(ev, rule, structure, history, program, rng)
    if name == "monotonicity":
        return _check_monotonicity(ev, rule, structure, history, program, rng)
    if name == "no_clash":
        return _check_no_clash(ev, rule, structure, history, program, rng)
    if name == "iso_equivariance":
        return _check_iso_equivariance(ev, rule, structure, history, program, rng)
    if name == "par_permutation":
        return _check_par_permutation(ev, rule, structure, history, program, rng)
    if name == "bounded_work":
        return _check_bounded_work(ev, rule, structure, history, program, rng, config.bound_fn)
    if name == "witness_agreement":
        return _check_witness_agreement(
            ev, rule, structure, history, program, rng, config.witness_fn
        )
    raise AsmError(f"unknown check {name!r}")


def _shrink(name, rng, structure, history, program, rule, config) -> History:
    """Shortest history prefix that still fails (rng state is not replayed
    exactly for randomized checks, so shrinking is best-effort there)."""
    best = history
    for m in range(len(history)):
        candidate = history.prefix(m)
        rng2 = random.Random(0)
        if _run_one(name, rng2, structure, candidate, program, rule, config) is not None:
            best = candidate
            break
    return best

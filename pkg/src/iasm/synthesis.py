"""Synthesis of a guarded-rule program from a black-box behavioral oracle.

Given an oracle exposing caused queries, finality, verdicts, and update sets
over (state, history) pairs, together with a work bound B and an exploration
witness W, this module reconstructs an equivalent program at desk scale:

* ``standard_templates`` builds one external symbol per query shape of length
  at most B, so every short query decomposes uniquely.
* ``critical_terms`` generates the terms of bounded level whose values are the
  only state elements the oracle can reach after a bounded interaction.
* ``describe`` captures everything the oracle can see of an attainable pair as
  a canonical conjunction of (in)equalities and reply-timing facts between
  critical terms.
* ``synthesize`` assembles the program: one guarded component per attainable
  description, with issue/update/fail bodies at the final ones.
* ``check_equivalence`` replays all jointly attainable pairs and compares
  issued queries, finality, verdicts, and updates.

The construction is exponential by nature; caps raise ``Explosion`` rather
than grinding forever.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .analysis import (
    Witness,
    bound_rule,
    eval_state_term,
    normalize_witness,
    term_variables,
    witness_rule,
)
from .engine import ReplyUniverse, replies_for
from .engine import issued as program_issued
from .model import (
    AsmError,
    ExternalVocabulary,
    History,
    Query,
    Structure,
    Template,
    UpdateSet,
    Vocabulary,
    canonical_json,
)
from .semantics import Evaluator, Verdict, eval_rule
from .syntax import (
    App,
    BoolTerm,
    Cond,
    Fail,
    Guard,
    Issue,
    KNot,
    KAnd,
    Par,
    Program,
    Rule,
    Term,
    Timing,
    Update,
    Var,
    desugar,
    is_core,
    pretty_guard,
    pretty_term,
    validate,
)


class SynthesisError(AsmError):
    pass


class WitnessTooWeak(SynthesisError):
    pass


class NotAttainable(SynthesisError):
    pass


class Explosion(SynthesisError):
    pass


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

class AlgorithmOracle:
    """Behavioral interface consumed by synthesis.

    ``causes(X, h)`` is the set of queries the history causes in the state;
    ``is_final`` / ``verdict`` / ``updates`` judge finished steps.  ``bound``
    bounds both query length and attainable history length; ``witness`` is a
    bounded-exploration witness of state terms.
    """

    vocabulary: Vocabulary
    labels: frozenset[str]
    bound: int
    witness: Witness
    probes: list[Structure]
    reply_universe: ReplyUniverse

    def causes(self, structure: Structure, history: History) -> frozenset[Query]:
        raise NotImplementedError

    def is_final(self, structure: Structure, history: History) -> bool:
        raise NotImplementedError

    def verdict(self, structure: Structure, history: History) -> Verdict:
        raise NotImplementedError

    def updates(self, structure: Structure, history: History) -> UpdateSet:
        raise NotImplementedError


class ProgramOracle(AlgorithmOracle):
    """Wraps an interpreted program as a behavioral oracle."""

    def __init__(
        self,
        program: Program,
        probes: Sequence[Structure],
        reply_universe: ReplyUniverse,
        bound: Optional[int] = None,
        witness: Optional[Witness] = None,
    ):
        rule = program.rule if is_core(program.rule) else desugar(program.rule)
        self.program = Program(program.vocabulary, program.labels, program.external, rule)
        self.vocabulary = program.vocabulary
        self.labels = program.labels
        self.bound = bound if bound is not None else bound_rule(rule)
        self.witness = witness if witness is not None else witness_rule(rule, program.external)
        self.probes = list(probes)
        self.reply_universe = dict(reply_universe)

    def _eval(self, structure, history):
        return Evaluator(structure, history, self.program.external).rule(self.program.rule)

    def causes(self, structure, history):
        return frozenset(self._eval(structure, history).caused)

    def is_final(self, structure, history):
        return self._eval(structure, history).final

    def verdict(self, structure, history):
        out = self._eval(structure, history)
        if not out.final:
            raise NotAttainable("verdict undefined before finality")
        return out.verdict

    def updates(self, structure, history):
        out = self._eval(structure, history)
        if out.verdict is not Verdict.SUCCESS:
            raise NotAttainable("updates undefined unless successful")
        return out.updates


class TableOracle(AlgorithmOracle):
    """Declarative oracle: behavior looked up in a finite table.

    Keys are (probe index, canonical history JSON).  Every pair reachable by
    coherent growth from a probe must be present.
    """

    def __init__(
        self,
        vocabulary: Vocabulary,
        labels: frozenset[str],
        bound: int,
        witness: Witness,
        probes: Sequence[Structure],
        reply_universe: ReplyUniverse,
        behavior: Mapping[tuple[int, str], dict],
    ):
        self.vocabulary = vocabulary
        self.labels = labels
        self.bound = bound
        self.witness = witness
        self.probes = list(probes)
        self.reply_universe = dict(reply_universe)
        self._behavior = dict(behavior)
        self._probe_index = {id(p): i for i, p in enumerate(self.probes)}

    def _row(self, structure, history) -> dict:
        idx = self._probe_index.get(id(structure))
        if idx is None:
            for i, p in enumerate(self.probes):
                if p == structure:
                    idx = i
                    break
        if idx is None:
            raise NotAttainable("state is not one of the oracle's probes")
        key = (idx, canonical_json(history.to_json()))
        row = self._behavior.get(key)
        if row is None:
            raise NotAttainable(f"behavior table has no row for probe {idx}, history {key[1]}")
        return row

    def causes(self, structure, history):
        return frozenset(Query.decode(q) for q in self._row(structure, history)["causes"])

    def is_final(self, structure, history):
        return bool(self._row(structure, history)["final"])

    def verdict(self, structure, history):
        v = self._row(structure, history).get("verdict")
        if v not in ("success", "fail"):
            raise NotAttainable("verdict undefined before finality")
        return Verdict.SUCCESS if v == "success" else Verdict.FAIL

    def updates(self, structure, history):
        return UpdateSet.from_json(self._row(structure, history).get("updates", []))

    @staticmethod
    def from_json(data: dict) -> "TableOracle":
        from .syntax import parse_term_text

        probes = [Structure.from_json(p) for p in data["probes"]]
        vocab = probes[0].vocabulary if probes else Vocabulary()
        for p in probes[1:]:
            vocab = vocab.merged(p.vocabulary)

        def to_state_term(text: str) -> Term:
            term = parse_term_text(text)

            def fix(t: Term) -> Term:
                if isinstance(t, App) and not t.args and not vocab.has_name(t.head):
                    return Var(t.head)
                if isinstance(t, App):
                    return App(t.head, tuple(fix(a) for a in t.args))
                return t

            return fix(term)

        witness = normalize_witness({to_state_term(s) for s in data.get("W", [])})
        behavior: dict[tuple[int, str], dict] = {}
        for row in data.get("behavior", []):
            key = (int(row["state"]), canonical_json(History.from_json(row["history"]).to_json()))
            behavior[key] = row
        labels = frozenset(data.get("labels", []))
        return TableOracle(
            vocab,
            labels,
            int(data["B"]),
            witness,
            probes,
            data.get("replyUniverse", {}),
            behavior,
        )


def oracle_issued(oracle: AlgorithmOracle, structure: Structure, history: History) -> frozenset[Query]:
    out: set[Query] = set()
    for m in range(len(history) + 1):
        out |= oracle.causes(structure, history.prefix(m))
    return frozenset(out)


def oracle_coherent(oracle: AlgorithmOracle, structure: Structure, history: History) -> bool:
    issued_so_far: set[Query] = set()
    for j, rnd in enumerate(history.rounds):
        issued_so_far |= oracle.causes(structure, history.prefix(j))
        for q, _ in rnd:
            if q not in issued_so_far:
                return False
    return True


def validate_oracle(oracle: AlgorithmOracle, max_len: int = 2, samples: int = 50) -> list[str]:
    """Spot-check oracle invariants: fresh causes, short queries, equivariance."""
    import random

    from .generators import gen_bijection
    from .model import apply_iso

    problems: list[str] = []
    rng = random.Random(20_105)
    pairs = enumerate_attainable(oracle, max_len)
    for structure, history in pairs[:samples]:
        caused = oracle.causes(structure, history)
        again = caused & history.domain()
        if again:
            problems.append(f"caused query already answered: {sorted(q.pretty() for q in again)}")
        for q in caused:
            if len(q.tokens) > oracle.bound:
                problems.append(f"query longer than the bound: {q.pretty()}")
        mapping = gen_bijection(rng, structure)
        mapped = apply_iso(structure, mapping)
        try:
            mapped_caused = oracle.causes(mapped, apply_iso(history, mapping))
        except NotAttainable:
            continue  # table oracles only know their probes
        want = frozenset(apply_iso(q, mapping) for q in caused)
        if mapped_caused != want:
            problems.append("causes is not isomorphism-equivariant")
    return problems


# ---------------------------------------------------------------------------
# Standard templates
# ---------------------------------------------------------------------------

def standard_templates(labels: Iterable[str], bound: int) -> ExternalVocabulary:
    """One external symbol per tuple of length <= bound made of labels and an
    in-order initial segment of placeholders.  Every query of length <= bound
    instantiates exactly one of them."""
    label_list = sorted(set(labels))
    entries: list[tuple[str, Template]] = []
    for length in range(bound + 1):
        for mask in itertools.product([0, 1], repeat=length):
            n_placeholders = sum(mask)
            label_slots = length - n_placeholders
            for combo in itertools.product(label_list, repeat=label_slots):
                items: list[str] = []
                next_placeholder = 1
                label_iter = iter(combo)
                for is_placeholder in mask:
                    if is_placeholder:
                        items.append(f"#{next_placeholder}")
                        next_placeholder += 1
                    else:
                        items.append(next(label_iter))
                tpl = Template.of(*items)
                entries.append((_template_symbol_name(tpl), tpl))
    return ExternalVocabulary(entries)


def _template_symbol_name(tpl: Template) -> str:
    parts = []
    for kind, payload in tpl.items:
        parts.append(f"l{payload}" if kind == "l" else f"x{payload}")
    return "qt" + "".join("__" + p for p in parts)


def decompose_query(q: Query, std: ExternalVocabulary) -> Optional[tuple[str, tuple[str, ...]]]:
    """The unique standard symbol and element arguments producing this query."""
    items: list[str] = []
    args: list[str] = []
    for kind, text in q.tokens:
        if kind == "l":
            items.append(text)
        else:
            args.append(text)
            items.append(f"#{len(args)}")
    try:
        tpl = Template.of(*items)
    except AsmError:
        return None
    name = _template_symbol_name(tpl)
    if (name, tpl.arity) not in std:
        return None
    return name, tuple(args)


# ---------------------------------------------------------------------------
# Critical terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalTerm:
    term: Term
    level: int


def critical_terms(
    witness: Witness,
    external: ExternalVocabulary,
    max_level: int,
    cap: int = 20_000,
) -> set[CriticalTerm]:
    """All critical terms up to the level, by brute-force enumeration.

    Level 0 terms are the closed witness terms; level n+1 query-terms apply an
    external symbol to critical terms of level <= n; substituting query-terms
    into open witness terms yields critical terms at the max substituted level.
    """
    levels: dict[Term, int] = {t: 0 for t in witness.closed_terms()}
    qterm_levels: dict[Term, int] = {}
    open_terms = witness.open_terms()
    for level in range(1, max_level + 1):
        prev = [t for t, lv in levels.items() if lv <= level - 1]
        for name, arity, _tpl in external.entries:
            for combo in itertools.product(prev, repeat=arity):
                qt = App(name, combo)
                if qt not in qterm_levels:
                    qterm_levels[qt] = level
                if len(qterm_levels) > cap:
                    raise Explosion(f"more than {cap} critical query-terms")
        qterms = list(qterm_levels)
        for t in open_terms:
            names = term_variables(t)
            for combo in itertools.product(qterms, repeat=len(names)):
                inst = _substitute(t, dict(zip(names, combo)))
                inst_level = max(qterm_levels[c] for c in combo)
                if inst not in levels or levels[inst] > inst_level:
                    levels[inst] = inst_level
                if len(levels) > cap:
                    raise Explosion(f"more than {cap} critical terms")
    out = {CriticalTerm(t, lv) for t, lv in levels.items()}
    out |= {CriticalTerm(t, lv) for t, lv in qterm_levels.items() if t not in levels}
    return {ct for ct in out if ct.level <= max_level}


def _substitute(t: Term, env: dict[str, Term]) -> Term:
    if isinstance(t, Var):
        return env[t.name]
    assert isinstance(t, App)
    return App(t.head, tuple(_substitute(a, env) for a in t.args))


# ---------------------------------------------------------------------------
# Valued critical terms (value-directed enumeration)
# ---------------------------------------------------------------------------

@dataclass
class _ValuedTerms:
    """Critical terms that have values in one (state, history) pair, by level."""

    values: dict[Term, str]
    levels: dict[Term, int]
    valued_qterms: dict[Term, str]
    qterm_levels: dict[Term, int]

    def by_value(self, max_level: int) -> dict[str, list[Term]]:
        out: dict[str, list[Term]] = {}
        for t, v in self.values.items():
            if self.levels[t] <= max_level:
                out.setdefault(v, []).append(t)
        for vs in out.values():
            vs.sort(key=pretty_term)
        return out


def _valued_critical_terms(
    oracle: AlgorithmOracle,
    std: ExternalVocabulary,
    structure: Structure,
    history: History,
    max_level: int,
    cap: int = 100_000,
) -> _ValuedTerms:
    values: dict[Term, str] = {}
    levels: dict[Term, int] = {}
    valued_qterms: dict[Term, str] = {}
    qterm_levels: dict[Term, int] = {}
    for t in oracle.witness.closed_terms():
        values[t] = eval_state_term(structure, t, {})
        levels[t] = 0
    open_terms = oracle.witness.open_terms()
    for level in range(1, max_level + 1):
        by_value: dict[str, list[Term]] = {}
        for t, v in values.items():
            if levels[t] <= level - 1:
                by_value.setdefault(v, []).append(t)
        added = False
        for q in sorted(history.domain()):
            dec = decompose_query(q, std)
            if dec is None:
                continue
            name, elem_args = dec
            candidate_lists = [by_value.get(a, []) for a in elem_args]
            if any(not c for c in candidate_lists):
                continue
            count = 1
            for c in candidate_lists:
                count *= len(c)
            if count > cap:
                raise Explosion(f"{count} query-term decompositions for {q.pretty()}")
            reply = history.reply(q)
            for combo in itertools.product(*candidate_lists):
                qt = App(name, tuple(combo))
                if qt not in qterm_levels or qterm_levels[qt] > level:
                    qterm_levels[qt] = level
                    valued_qterms[qt] = reply
                    added = True
        qterms = sorted(valued_qterms, key=pretty_term)
        for t in open_terms:
            names = term_variables(t)
            if len(qterms) ** len(names) > cap:
                raise Explosion("witness substitution space exceeds the cap")
            for combo in itertools.product(qterms, repeat=len(names)):
                inst = _substitute(t, dict(zip(names, combo)))
                lvl = max((qterm_levels[c] for c in combo), default=0)
                env = {n: valued_qterms[c] for n, c in zip(names, combo)}
                if inst not in levels or levels[inst] > lvl:
                    values[inst] = eval_state_term(structure, t, env)
                    levels[inst] = lvl
        if not added and level > len(history):
            break
        if len(values) > cap:
            raise Explosion(f"more than {cap} valued critical terms")
    return _ValuedTerms(values, levels, valued_qterms, qterm_levels)


def _issued_qterm_candidates(
    queries: Iterable[Query],
    valued: _ValuedTerms,
    std: ExternalVocabulary,
    arg_level: int,
    cap: int = 100_000,
) -> dict[Term, Query]:
    """Query-terms (with valued arguments of bounded level) denoting the queries."""
    by_value = valued.by_value(arg_level)
    out: dict[Term, Query] = {}
    for q in sorted(queries):
        dec = decompose_query(q, std)
        if dec is None:
            continue
        name, elem_args = dec
        candidate_lists = [by_value.get(a, []) for a in elem_args]
        if any(not c for c in candidate_lists):
            continue
        count = 1
        for c in candidate_lists:
            count *= len(c)
        if count > cap:
            raise Explosion(f"{count} query-term decompositions for {q.pretty()}")
        for combo in itertools.product(*candidate_lists):
            out[App(name, tuple(combo))] = q
    return out


# ---------------------------------------------------------------------------
# Descriptions
# ---------------------------------------------------------------------------

_KIND_RANK = {"eq": 0, "neq": 1, "preceq": 2, "prec": 3}


@dataclass(frozen=True)
class Description:
    """Canonical conjunction describing an attainable (state, history) pair."""

    conjuncts: tuple[Guard, ...]
    depth: int

    def guard(self) -> Guard:
        return _balanced_conjunction(self.conjuncts)

    def pretty(self) -> str:
        return pretty_guard(self.guard())


def _balanced_conjunction(conjuncts: Sequence[Guard]) -> Guard:
    if not conjuncts:
        return BoolTerm(App("true"))
    if len(conjuncts) == 1:
        return conjuncts[0]
    mid = len(conjuncts) // 2
    return KAnd(
        _balanced_conjunction(conjuncts[:mid]), _balanced_conjunction(conjuncts[mid:])
    )


def describe(
    oracle: AlgorithmOracle,
    structure: Structure,
    history: History,
    std: Optional[ExternalVocabulary] = None,
    check: bool = True,
) -> Description:
    """The description of an attainable pair: all true (in)equalities between
    critical terms of level <= length, plus all true reply-timing facts between
    critical query-terms denoting previously issued queries."""
    if std is None:
        std = standard_templates(oracle.labels, oracle.bound)
    if not oracle_coherent(oracle, structure, history):
        raise NotAttainable("history is not coherent for the oracle")
    n = len(history)
    valued = _valued_critical_terms(oracle, std, structure, history, n)
    conjuncts: list[tuple[tuple[int, str, str], Guard]] = []

    terms = sorted(
        (t for t, lv in valued.levels.items() if lv <= n), key=pretty_term
    )
    for i, s in enumerate(terms):
        for t in terms[i:]:
            eq = BoolTerm(App("Equal", (s, t)))
            if valued.values[s] == valued.values[t]:
                conjuncts.append(((_KIND_RANK["eq"], pretty_term(s), pretty_term(t)), eq))
            else:
                conjuncts.append(
                    ((_KIND_RANK["neq"], pretty_term(s), pretty_term(t)), KNot(eq))
                )

    if n >= 1:
        prev_issued = oracle_issued(oracle, structure, history.prefix(n - 1))
        v_candidates = _issued_qterm_candidates(prev_issued, valued, std, n - 1)
        u_candidates = sorted(
            (t for t, lv in valued.qterm_levels.items() if lv <= n), key=pretty_term
        )
        ev = Evaluator(structure, history, std)
        for u in u_candidates:
            m_u = ev.first_defined(u)
            for v in sorted(v_candidates, key=pretty_term):
                m_v = ev.first_defined(v)
                if m_v is None or m_u <= m_v:
                    conjuncts.append(
                        (
                            (_KIND_RANK["preceq"], pretty_term(u), pretty_term(v)),
                            Timing(u, v),
                        )
                    )
                if m_v is None or m_u < m_v:
                    conjuncts.append(
                        (
                            (_KIND_RANK["prec"], pretty_term(u), pretty_term(v)),
                            KNot(Timing(v, u)),
                        )
                    )

    conjuncts.sort(key=lambda pair: pair[0])
    desc = Description(tuple(g for _k, g in conjuncts), n)
    if check:
        res = Evaluator(structure, history, std).guard(desc.guard())
        if res.truth is not True:
            raise SynthesisError("description does not hold in its own pair")
    return desc


# ---------------------------------------------------------------------------
# Attainable pair enumeration
# ---------------------------------------------------------------------------

def enumerate_attainable(
    oracle: AlgorithmOracle,
    max_len: int,
    cap: int = 200_000,
) -> list[tuple[Structure, History]]:
    """Breadth-first growth of coherent histories from each probe state.

    Each extension answers a nonempty subset of the pending queries with
    replies from the oracle's reply universe; final pairs are not extended.
    """
    out: list[tuple[Structure, History]] = []
    for probe in oracle.probes:
        frontier: list[History] = [History()]
        seen: set[History] = {History()}
        while frontier:
            h = frontier.pop(0)
            out.append((probe, h))
            if len(out) > cap:
                raise Explosion(f"more than {cap} attainable pairs")
            if len(h) >= max_len or oracle.is_final(probe, h):
                continue
            pend = sorted(oracle_issued(oracle, probe, h) - h.domain())
            for size in range(1, len(pend) + 1):
                for queries in itertools.combinations(pend, size):
                    reply_pools = [replies_for(oracle.reply_universe, q) for q in queries]
                    if any(not pool for pool in reply_pools):
                        continue
                    for combo in itertools.product(*reply_pools):
                        ext = h.extend(list(zip(queries, combo)))
                        if ext not in seen:
                            seen.add(ext)
                            frontier.append(ext)
    return out


# ---------------------------------------------------------------------------
# Program synthesis
# ---------------------------------------------------------------------------

def synthesize(
    oracle: AlgorithmOracle,
    max_len: Optional[int] = None,
    cap: int = 200_000,
) -> Program:
    """Build a program equivalent to the oracle on all attainable pairs.

    One guarded component per depth-zero description; non-final descriptions
    nest one component per successor; final descriptions carry the fail /
    issue / update payload read off the oracle.
    """
    if max_len is None:
        max_len = oracle.bound
    std = standard_templates(oracle.labels, oracle.bound)
    pairs = enumerate_attainable(oracle, max_len, cap)

    desc_of: dict[tuple[int, History], Description] = {}
    probe_index = {id(p): i for i, p in enumerate(oracle.probes)}
    pairs_by_desc: dict[Description, list[tuple[Structure, History]]] = {}
    children: dict[Description, set[Description]] = {}
    roots: set[Description] = set()

    for structure, history in pairs:
        desc = describe(oracle, structure, history, std)
        key = (probe_index[id(structure)], history)
        desc_of[key] = desc
        pairs_by_desc.setdefault(desc, []).append((structure, history))
        if len(history) == 0:
            roots.add(desc)
        else:
            parent = desc_of[(probe_index[id(structure)], history.prefix(len(history) - 1))]
            children.setdefault(parent, set()).add(desc)

    for desc, members in pairs_by_desc.items():
        finals = {oracle.is_final(s, h) for s, h in members}
        if len(finals) != 1:
            raise SynthesisError(
                "similar pairs disagree on finality; the oracle violates its witness"
            )
        if not next(iter(finals)) and desc.depth >= max_len:
            raise SynthesisError(
                f"attainable pair of length {desc.depth} is not final; "
                f"raise the bound (B={oracle.bound})"
            )

    def final_body(desc: Description) -> Rule:
        structure, history = pairs_by_desc[desc][0]
        n = len(history)
        valued = _valued_critical_terms(oracle, std, structure, history, n)
        components: list[Rule] = []
        if oracle.verdict(structure, history) is Verdict.FAIL:
            components.append(Fail())
        else:
            by_value = valued.by_value(n)
            for upd in sorted(oracle.updates(structure, history)):
                info = oracle.vocabulary.require(upd.func, len(upd.args))
                rhs_candidates = by_value.get(upd.value, [])
                if info.relational:
                    # a relational location takes a Boolean right-hand side;
                    # true/false are always in the witness, so one exists
                    rhs_candidates = [
                        t
                        for t in rhs_candidates
                        if isinstance(t, App)
                        and (marker := oracle.vocabulary.get(t.head, len(t.args)))
                        is not None
                        and marker.relational
                    ]
                lists = [by_value.get(a, []) for a in upd.args] + [rhs_candidates]
                if any(not c for c in lists):
                    raise WitnessTooWeak(
                        f"update {upd} not expressible by critical terms of level <= {n} "
                        f"(history {canonical_json(history.to_json())})"
                    )
                for combo in itertools.product(*lists):
                    components.append(Update(upd.func, tuple(combo[:-1]), combo[-1]))
        caused = oracle.causes(structure, history)
        qterms = _issued_qterm_candidates(caused, valued, std, n)
        covered = set(qterms.values())
        missing = set(caused) - covered
        if missing:
            raise WitnessTooWeak(
                f"caused queries {sorted(q.pretty() for q in missing)} not expressible "
                f"by critical query-terms of level <= {n + 1}"
            )
        for qt in sorted(qterms, key=pretty_term):
            assert isinstance(qt, App)
            components.append(Issue(qt.head, qt.args))
        unique = list(dict.fromkeys(components))
        unique.sort(key=lambda r: _rule_sort_key(r))
        return Par(tuple(unique))

    built: dict[Description, Rule] = {}

    def build(desc: Description) -> Rule:
        if desc in built:
            return built[desc]
        structure, history = pairs_by_desc[desc][0]
        if oracle.is_final(structure, history):
            body = final_body(desc)
        else:
            subs = sorted(children.get(desc, ()), key=lambda d: d.pretty())
            body = Par(tuple(build(sub) for sub in subs))
        rule = Cond(desc.guard(), body, Par(()))
        built[desc] = rule
        return rule

    top = Par(tuple(build(d) for d in sorted(roots, key=lambda d: d.pretty())))
    used = _external_heads(top)
    pruned = ExternalVocabulary(
        [(name, tpl) for name, _arity, tpl in std.entries if (name, tpl.arity) in used]
    )
    program = Program(oracle.vocabulary, oracle.labels, pruned, top)
    diags = validate(program)
    if diags:
        raise SynthesisError(f"synthesized program failed validation: {diags[0].message}")
    return program


def _rule_sort_key(rule: Rule) -> tuple:
    if isinstance(rule, Fail):
        return (0, "")
    if isinstance(rule, Update):
        return (1, pretty_term(App(rule.head, rule.args)) + " := " + pretty_term(rule.rhs))
    if isinstance(rule, Issue):
        return (2, pretty_term(App(rule.head, rule.args)))
    return (3, "")


def _external_heads(rule: Rule) -> set[tuple[str, int]]:
    out: set[tuple[str, int]] = set()

    def walk_term(t: Term) -> None:
        if isinstance(t, App):
            out.add((t.head, len(t.args)))
            for a in t.args:
                walk_term(a)

    def walk_guard(g) -> None:
        if isinstance(g, BoolTerm):
            walk_term(g.term)
        elif hasattr(g, "s"):
            walk_term(g.s)
            walk_term(g.t)
        elif hasattr(g, "left"):
            walk_guard(g.left)
            walk_guard(g.right)
        elif hasattr(g, "guard"):
            walk_guard(g.guard)

    def walk(r: Rule) -> None:
        if isinstance(r, Update):
            for a in r.args:
                walk_term(a)
            walk_term(r.rhs)
        elif isinstance(r, Issue):
            out.add((r.head, len(r.args)))
            for a in r.args:
                walk_term(a)
        elif isinstance(r, Cond):
            walk_guard(r.guard)
            walk(r.then_rule)
            if r.else_rule is not None:
                walk(r.else_rule)
        elif isinstance(r, Par):
            for c in r.rules:
                walk(c)

    walk(rule)
    return out


# ---------------------------------------------------------------------------
# Equivalence checking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    probe: int
    history: dict
    expected: str
    got: str

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "probe": self.probe,
            "history": self.history,
            "expected": self.expected,
            "got": self.got,
        }


@dataclass
class EquivalenceReport:
    pairs_checked: int
    violations: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "pairsChecked": self.pairs_checked,
            "violations": [v.to_json() for v in self.violations],
        }


def check_equivalence(
    oracle: AlgorithmOracle,
    program: Program,
    max_len: Optional[int] = None,
    cap: int = 200_000,
) -> EquivalenceReport:
    """Compare the oracle and the program on every jointly attainable pair:
    issued queries, finality and verdict, and (on success) update sets."""
    if max_len is None:
        max_len = oracle.bound
    rule = program.rule if is_core(program.rule) else desugar(program.rule)
    core = Program(program.vocabulary, program.labels, program.external, rule)
    violations: list[Violation] = []
    checked = 0
    for idx, probe in enumerate(oracle.probes):
        frontier: list[History] = [History()]
        seen: set[History] = {History()}
        while frontier:
            h = frontier.pop(0)
            checked += 1
            if checked > cap:
                raise Explosion(f"more than {cap} jointly attainable pairs")
            hist_json = h.to_json()
            issued_a = oracle_issued(oracle, probe, h)
            issued_p = program_issued(probe, h, core)
            if issued_a != issued_p:
                violations.append(
                    Violation(
                        "IssuedMismatch",
                        idx,
                        hist_json,
                        str(sorted(q.pretty() for q in issued_a)),
                        str(sorted(q.pretty() for q in issued_p)),
                    )
                )
            final_a = oracle.is_final(probe, h)
            outcome = eval_rule(probe, h, core.rule, core.external)
            if final_a != outcome.final:
                violations.append(
                    Violation("FinalityMismatch", idx, hist_json, str(final_a), str(outcome.final))
                )
            elif final_a:
                verdict_a = oracle.verdict(probe, h)
                if verdict_a != outcome.verdict:
                    violations.append(
                        Violation(
                            "VerdictMismatch", idx, hist_json,
                            verdict_a.value, outcome.verdict.value,
                        )
                    )
                elif verdict_a is Verdict.SUCCESS:
                    upd_a = oracle.updates(probe, h)
                    if upd_a.updates != outcome.updates.updates:
                        violations.append(
                            Violation(
                                "UpdateMismatch", idx, hist_json,
                                canonical_json(upd_a.to_json()),
                                canonical_json(outcome.updates.to_json()),
                            )
                        )
            if len(h) >= max_len or final_a:
                continue
            pend = sorted((issued_a & issued_p) - h.domain())
            for size in range(1, len(pend) + 1):
                for queries in itertools.combinations(pend, size):
                    pools = [replies_for(oracle.reply_universe, q) for q in queries]
                    if any(not p for p in pools):
                        continue
                    for combo in itertools.product(*pools):
                        ext = h.extend(list(zip(queries, combo)))
                        if ext not in seen:
                            seen.add(ext)
                            frontier.append(ext)
    return EquivalenceReport(checked, violations)


# ---------------------------------------------------------------------------
# Built-in desk-scale oracles
# ---------------------------------------------------------------------------

def _mini_structure(extra: Iterable[str] = ()) -> dict:
    return {
        "elements": sorted({"true", "false", "undef", *extra}),
        "functions": {},
        "dynamic": ["d0/0"],
        "relational": [],
    }


def oracle_constant_update() -> ProgramOracle:
    """Finishes immediately, writing one location."""
    from .syntax import parse_program

    text = "dynamic d0/0\nrule d0() := true\n"
    program = parse_program(text)
    probe = Structure.from_json(_mini_structure(), program.vocabulary)
    return ProgramOracle(program, [probe], {}, bound=1)


def oracle_immediate_fail() -> ProgramOracle:
    """Fails on the empty history."""
    from .syntax import parse_program

    text = "dynamic d0/0\nrule fail\n"
    program = parse_program(text)
    probe = Structure.from_json(_mini_structure(), program.vocabulary)
    return ProgramOracle(program, [probe], {}, bound=1)


def oracle_query_then_update() -> ProgramOracle:
    """Asks one question, waits for the reply, stores it."""
    from .syntax import parse_program

    text = (
        "dynamic d0/0\n"
        "label ask\n"
        "external ask/0 = [ask]\n"
        "rule if ask()! then d0() := ask() endif\n"
    )
    program = parse_program(text)
    probe = Structure.from_json(_mini_structure({"yes", "no"}), program.vocabulary)
    universe = {"*": ["yes", "no"]}
    return ProgramOracle(program, [probe], universe, bound=2)


def oracle_broker() -> ProgramOracle:
    """Two offers racing a timeout; earliest reply wins, ties prefer client 0."""
    from .syntax import parse_program

    text = (
        "static client0/0\n"
        "static client1/0\n"
        "dynamic sold/0 relational\n"
        "dynamic buyer/0\n"
        "dynamic cancelled/0 relational\n"
        "label q0, q1, t\n"
        "external q0/0 = [q0]\n"
        "external q1/0 = [q1]\n"
        "external t/0 = [t]\n"
        "rule\n"
        "if knot (q0() preceq t()) kand knot (q1() preceq t()) then\n"
        "  cancelled() := true\n"
        "else\n"
        "  if q0() preceq q1() then\n"
        "    par { sold() := true; buyer() := client0 }\n"
        "  else\n"
        "    par { sold() := true; buyer() := client1 }\n"
        "  endif\n"
        "endif\n"
    )
    program = parse_program(text)
    state_json = {
        "elements": ["c0", "c1", "false", "true", "undef", "yes"],
        "functions": {
            "client0/0": {"default": "c0", "table": []},
            "client1/0": {"default": "c1", "table": []},
        },
        "dynamic": ["sold/0", "buyer/0", "cancelled/0"],
        "relational": ["sold/0", "cancelled/0"],
    }
    probe = Structure.from_json(state_json, program.vocabulary)
    return ProgramOracle(program, [probe], {"*": ["yes"]}, bound=2)


BUILTIN_ORACLES = {
    "constant-update": oracle_constant_update,
    "immediate-fail": oracle_immediate_fail,
    "one-query-then-update": oracle_query_then_update,
    "broker": oracle_broker,
}

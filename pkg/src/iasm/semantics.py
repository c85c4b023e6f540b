"""Evaluation of terms, guards, and rules against a state and a reply history.

Every judgment is relative to a fixed structure, a template assignment for the
external symbols, and a history.  Terms may be unvalued, in which case they
cause queries; a timing guard compares the earliest history prefix at which
each side becomes evaluable and can be decided even while one side is still
unvalued.  Kleene conjunction and disjunction decide as soon as one side
forces the outcome.

The evaluator memoizes term values per prefix length within a single
evaluation context; this is observationally invisible.  Mutation hooks
(`_external_lookup`, `_timing_truth`, ...) exist so test suites can subclass
the evaluator with a deliberately broken clause and confirm the property
harness catches it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .model import (
    AsmError,
    ExternalVocabulary,
    History,
    Query,
    Structure,
    TRUE,
    FALSE,
    Update as ModelUpdate,
    UpdateSet,
    UnknownSymbol,
    instantiate_template,
)
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
    Rule,
    Term,
    Timing,
    Update,
)


class Verdict(enum.Enum):
    SUCCESS = "success"
    FAIL = "fail"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class TermResult:
    value: Optional[str]
    qvalue: Optional[Query]
    caused: frozenset[Query]


@dataclass(frozen=True)
class GuardResult:
    truth: Optional[bool]
    caused: frozenset[Query]


@dataclass(frozen=True)
class RuleOutcome:
    caused: frozenset[Query]
    final: bool
    verdict: Verdict
    updates: UpdateSet
    clash: bool


_NO_QUERIES: frozenset[Query] = frozenset()


class Evaluator:
    """Evaluation context bound to one (structure, history) pair."""

    def __init__(self, structure: Structure, history: History, external: ExternalVocabulary):
        self.structure = structure
        self.history = history
        self.external = external
        self._term_memo: dict[tuple[Term, int], TermResult] = {}
        self._first_defined_memo: dict[Term, Optional[int]] = {}

    # -- hooks (overridden only by deliberately broken test evaluators) -----

    def _state_value(self, name: str, args: tuple[str, ...]) -> str:
        return self.structure.lookup(name, args)

    def _external_lookup(self, q: Query, k: int) -> tuple[Optional[str], frozenset[Query]]:
        if self.history.answered(q, upto=k):
            return self.history.reply(q), _NO_QUERIES
        return None, frozenset([q])

    def _timing_truth(self, m_s: int, m_t: int) -> bool:
        return m_s <= m_t

    def _timing_one_sided(self, s_valued: bool) -> bool:
        return s_valued

    def _issue_caused(self, q: Query, k: int) -> frozenset[Query]:
        if self.history.answered(q, upto=k):
            return _NO_QUERIES
        return frozenset([q])

    def _par_final(self, finals: list[bool]) -> bool:
        return all(finals)

    def _par_success(self, successes: list[bool], clash: bool) -> bool:
        return all(successes) and not clash

    # -- terms ---------------------------------------------------------------

    def term(self, t: Term, k: Optional[int] = None) -> TermResult:
        if k is None:
            k = len(self.history)
        key = (t, k)
        hit = self._term_memo.get(key)
        if hit is not None:
            return hit
        res = self._term_at(t, k)
        self._term_memo[key] = res
        return res

    def _term_at(self, t: Term, k: int) -> TermResult:
        if not isinstance(t, App):
            raise AsmError(f"evaluation needs core terms, got {type(t).__name__}")
        sub = [self.term(a, k) for a in t.args]
        n = len(t.args)
        is_external = (t.head, n) in self.external
        if any(r.value is None for r in sub):
            caused = frozenset().union(*(r.caused for r in sub)) if sub else _NO_QUERIES
            return TermResult(None, None, caused)
        vals = tuple(r.value for r in sub)
        if not is_external:
            if (t.head, n) not in self.structure.vocabulary:
                raise UnknownSymbol(f"unknown symbol {t.head}/{n}")
            return TermResult(self._state_value(t.head, vals), None, _NO_QUERIES)
        tpl = self.external.get(t.head, n)
        q = instantiate_template(tpl, vals)
        value, caused = self._external_lookup(q, k)
        return TermResult(value, q, caused)

    def first_defined(self, t: Term) -> Optional[int]:
        """Least prefix length at which the term has a value, if any."""
        if t in self._first_defined_memo:
            return self._first_defined_memo[t]
        found: Optional[int] = None
        for j in range(len(self.history) + 1):
            if self.term(t, j).value is not None:
                found = j
                break
        self._first_defined_memo[t] = found
        return found

    # -- guards ---------------------------------------------------------------

    def guard(self, g: Guard, k: Optional[int] = None) -> GuardResult:
        if k is None:
            k = len(self.history)
        if isinstance(g, BoolTerm):
            res = self.term(g.term, k)
            if res.value is None:
                return GuardResult(None, res.caused)
            if res.value == TRUE:
                return GuardResult(True, _NO_QUERIES)
            if res.value == FALSE:
                return GuardResult(False, _NO_QUERIES)
            raise AsmError("guard term evaluated to a non-Boolean element")
        if isinstance(g, Timing):
            rs, rt = self.term(g.s, k), self.term(g.t, k)
            if rs.value is not None and rt.value is not None:
                m_s, m_t = self.first_defined(g.s), self.first_defined(g.t)
                return GuardResult(self._timing_truth(m_s, m_t), _NO_QUERIES)
            if rs.value is not None:
                return GuardResult(self._timing_one_sided(True), _NO_QUERIES)
            if rt.value is not None:
                return GuardResult(self._timing_one_sided(False), _NO_QUERIES)
            return GuardResult(None, rs.caused | rt.caused)
        if isinstance(g, KAnd):
            lt, rt = self.guard(g.left, k), self.guard(g.right, k)
            if lt.truth is False or rt.truth is False:
                return GuardResult(False, _NO_QUERIES)
            if lt.truth is True and rt.truth is True:
                return GuardResult(True, _NO_QUERIES)
            if lt.truth is True:
                return GuardResult(None, rt.caused)
            if rt.truth is True:
                return GuardResult(None, lt.caused)
            return GuardResult(None, lt.caused | rt.caused)
        if isinstance(g, KOr):
            lt, rt = self.guard(g.left, k), self.guard(g.right, k)
            if lt.truth is True or rt.truth is True:
                return GuardResult(True, _NO_QUERIES)
            if lt.truth is False and rt.truth is False:
                return GuardResult(False, _NO_QUERIES)
            if lt.truth is False:
                return GuardResult(None, rt.caused)
            if rt.truth is False:
                return GuardResult(None, lt.caused)
            return GuardResult(None, lt.caused | rt.caused)
        if isinstance(g, KNot):
            inner = self.guard(g.guard, k)
            if inner.truth is None:
                return GuardResult(None, inner.caused)
            return GuardResult(not inner.truth, _NO_QUERIES)
        raise AsmError(f"evaluation needs core guards, got {type(g).__name__}")

    # -- rules ----------------------------------------------------------------

    def rule(self, r: Rule, k: Optional[int] = None) -> RuleOutcome:
        if k is None:
            k = len(self.history)
        if isinstance(r, Update):
            terms = list(r.args) + [r.rhs]
            sub = [self.term(t, k) for t in terms]
            if all(res.value is not None for res in sub):
                upd = ModelUpdate(
                    r.head,
                    tuple(res.value for res in sub[:-1]),
                    sub[-1].value,
                )
                return RuleOutcome(_NO_QUERIES, True, Verdict.SUCCESS, UpdateSet.of(upd), False)
            caused = frozenset().union(*(res.caused for res in sub))
            return RuleOutcome(caused, False, Verdict.UNDECIDED, UpdateSet(), False)
        if isinstance(r, Issue):
            sub = [self.term(t, k) for t in r.args]
            if all(res.value is not None for res in sub):
                tpl = self.external.get(r.head, len(r.args))
                if tpl is None:
                    raise UnknownSymbol(f"issue of unknown external {r.head}/{len(r.args)}")
                q = instantiate_template(tpl, tuple(res.value for res in sub))
                return RuleOutcome(self._issue_caused(q, k), True, Verdict.SUCCESS, UpdateSet(), False)
            caused = frozenset().union(*(res.caused for res in sub)) if sub else _NO_QUERIES
            return RuleOutcome(caused, False, Verdict.UNDECIDED, UpdateSet(), False)
        if isinstance(r, Fail):
            return RuleOutcome(_NO_QUERIES, True, Verdict.FAIL, UpdateSet(), False)
        if isinstance(r, Cond):
            g = self.guard(r.guard, k)
            if g.truth is None:
                return RuleOutcome(g.caused, False, Verdict.UNDECIDED, UpdateSet(), False)
            branch = r.then_rule if g.truth else r.else_rule
            if branch is None:
                raise AsmError("evaluation needs core rules (conditional missing else branch)")
            return self.rule(branch, k)
        if isinstance(r, Par):
            sub = [self.rule(c, k) for c in r.rules]
            caused = frozenset().union(*(s.caused for s in sub)) if sub else _NO_QUERIES
            updates = UpdateSet()
            for s in sub:
                updates = updates | s.updates
            clash = updates.has_clash()
            final = self._par_final([s.final for s in sub])
            if not final:
                return RuleOutcome(caused, False, Verdict.UNDECIDED, updates, clash)
            success = self._par_success([s.verdict is Verdict.SUCCESS for s in sub], clash)
            verdict = Verdict.SUCCESS if success else Verdict.FAIL
            return RuleOutcome(caused, True, verdict, updates, clash)
        raise AsmError(f"evaluation needs core rules, got {type(r).__name__}")


def eval_term(
    structure: Structure, history: History, term: Term, external: ExternalVocabulary
) -> TermResult:
    return Evaluator(structure, history, external).term(term)


def eval_guard(
    structure: Structure, history: History, guard: Guard, external: ExternalVocabulary
) -> GuardResult:
    return Evaluator(structure, history, external).guard(guard)


def eval_rule(
    structure: Structure, history: History, rule: Rule, external: ExternalVocabulary
) -> RuleOutcome:
    return Evaluator(structure, history, external).rule(rule)

"""Step execution: issued/pending queries, environments, and the run loop.

A step starts from the empty history and grows it one round at a time.  Each
round is a set of simultaneous replies supplied by an environment, restricted
to the currently pending queries; a history grown this way is coherent by
construction.  The step ends when the rule declares the history final, or
stalls if the environment stops replying first.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .model import AsmError, History, Query, Structure, UpdateSet
from .semantics import Evaluator, Verdict
from .syntax import Program, Rule, desugar, is_core


class EnvironmentViolation(AsmError):
    pass


class StepVerdict(enum.Enum):
    SUCCESS = "success"
    FAIL = "fail"
    STALLED = "stalled"


@dataclass(frozen=True)
class StepView:
    """What an environment may inspect when asked for the next round."""

    state: Structure
    history: History
    step_index: int


@dataclass(frozen=True)
class RoundTrace:
    pending: frozenset[Query]
    round: Optional[frozenset[tuple[Query, str]]]
    final: bool
    verdict: Verdict
    updates: UpdateSet

    def to_json(self) -> dict:
        return {
            "pending": [q.encode() for q in sorted(self.pending)],
            "round": None
            if self.round is None
            else [[q.encode(), f"e:{r}"] for q, r in sorted(self.round)],
            "final": self.final,
            "verdict": self.verdict.value,
            "updates": self.updates.to_json(),
        }


@dataclass(frozen=True)
class StepResult:
    final_history: History
    verdict: StepVerdict
    updates: UpdateSet
    next_state: Optional[Structure]
    trace: tuple[RoundTrace, ...] = ()

    def to_json(self) -> dict:
        out = {
            "verdict": self.verdict.value,
            "history": self.final_history.to_json(),
            "updates": self.updates.to_json(),
            "trace": [t.to_json() for t in self.trace],
        }
        out["nextState"] = self.next_state.to_json() if self.next_state is not None else None
        return out


def issued(structure: Structure, history: History, program: Program) -> frozenset[Query]:
    """Queries caused in the state by any initial segment of the history."""
    rule = _core_rule(program)
    ev = Evaluator(structure, history, program.external)
    out: set[Query] = set()
    for m in range(len(history) + 1):
        out |= ev.rule(rule, m).caused
    return frozenset(out)


def pending(structure: Structure, history: History, program: Program) -> frozenset[Query]:
    """Issued queries that have not been answered yet."""
    return frozenset(q for q in issued(structure, history, program) if not history.answered(q))


def is_coherent(structure: Structure, history: History, program: Program) -> bool:
    """Every answered query was issued by the rounds strictly before it."""
    rule = _core_rule(program)
    ev = Evaluator(structure, history, program.external)
    issued_so_far: set[Query] = set()
    for j, rnd in enumerate(history.rounds):
        issued_so_far |= ev.rule(rule, j).caused
        for q, _reply in rnd:
            if q not in issued_so_far:
                return False
    return True


def is_complete(structure: Structure, history: History, program: Program) -> bool:
    return not pending(structure, history, program)


def apply_updates(structure: Structure, updates: UpdateSet) -> Structure:
    """Successor state: same universe, updated locations, all else as before."""
    return structure.with_updates(updates)


class Environment:
    """Supplies reply rounds for pending queries; ``None`` means no more replies."""

    def next_round(
        self, pending_queries: frozenset[Query], view: StepView
    ) -> Optional[Iterable[tuple[Query, str]]]:
        raise NotImplementedError


class ScriptedEnvironment(Environment):
    """Plays back a fixed list of rounds, one per request."""

    def __init__(self, rounds: Sequence[Iterable[tuple[Query, str]]]):
        self._rounds = [list(r) for r in rounds]
        self._cursor = 0

    def next_round(self, pending_queries, view):
        if self._cursor >= len(self._rounds):
            return None
        rnd = self._rounds[self._cursor]
        self._cursor += 1
        return rnd

    @staticmethod
    def from_json(data: dict) -> "ScriptedEnvironment":
        hist = History.from_json(data)
        return ScriptedEnvironment([sorted(rnd) for rnd in hist.rounds])


ReplyUniverse = Mapping[str, Sequence[str]]
# Keys are the space-joined token form of a query ("l:q0 e:a"); "*" is the
# fallback for queries without their own entry.


def replies_for(universe: ReplyUniverse, q: Query) -> list[str]:
    specific = universe.get(q.pretty())
    if specific is not None:
        return list(specific)
    return list(universe.get("*", []))


class RandomEnvironment(Environment):
    """Seeded random environment: answers a random nonempty subset of pending.

    Replies are drawn from the reply universe; queries with no candidate
    replies are never answered.  Deterministic for a fixed seed.
    """

    def __init__(self, seed: int, universe: Optional[ReplyUniverse] = None):
        self._rng = random.Random(seed)
        self._universe = universe

    def _candidates(self, q: Query, view: StepView) -> list[str]:
        if self._universe is not None:
            return replies_for(self._universe, q)
        return sorted(view.state.elements)

    def next_round(self, pending_queries, view):
        answerable = [
            (q, cands)
            for q in sorted(pending_queries)
            if (cands := self._candidates(q, view))
        ]
        if not answerable:
            return None
        chosen = [pair for pair in answerable if self._rng.random() < 0.5]
        if not chosen:
            chosen = [answerable[self._rng.randrange(len(answerable))]]
        return [(q, self._rng.choice(sorted(cands))) for q, cands in chosen]


class CallbackEnvironment(Environment):
    def __init__(self, fn: Callable[[frozenset[Query], StepView], Optional[list]]):
        self._fn = fn

    def next_round(self, pending_queries, view):
        return self._fn(pending_queries, view)


def _core_rule(program: Program) -> Rule:
    if is_core(program.rule):
        return program.rule
    return desugar(program.rule)


def _validate_round(
    rnd: list[tuple[Query, str]],
    pending_queries: frozenset[Query],
    structure: Structure,
) -> frozenset[tuple[Query, str]]:
    if not rnd:
        raise EnvironmentViolation("environment returned an empty round")
    seen: set[Query] = set()
    for q, reply in rnd:
        if q not in pending_queries:
            raise EnvironmentViolation(f"reply to non-pending query {q.pretty()}")
        if q in seen:
            raise EnvironmentViolation(f"two replies to query {q.pretty()} in one round")
        seen.add(q)
        if reply not in structure.elements:
            raise EnvironmentViolation(f"reply {reply!r} is not a state element")
    return frozenset(rnd)


def step(
    structure: Structure,
    program: Program,
    env: Environment,
    step_index: int = 0,
    max_rounds: int = 10_000,
) -> StepResult:
    """Run one step: grow a history until final, or stall.

    The returned history is coherent by construction.  On success the next
    state is the structure with the final update set applied.
    """
    rule = _core_rule(program)
    history = History()
    issued_so_far: set[Query] = set()
    trace: list[RoundTrace] = []
    for _ in range(max_rounds):
        ev = Evaluator(structure, history, program.external)
        outcome = ev.rule(rule)
        issued_so_far |= outcome.caused
        pend = frozenset(q for q in issued_so_far if not history.answered(q))
        if outcome.final:
            trace.append(
                RoundTrace(pend, None, True, outcome.verdict, outcome.updates)
            )
            if outcome.verdict is Verdict.SUCCESS:
                return StepResult(
                    history,
                    StepVerdict.SUCCESS,
                    outcome.updates,
                    apply_updates(structure, outcome.updates),
                    tuple(trace),
                )
            return StepResult(history, StepVerdict.FAIL, outcome.updates, None, tuple(trace))
        raw = env.next_round(pend, StepView(structure, history, step_index))
        if raw is None:
            trace.append(RoundTrace(pend, None, False, Verdict.UNDECIDED, outcome.updates))
            return StepResult(history, StepVerdict.STALLED, outcome.updates, None, tuple(trace))
        rnd = _validate_round(list(raw), pend, structure)
        trace.append(RoundTrace(pend, rnd, False, Verdict.UNDECIDED, outcome.updates))
        history = history.extend(rnd)
    raise AsmError(f"step did not finish within {max_rounds} rounds")


def run(
    program: Program,
    initial: Structure,
    env: Environment,
    max_steps: int,
) -> list[StepResult]:
    """Iterate steps, threading the successor state; stop on fail or stall."""
    if max_steps < 1:
        raise AsmError("max_steps must be at least 1")
    results: list[StepResult] = []
    state = initial
    for i in range(max_steps):
        res = step(state, program, env, step_index=i)
        results.append(res)
        if res.verdict is not StepVerdict.SUCCESS:
            break
        state = res.next_state
    return results

"""Seeded random generators for programs, states, and histories.

Used by the lemma-checking harness and the test suite.  Everything is driven
by an explicit ``random.Random`` so runs are reproducible from a seed.
"""

from __future__ import annotations

import random
from typing import Optional, Sequence

from .model import (
    ExternalVocabulary,
    History,
    Query,
    Structure,
    SymbolInfo,
    Template,
    Vocabulary,
)
from .syntax import (
    App,
    Bang,
    BoolTerm,
    Cond,
    Fail,
    Guard,
    Issue,
    KAnd,
    KNot,
    KOr,
    NLet,
    Par,
    Program,
    Rule,
    Skip,
    Term,
    Timing,
    TimingOp,
    Update,
    Var,
    VLet,
)

BASE_SYMBOLS = [
    SymbolInfo("c0", 0, static=True, relational=False),
    SymbolInfo("c1", 0, static=True, relational=False),
    SymbolInfo("g1", 1, static=True, relational=False),
    SymbolInfo("d0", 0, static=False, relational=False),
    SymbolInfo("d1", 1, static=False, relational=False),
    SymbolInfo("r0", 0, static=False, relational=True),
    SymbolInfo("r1", 1, static=False, relational=True),
]

BASE_EXTERNALS = [
    ("e0", Template.of("la")),
    ("e1", Template.of("lb", "#1")),
    ("e2", Template.of("#1", "la", "#2")),
]

BASE_LABELS = frozenset({"la", "lb"})


def gen_term(rng: random.Random, depth: int, want_boolean: bool = False) -> Term:
    if want_boolean:
        if depth <= 0 or rng.random() < 0.3:
            return App(rng.choice(["true", "false", "r0"]))
        pick = rng.randrange(5)
        if pick == 0:
            return App("Equal", (gen_term(rng, depth - 1), gen_term(rng, depth - 1)))
        if pick == 1:
            return App("r1", (gen_term(rng, depth - 1),))
        if pick == 2:
            return App("Boole", (gen_term(rng, depth - 1),))
        if pick == 3:
            op = rng.choice(["And", "Or"])
            return App(op, (gen_term(rng, depth - 1, True), gen_term(rng, depth - 1, True)))
        return App("Not", (gen_term(rng, depth - 1, True),))
    if depth <= 0 or rng.random() < 0.3:
        return App(rng.choice(["c0", "c1", "true", "false", "undef", "d0", "e0", "e0"]))
    pick = rng.randrange(7)
    if pick == 0:
        return App("g1", (gen_term(rng, depth - 1),))
    if pick == 1:
        return App("d1", (gen_term(rng, depth - 1),))
    if pick == 2:
        return App("e1", (gen_term(rng, depth - 1),))
    if pick == 3:
        return App("e2", (gen_term(rng, depth - 1), gen_term(rng, depth - 1)))
    if pick == 4:
        return gen_term(rng, depth - 1, want_boolean=True)
    return App("e0")


def gen_guard(rng: random.Random, depth: int) -> Guard:
    if depth <= 0 or rng.random() < 0.4:
        if rng.random() < 0.5:
            return BoolTerm(gen_term(rng, 1, want_boolean=True))
        return Timing(gen_term(rng, 1), gen_term(rng, 1))
    pick = rng.randrange(4)
    if pick == 0:
        return KAnd(gen_guard(rng, depth - 1), gen_guard(rng, depth - 1))
    if pick == 1:
        return KOr(gen_guard(rng, depth - 1), gen_guard(rng, depth - 1))
    if pick == 2:
        return KNot(gen_guard(rng, depth - 1))
    return Timing(gen_term(rng, depth - 1), gen_term(rng, depth - 1))


def gen_rule(rng: random.Random, depth: int) -> Rule:
    if depth <= 0 or rng.random() < 0.2:
        pick = rng.randrange(8)
        if pick == 0:
            return Fail()
        if pick <= 3:
            return Update("d0", (), gen_term(rng, 1))
        if pick <= 5:
            return Issue("e0", ())
        if pick == 6:
            return Issue("e1", (gen_term(rng, 1),))
        return Par(())
    pick = rng.randrange(7)
    if pick == 0:
        target = rng.choice(["d0", "d1", "r0", "r1"])
        arity = 1 if target in ("d1", "r1") else 0
        args = tuple(gen_term(rng, depth - 1) for _ in range(arity))
        rhs = gen_term(rng, depth - 1, want_boolean=target in ("r0", "r1"))
        return Update(target, args, rhs)
    if pick == 1:
        name = rng.choice(["e0", "e1", "e2"])
        arity = {"e0": 0, "e1": 1, "e2": 2}[name]
        return Issue(name, tuple(gen_term(rng, depth - 1) for _ in range(arity)))
    if pick in (2, 3):
        return Cond(gen_guard(rng, depth - 1), gen_rule(rng, depth - 1), gen_rule(rng, depth - 1))
    if pick == 4:
        return Par(tuple(gen_rule(rng, depth - 1) for _ in range(rng.randrange(1, 4))))
    if pick == 5:
        return Cond(gen_guard(rng, depth - 1), gen_rule(rng, depth - 1), Par(()))
    return Par((gen_rule(rng, depth - 1), gen_rule(rng, depth - 1)))


def gen_sugar_rule(rng: random.Random, depth: int) -> Rule:
    """A rule that may use any sugar form; for parser round-trip tests."""
    if depth <= 0 or rng.random() < 0.3:
        return rng.choice([Fail(), Skip(), Update("d0", (), gen_sugar_term(rng, 1)), Issue("e0", ())])
    pick = rng.randrange(7)
    if pick == 0:
        return Cond(gen_sugar_guard(rng, depth - 1), gen_sugar_rule(rng, depth - 1), None)
    if pick == 1:
        return Cond(
            gen_sugar_guard(rng, depth - 1),
            gen_sugar_rule(rng, depth - 1),
            gen_sugar_rule(rng, depth - 1),
        )
    if pick == 2:
        return Par(tuple(gen_sugar_rule(rng, depth - 1) for _ in range(rng.randrange(0, 3))))
    if pick == 3:
        body = Update("d1", (Var("x_"),), gen_sugar_term(rng, depth - 1))
        return NLet((("x_", gen_sugar_term(rng, depth - 1)),), body)
    if pick == 4:
        body = Update("d1", (Var("x_"),), App("c0"))
        return VLet((("x_", gen_sugar_term(rng, depth - 1)),), body)
    if pick == 5:
        return Issue("e1", (gen_sugar_term(rng, depth - 1),))
    return gen_rule(rng, depth)


def gen_sugar_term(rng: random.Random, depth: int) -> Term:
    if rng.random() < 0.25:
        return Bang(gen_term(rng, max(depth - 1, 0)))
    return gen_term(rng, depth)


def gen_sugar_guard(rng: random.Random, depth: int) -> Guard:
    if rng.random() < 0.3:
        op = rng.choice(["prec", "approx", "succeq", "succ"])
        return TimingOp(op, gen_term(rng, 1), gen_term(rng, 1))
    return gen_guard(rng, depth)


def gen_program(rng: random.Random, depth: int = 3) -> Program:
    return Program(
        Vocabulary(BASE_SYMBOLS),
        BASE_LABELS,
        ExternalVocabulary(BASE_EXTERNALS),
        gen_rule(rng, depth),
    )


def gen_structure(rng: random.Random, program: Program, extra: int = 3) -> Structure:
    elements = {f"a{i}" for i in range(extra)}
    all_elems = sorted(elements | {"true", "false", "undef"})
    tables: dict[tuple[str, int], dict[tuple[str, ...], str]] = {}
    for sym in program.vocabulary.symbols:
        if sym.name in ("true", "false", "undef", "Boole", "Equal", "And", "Or", "Not"):
            continue
        if sym.arity > 2:
            continue
        tab: dict[tuple[str, ...], str] = {}
        tuples = [()] if sym.arity == 0 else [(e,) for e in all_elems]
        if sym.arity == 2:
            tuples = [(x, y) for x in all_elems for y in all_elems]
        for args in tuples:
            if rng.random() < 0.6:
                value = rng.choice(["true", "false"]) if sym.relational else rng.choice(all_elems)
                tab[args] = value
        if tab:
            tables[(sym.name, sym.arity)] = tab
    return Structure(program.vocabulary, elements, tables)


def gen_coherent_history(
    rng: random.Random,
    structure: Structure,
    program: Program,
    max_rounds: int = 3,
    replies: Optional[Sequence[str]] = None,
) -> History:
    """Grow a history by answering random subsets of the pending queries."""
    from .engine import pending as pending_of

    pool = list(replies) if replies is not None else sorted(structure.elements)
    history = History()
    for _ in range(max_rounds):
        if rng.random() < 0.2:
            break
        pend = sorted(pending_of(structure, history, program))
        if not pend:
            break
        count = rng.randint(1, len(pend))
        chosen = rng.sample(pend, count)
        history = history.extend([(q, rng.choice(pool)) for q in chosen])
    return history


def gen_arbitrary_history(
    rng: random.Random,
    structure: Structure,
    program: Program,
    max_rounds: int = 3,
) -> History:
    """Random rounds of template-shaped and free-form queries; may be incoherent."""
    elems = sorted(structure.elements)
    labels = sorted(program.labels) or ["l?"]
    queries: list[Query] = []
    for _ in range(rng.randrange(0, 5)):
        if rng.random() < 0.7 and len(program.external) > 0:
            name, _arity, tpl = rng.choice(program.external.entries)
            args = tuple(rng.choice(elems) for _ in range(tpl.arity))
            from .model import instantiate_template

            queries.append(instantiate_template(tpl, args))
        else:
            tokens = []
            for _ in range(rng.randint(1, 3)):
                if rng.random() < 0.5:
                    tokens.append(("l", rng.choice(labels)))
                else:
                    tokens.append(("e", rng.choice(elems)))
            queries.append(Query(tuple(tokens)))
    queries = list(dict.fromkeys(queries))
    rng.shuffle(queries)
    rounds: list[list[tuple[Query, str]]] = []
    for q in queries:
        if rounds and rng.random() < 0.4 and len(rounds) <= max_rounds:
            rounds[-1].append((q, rng.choice(elems)))
        elif len(rounds) < max_rounds:
            rounds.append([(q, rng.choice(elems))])
    return History(rounds)


def gen_bijection(rng: random.Random, structure: Structure) -> dict[str, str]:
    """A random renaming of the universe fixing the three logic constants."""
    movable = sorted(structure.elements - {"true", "false", "undef"})
    shuffled = movable[:]
    rng.shuffle(shuffled)
    mapping = dict(zip(movable, shuffled))
    mapping.update({"true": "true", "false": "false", "undef": "undef"})
    return mapping


def subterms_of_rule(rule: Rule) -> list[Term]:
    """All term occurrences inside a core rule, deduplicated."""
    out: list[Term] = []

    def walk_term(t: Term) -> None:
        out.append(t)
        if isinstance(t, App):
            for a in t.args:
                walk_term(a)

    def walk_guard(g: Guard) -> None:
        if isinstance(g, BoolTerm):
            walk_term(g.term)
        elif isinstance(g, Timing):
            walk_term(g.s)
            walk_term(g.t)
        elif isinstance(g, (KAnd, KOr)):
            walk_guard(g.left)
            walk_guard(g.right)
        elif isinstance(g, KNot):
            walk_guard(g.guard)

    def walk_rule(r: Rule) -> None:
        if isinstance(r, Update):
            for a in r.args:
                walk_term(a)
            walk_term(r.rhs)
        elif isinstance(r, Issue):
            for a in r.args:
                walk_term(a)
        elif isinstance(r, Cond):
            walk_guard(r.guard)
            walk_rule(r.then_rule)
            if r.else_rule is not None:
                walk_rule(r.else_rule)
        elif isinstance(r, Par):
            for sub in r.rules:
                walk_rule(sub)

    walk_rule(rule)
    return list(dict.fromkeys(out))


def subguards_of_rule(rule: Rule) -> list[Guard]:
    out: list[Guard] = []

    def walk_guard(g: Guard) -> None:
        out.append(g)
        if isinstance(g, (KAnd, KOr)):
            walk_guard(g.left)
            walk_guard(g.right)
        elif isinstance(g, KNot):
            walk_guard(g.guard)

    def walk_rule(r: Rule) -> None:
        if isinstance(r, Cond):
            walk_guard(r.guard)
            walk_rule(r.then_rule)
            if r.else_rule is not None:
                walk_rule(r.else_rule)
        elif isinstance(r, Par):
            for sub in r.rules:
                walk_rule(sub)

    walk_rule(rule)
    return list(dict.fromkeys(out))
